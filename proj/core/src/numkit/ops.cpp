#include "rrg/numkit/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Core>

namespace rrg::numkit {

namespace {

void require_rank2(const Array& a, const char* op) {
  if (a.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected rank-2 operand, got " +
                     shape_string(a.shape()));
  }
}

void require_same_shape(const Array& a, const Array& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                     " vs " + shape_string(b.shape()));
  }
}

Tensor finish(Array out, std::vector<Tensor> parents, BackwardFn fn, const char* op) {
  require_finite(out, op);
  return Tensor::make(std::move(out), std::move(parents), std::move(fn));
}

Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

// c[m x n] += a[m x k] * b[k x n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  MutMap(c, m, n).noalias() += ConstMap(a, m, k) * ConstMap(b, k, n);
}

// c[m x k] += a[m x n] * b[k x n]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
             std::size_t k) {
  MutMap(c, m, k).noalias() += ConstMap(a, m, n) * ConstMap(b, k, n).transpose();
}

// c[k x n] += a[m x k]^T * b[m x n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  MutMap(c, k, n).noalias() += ConstMap(a, m, k).transpose() * ConstMap(b, m, n);
}

}  // namespace

AttentionMask::AttentionMask(std::size_t rows, std::size_t cols, bool fill)
    : rows_(rows), cols_(cols), bits_(rows * cols, fill ? 1 : 0) {}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a.value(), "matmul");
  require_rank2(b.value(), "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw ShapeError("matmul: inner extents differ " + shape_string(a.shape()) + " * " +
                     shape_string(b.shape()));
  }
  Array out(Shape{m, n}, 0.0);
  gemm_nn(a.value().data().data(), b.value().data().data(), out.data().data(), m, k, n);
  return finish(
      std::move(out), {a, b},
      [m, k, n](Node& self) {
        Node& pa = parent(self, 0);
        Node& pb = parent(self, 1);
        const double* g = self.grad.data().data();
        if (pa.requires_grad) {
          gemm_nt(g, pb.value.data().data(), pa.grad_buffer().data(), m, n, k);
        }
        if (pb.requires_grad) {
          gemm_tn(pa.value.data().data(), g, pb.grad_buffer().data(), m, k, n);
        }
      },
      "matmul");
}

Tensor transpose(const Tensor& a) {
  require_rank2(a.value(), "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  Array out(Shape{n, m}, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(j, i) = a.value().at(i, j);
  return finish(
      std::move(out), {a},
      [m, n](Node& self) {
        auto g = parent(self, 0).grad_buffer();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad.at(j, i);
      },
      "transpose");
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a.value(), b.value(), "add");
  Array out = a.value();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  return finish(
      std::move(out), {a, b},
      [](Node& self) {
        for (std::size_t p = 0; p < 2; ++p) {
          if (parent(self, p).requires_grad) parent(self, p).accumulate(self.grad.data());
        }
      },
      "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a.value(), b.value(), "sub");
  Array out = a.value();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  return finish(
      std::move(out), {a, b},
      [](Node& self) {
        auto g = self.grad.data();
        if (parent(self, 0).requires_grad) parent(self, 0).accumulate(g);
        if (parent(self, 1).requires_grad) {
          auto gb = parent(self, 1).grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        }
      },
      "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a.value(), b.value(), "mul");
  Array out = a.value();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
  return finish(
      std::move(out), {a, b},
      [](Node& self) {
        auto g = self.grad.data();
        Node& pa = parent(self, 0);
        Node& pb = parent(self, 1);
        if (pa.requires_grad) {
          auto ga = pa.grad_buffer();
          auto bv = pb.value.data();
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
        }
        if (pb.requires_grad) {
          auto gb = pb.grad_buffer();
          auto av = pa.value.data();
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
        }
      },
      "mul");
}

Tensor scale(const Tensor& a, double factor) {
  Array out = a.value();
  for (auto& v : out.data()) v *= factor;
  return finish(
      std::move(out), {a},
      [factor](Node& self) {
        auto g = self.grad.data();
        auto ga = parent(self, 0).grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
      },
      "scale");
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  require_rank2(a.value(), "add_row");
  const std::size_t m = a.rows(), n = a.cols();
  if (row.size() != n) {
    throw ShapeError("add_row: row of " + std::to_string(row.size()) +
                     " does not match width " + std::to_string(n));
  }
  Array out = a.value();
  auto rv = row.value().data();
  for (std::size_t i = 0; i < m; ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < n; ++j) r[j] += rv[j];
  }
  return finish(
      std::move(out), {a, row},
      [m, n](Node& self) {
        if (parent(self, 0).requires_grad) parent(self, 0).accumulate(self.grad.data());
        if (parent(self, 1).requires_grad) {
          auto gr = parent(self, 1).grad_buffer();
          for (std::size_t i = 0; i < m; ++i) {
            auto g = self.grad.row(i);
            for (std::size_t j = 0; j < n; ++j) gr[j] += g[j];
          }
        }
      },
      "add_row");
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return finish(
      Array::scalar(s), {a},
      [](Node& self) {
        const double g = self.grad[0];
        for (auto& v : parent(self, 0).grad_buffer()) v += g;
      },
      "sum");
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw ShapeError("mean: empty array");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  if (axis > 1) throw ShapeError("concat: axis must be 0 or 1");
  for (const auto& p : parts) require_rank2(p.value(), "concat");
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  const std::size_t fixed = axis == 0 ? parts[0].cols() : parts[0].rows();
  for (const auto& p : parts) {
    const std::size_t other = axis == 0 ? p.cols() : p.rows();
    if (other != fixed) {
      throw ShapeError("concat: incompatible " + shape_string(p.shape()) + " along axis " +
                       std::to_string(axis));
    }
    offsets.push_back(total);
    total += axis == 0 ? p.rows() : p.cols();
  }
  Array out(axis == 0 ? Shape{total, fixed} : Shape{fixed, total}, 0.0);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Array& v = parts[k].value();
    for (std::size_t i = 0; i < v.rows(); ++i)
      for (std::size_t j = 0; j < v.cols(); ++j) {
        if (axis == 0)
          out.at(offsets[k] + i, j) = v.at(i, j);
        else
          out.at(i, offsets[k] + j) = v.at(i, j);
      }
  }
  std::vector<Tensor> ps(parts.begin(), parts.end());
  return finish(
      std::move(out), std::move(ps),
      [offsets, axis](Node& self) {
        for (std::size_t k = 0; k < self.parents.size(); ++k) {
          Node& p = parent(self, k);
          if (!p.requires_grad) continue;
          auto g = p.grad_buffer();
          const std::size_t r = p.value.rows(), c = p.value.cols();
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) {
              g[i * c + j] += axis == 0 ? self.grad.at(offsets[k] + i, j)
                                        : self.grad.at(i, offsets[k] + j);
            }
        }
      },
      "concat");
}

Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  require_rank2(a.value(), "slice_rows");
  if (begin > end || end > a.rows()) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") out of " + shape_string(a.shape()));
  }
  const std::size_t n = a.cols();
  auto src = a.value().data().subspan(begin * n, (end - begin) * n);
  Array out(Shape{end - begin, n}, std::vector<double>(src.begin(), src.end()));
  return finish(
      std::move(out), {a},
      [begin, n](Node& self) {
        auto g = parent(self, 0).grad_buffer();
        auto sg = self.grad.data();
        for (std::size_t i = 0; i < sg.size(); ++i) g[begin * n + i] += sg[i];
      },
      "slice_rows");
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  require_rank2(a.value(), "slice_cols");
  if (begin > end || end > a.cols()) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") out of " + shape_string(a.shape()));
  }
  const std::size_t m = a.rows(), n = a.cols(), w = end - begin;
  Array out(Shape{m, w}, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) out.at(i, j) = a.value().at(i, begin + j);
  return finish(
      std::move(out), {a},
      [m, n, w, begin](Node& self) {
        auto g = parent(self, 0).grad_buffer();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < w; ++j) g[i * n + begin + j] += self.grad.at(i, j);
      },
      "slice_cols");
}

Tensor gather_rows(const Tensor& table, std::span<const int> ids) {
  require_rank2(table.value(), "gather_rows");
  const std::size_t n = table.cols();
  Array out(Shape{ids.size(), n}, 0.0);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= table.rows()) {
      throw ShapeError("gather_rows: id " + std::to_string(ids[i]) + " outside table of " +
                       std::to_string(table.rows()) + " rows");
    }
    auto src = table.value().row(static_cast<std::size_t>(ids[i]));
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  std::vector<int> idx(ids.begin(), ids.end());
  return finish(
      std::move(out), {table},
      [idx = std::move(idx), n](Node& self) {
        auto g = parent(self, 0).grad_buffer();
        for (std::size_t i = 0; i < idx.size(); ++i) {
          auto sg = self.grad.row(i);
          double* dst = g.data() + static_cast<std::size_t>(idx[i]) * n;
          for (std::size_t j = 0; j < n; ++j) dst[j] += sg[j];
        }
      },
      "gather_rows");
}

Tensor gelu(const Tensor& x) {
  require_finite(x.value(), "gelu");
  Array out = x.value();
  for (auto& v : out.data()) v = v * normal_cdf(v);
  return finish(
      std::move(out), {x},
      [](Node& self) {
        Node& px = parent(self, 0);
        auto g = px.grad_buffer();
        auto xv = px.value.data();
        auto sg = self.grad.data();
        for (std::size_t i = 0; i < g.size(); ++i) {
          g[i] += sg[i] * (normal_cdf(xv[i]) + xv[i] * normal_pdf(xv[i]));
        }
      },
      "gelu");
}

Tensor softmax_last(const Tensor& x) {
  require_finite(x.value(), "softmax_last");
  const Array& xv = x.value();
  if (xv.size() == 0 || (xv.rank() > 0 && xv.shape().back() == 0)) {
    throw ShapeError("softmax_last: last extent must be >= 1");
  }
  const std::size_t width = xv.rank() == 0 ? 1 : xv.shape().back();
  const std::size_t count = xv.size() / width;
  Array out(xv.shape(), 0.0);
  for (std::size_t r = 0; r < count; ++r) {
    const double* in = xv.data().data() + r * width;
    double* o = out.data().data() + r * width;
    const double mx = *std::max_element(in, in + width);
    double z = 0.0;
    for (std::size_t j = 0; j < width; ++j) z += (o[j] = std::exp(in[j] - mx));
    for (std::size_t j = 0; j < width; ++j) o[j] /= z;
  }
  return finish(
      std::move(out), {x},
      [width, count](Node& self) {
        auto g = parent(self, 0).grad_buffer();
        for (std::size_t r = 0; r < count; ++r) {
          const double* y = self.value.data().data() + r * width;
          const double* dy = self.grad.data().data() + r * width;
          double dot = 0.0;
          for (std::size_t j = 0; j < width; ++j) dot += dy[j] * y[j];
          for (std::size_t j = 0; j < width; ++j) g[r * width + j] += y[j] * (dy[j] - dot);
        }
      },
      "softmax_last");
}

Tensor rms_norm(const Tensor& x, const Tensor& weight, double eps) {
  require_rank2(x.value(), "rms_norm");
  const std::size_t m = x.rows(), n = x.cols();
  if (weight.size() != n) throw ShapeError("rms_norm: weight width mismatch");
  Array out(Shape{m, n}, 0.0);
  std::vector<double> inv_rms(m);
  for (std::size_t i = 0; i < m; ++i) {
    auto r = x.value().row(i);
    double ss = 0.0;
    for (double v : r) ss += v * v;
    inv_rms[i] = 1.0 / std::sqrt(ss / static_cast<double>(n) + eps);
    auto o = out.row(i);
    for (std::size_t j = 0; j < n; ++j) o[j] = r[j] * inv_rms[i] * weight.value()[j];
  }
  return finish(
      std::move(out), {x, weight},
      [m, n, inv_rms = std::move(inv_rms)](Node& self) {
        Node& px = parent(self, 0);
        Node& pw = parent(self, 1);
        auto w = pw.value.data();
        std::vector<double> gx(n);
        for (std::size_t i = 0; i < m; ++i) {
          auto xr = px.value.row(i);
          auto dy = self.grad.row(i);
          if (pw.requires_grad) {
            auto gw = pw.grad_buffer();
            for (std::size_t j = 0; j < n; ++j) gw[j] += dy[j] * xr[j] * inv_rms[i];
          }
          if (px.requires_grad) {
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              gx[j] = dy[j] * w[j];
              dot += gx[j] * xr[j] * inv_rms[i];
            }
            dot /= static_cast<double>(n);
            auto g = px.grad_buffer();
            for (std::size_t j = 0; j < n; ++j) {
              g[i * n + j] += inv_rms[i] * (gx[j] - xr[j] * inv_rms[i] * dot);
            }
          }
        }
      },
      "rms_norm");
}

Tensor rotary_apply(const Tensor& x, std::span<const int> position_ids, double base,
                    std::size_t heads) {
  require_rank2(x.value(), "rotary_apply");
  const std::size_t m = x.rows(), d = x.cols();
  if (heads == 0 || d % heads != 0) throw ShapeError("rotary_apply: heads must divide dim");
  const std::size_t hd = d / heads;
  if (hd % 2 != 0) throw ShapeError("rotary_apply: dimension per head must be even");
  if (position_ids.size() != m) {
    throw ShapeError("rotary_apply: " + std::to_string(position_ids.size()) +
                     " position ids for " + std::to_string(m) + " rows");
  }
  // cos/sin tables [m x hd/2]
  const std::size_t half = hd / 2;
  std::vector<double> cs(m * half), sn(m * half);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < half; ++j) {
      const double theta =
          std::pow(base, -2.0 * static_cast<double>(j) / static_cast<double>(hd));
      const double angle = static_cast<double>(position_ids[i]) * theta;
      cs[i * half + j] = std::cos(angle);
      sn[i * half + j] = std::sin(angle);
    }
  }
  Array out(Shape{m, d}, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    auto in = x.value().row(i);
    auto o = out.row(i);
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t j = 0; j < half; ++j) {
        const std::size_t c0 = h * hd + 2 * j;
        const double c = cs[i * half + j], s = sn[i * half + j];
        o[c0] = in[c0] * c - in[c0 + 1] * s;
        o[c0 + 1] = in[c0] * s + in[c0 + 1] * c;
      }
    }
  }
  return finish(
      std::move(out), {x},
      [m, d, hd, half, heads, cs = std::move(cs), sn = std::move(sn)](Node& self) {
        auto g = parent(self, 0).grad_buffer();
        for (std::size_t i = 0; i < m; ++i) {
          auto dy = self.grad.row(i);
          for (std::size_t h = 0; h < heads; ++h) {
            for (std::size_t j = 0; j < half; ++j) {
              const std::size_t c0 = h * hd + 2 * j;
              const double c = cs[i * half + j], s = sn[i * half + j];
              g[i * d + c0] += dy[c0] * c + dy[c0 + 1] * s;
              g[i * d + c0 + 1] += -dy[c0] * s + dy[c0 + 1] * c;
            }
          }
        }
      },
      "rotary_apply");
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionMask& mask,
                 std::size_t heads) {
  require_rank2(q.value(), "attention");
  require_rank2(k.value(), "attention");
  require_rank2(v.value(), "attention");
  const std::size_t m = q.rows(), n = k.rows(), d = q.cols();
  if (k.cols() != d || v.cols() != d || v.rows() != n) {
    throw ShapeError("attention: q/k/v shapes " + shape_string(q.shape()) + ", " +
                     shape_string(k.shape()) + ", " + shape_string(v.shape()));
  }
  if (mask.rows() != m || mask.cols() != n) {
    throw ShapeError("attention: mask is " + std::to_string(mask.rows()) + "x" +
                     std::to_string(mask.cols()) + ", expected " + std::to_string(m) + "x" +
                     std::to_string(n));
  }
  if (heads == 0 || d % heads != 0) throw ShapeError("attention: heads must divide dim");
  const std::size_t hd = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
  const double* qv = q.value().data().data();
  const double* kv = k.value().data().data();
  const double* vv = v.value().data().data();

  // probabilities [heads][m][n]
  std::vector<double> probs(heads * m * n, 0.0);
  Array out(Shape{m, d}, 0.0);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * hd;
    for (std::size_t i = 0; i < m; ++i) {
      double* p = probs.data() + (h * m + i) * n;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j) {
        if (!mask.allowed(i, j)) continue;
        double s = 0.0;
        for (std::size_t c = 0; c < hd; ++c) s += qv[i * d + off + c] * kv[j * d + off + c];
        p[j] = s * inv_sqrt;
        mx = std::max(mx, p[j]);
      }
      if (mx == -std::numeric_limits<double>::infinity()) {
        throw ShapeError("attention: row " + std::to_string(i) + " has no allowed column");
      }
      double z = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (!mask.allowed(i, j)) {
          p[j] = 0.0;
          continue;
        }
        z += (p[j] = std::exp(p[j] - mx));
      }
      double* o = out.data().data() + i * d + off;
      for (std::size_t j = 0; j < n; ++j) {
        p[j] /= z;
        if (p[j] == 0.0) continue;
        for (std::size_t c = 0; c < hd; ++c) o[c] += p[j] * vv[j * d + off + c];
      }
    }
  }
  return finish(
      std::move(out), {q, k, v},
      [m, n, d, hd, heads, inv_sqrt, probs = std::move(probs)](Node& self) {
        Node& pq = parent(self, 0);
        Node& pk = parent(self, 1);
        Node& pv = parent(self, 2);
        const double* qv = pq.value.data().data();
        const double* kv = pk.value.data().data();
        const double* vv = pv.value.data().data();
        const double* dout = self.grad.data().data();
        double* gq = pq.requires_grad ? pq.grad_buffer().data() : nullptr;
        double* gk = pk.requires_grad ? pk.grad_buffer().data() : nullptr;
        double* gv = pv.requires_grad ? pv.grad_buffer().data() : nullptr;
        std::vector<double> dp(n);
        for (std::size_t h = 0; h < heads; ++h) {
          const std::size_t off = h * hd;
          for (std::size_t i = 0; i < m; ++i) {
            const double* p = probs.data() + (h * m + i) * n;
            const double* go = dout + i * d + off;
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              if (p[j] == 0.0) {
                dp[j] = 0.0;
                continue;
              }
              double s = 0.0;
              for (std::size_t c = 0; c < hd; ++c) s += go[c] * vv[j * d + off + c];
              dp[j] = s;
              dot += s * p[j];
              if (gv) {
                for (std::size_t c = 0; c < hd; ++c) gv[j * d + off + c] += p[j] * go[c];
              }
            }
            for (std::size_t j = 0; j < n; ++j) {
              if (p[j] == 0.0) continue;
              const double ds = p[j] * (dp[j] - dot) * inv_sqrt;
              if (gq) {
                for (std::size_t c = 0; c < hd; ++c) gq[i * d + off + c] += ds * kv[j * d + off + c];
              }
              if (gk) {
                for (std::size_t c = 0; c < hd; ++c) gk[j * d + off + c] += ds * qv[i * d + off + c];
              }
            }
          }
        }
      },
      "attention");
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets,
                     std::span<const int> mask) {
  require_rank2(logits.value(), "cross_entropy");
  require_finite(logits.value(), "cross_entropy");
  const std::size_t t = logits.rows(), vocab = logits.cols();
  if (targets.size() != t || mask.size() != t) {
    throw ShapeError("cross_entropy: targets/mask length must equal " + std::to_string(t));
  }
  std::size_t live = 0;
  for (int m : mask) live += m != 0 ? 1 : 0;
  if (live == 0) throw std::invalid_argument("cross_entropy: mask is all zero");

  Array probs(Shape{t, vocab}, 0.0);
  double loss = 0.0;
  for (std::size_t i = 0; i < t; ++i) {
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= vocab) {
      throw std::out_of_range("cross_entropy: target id " + std::to_string(targets[i]) +
                              " outside vocabulary of " + std::to_string(vocab));
    }
    auto row = logits.value().row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    auto p = probs.row(i);
    for (std::size_t j = 0; j < vocab; ++j) z += (p[j] = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < vocab; ++j) p[j] /= z;
    if (mask[i] != 0) loss += -(row[static_cast<std::size_t>(targets[i])] - mx - std::log(z));
  }
  const double inv = 1.0 / static_cast<double>(live);
  std::vector<int> tg(targets.begin(), targets.end());
  std::vector<int> mk(mask.begin(), mask.end());
  return finish(
      Array::scalar(loss * inv), {logits},
      [probs = std::move(probs), tg = std::move(tg), mk = std::move(mk), inv, vocab](Node& self) {
        auto g = parent(self, 0).grad_buffer();
        const double up = self.grad[0] * inv;
        for (std::size_t i = 0; i < tg.size(); ++i) {
          if (mk[i] == 0) continue;
          auto p = probs.row(i);
          for (std::size_t j = 0; j < vocab; ++j) g[i * vocab + j] += up * p[j];
          g[i * vocab + static_cast<std::size_t>(tg[i])] -= up;
        }
      },
      "cross_entropy");
}

Tensor token_log_probs(const Tensor& logits, std::span<const int> targets) {
  require_rank2(logits.value(), "token_log_probs");
  require_finite(logits.value(), "token_log_probs");
  const std::size_t t = logits.rows(), vocab = logits.cols();
  if (targets.size() != t) throw ShapeError("token_log_probs: targets length mismatch");
  Array probs(Shape{t, vocab}, 0.0);
  Array out(Shape{t}, 0.0);
  for (std::size_t i = 0; i < t; ++i) {
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= vocab) {
      throw std::out_of_range("token_log_probs: target id " + std::to_string(targets[i]) +
                              " outside vocabulary");
    }
    auto row = logits.value().row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    auto p = probs.row(i);
    for (std::size_t j = 0; j < vocab; ++j) z += (p[j] = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < vocab; ++j) p[j] /= z;
    out[i] = row[static_cast<std::size_t>(targets[i])] - mx - std::log(z);
  }
  std::vector<int> tg(targets.begin(), targets.end());
  return finish(
      std::move(out), {logits},
      [probs = std::move(probs), tg = std::move(tg), vocab](Node& self) {
        auto g = parent(self, 0).grad_buffer();
        for (std::size_t i = 0; i < tg.size(); ++i) {
          const double up = self.grad[i];
          if (up == 0.0) continue;
          auto p = probs.row(i);
          for (std::size_t j = 0; j < vocab; ++j) g[i * vocab + j] -= up * p[j];
          g[i * vocab + static_cast<std::size_t>(tg[i])] += up;
        }
      },
      "token_log_probs");
}

}  // namespace rrg::numkit
