#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "doctest.h"
#include "rrg/numkit/grad_check.hpp"
#include "rrg/numkit/ops.hpp"

using namespace rrg::numkit;

namespace {

Array random_array(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Array a(std::move(shape), 0.0);
  for (auto& v : a.data()) v = n(rng);
  return a;
}

GradCheckReport check(const ScalarFunction& f, ParameterSet& ps) {
  return grad_check(f, ps, 1e-5, 1e-4);
}

}  // namespace

TEST_CASE("gelu matches x * Phi(x)") {
  auto y = gelu(Tensor::constant(Array::vector({0.0, 1.0, 10.0})));
  CHECK(y.value()[0] == 0.0);
  // 1 * Phi(1), Phi via erf
  CHECK(y.value()[1] == doctest::Approx(0.8413447460685429).epsilon(1e-12));
  CHECK(std::abs(y.value()[2] - 10.0) < 1e-6);
}

TEST_CASE("operations reject non-finite input") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(gelu(Tensor::constant(Array::vector({nan}))), NumericError);
  CHECK_THROWS_AS(softmax_last(Tensor::constant(Array::vector({1.0, INFINITY}))), NumericError);
}

TEST_CASE("softmax_last") {
  auto u = softmax_last(Tensor::constant(Array::vector({0, 0, 0, 0})));
  for (double v : u.value().data()) CHECK(v == doctest::Approx(0.25));

  auto p = softmax_last(Tensor::constant(Array::vector({0.0, std::log(3.0)})));
  CHECK(p.value()[0] == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(p.value()[1] == doctest::Approx(0.75).epsilon(1e-14));

  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Array x = random_array({3, 5}, rng, 4.0);
    Array shifted = x;
    for (auto& v : shifted.data()) v += 123.25;
    auto a = softmax_last(Tensor::constant(x));
    auto b = softmax_last(Tensor::constant(shifted));
    for (std::size_t r = 0; r < 3; ++r) {
      double s = 0.0;
      for (double v : a.value().row(r)) s += v;
      CHECK(std::abs(s - 1.0) < 1e-12);
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(std::abs(a.value()[i] - b.value()[i]) < 1e-12);
    }
  }
}

TEST_CASE("rotary_apply rotates pairs") {
  const std::vector<int> zero{0, 0};
  Array x = Array::matrix(2, 4, {1, 2, 3, 4, -1, 0.5, 2, 7});
  auto same = rotary_apply(Tensor::constant(x), zero, 10000.0);
  CHECK(same.value() == x);

  // pair (1, 0) at position p with theta_0 = 1
  const int p = 3;
  auto r = rotary_apply(Tensor::constant(Array::matrix(1, 2, {1.0, 0.0})), std::vector<int>{p},
                        10000.0);
  CHECK(r.value()[0] == doctest::Approx(std::cos(3.0)));
  CHECK(r.value()[1] == doctest::Approx(std::sin(3.0)));

  CHECK_THROWS_AS(rotary_apply(Tensor::constant(Array(Shape{1, 3}, 1.0)), std::vector<int>{0},
                               10000.0),
                  ShapeError);

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Array a = random_array({4, 8}, rng);
    std::vector<int> pos{0, 5, 17, 1000};
    auto out = rotary_apply(Tensor::constant(a), pos, 10000.0, 2);
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j < 8; j += 2) {
        const double before = std::hypot(a.at(i, j), a.at(i, j + 1));
        const double after = std::hypot(out.value().at(i, j), out.value().at(i, j + 1));
        CHECK(std::abs(before - after) < 1e-10);
      }
    }
  }
}

TEST_CASE("cross_entropy") {
  auto uniform = cross_entropy(Tensor::constant(Array(Shape{3, 4}, 0.0)),
                               std::vector<int>{0, 1, 2}, std::vector<int>{1, 1, 1});
  CHECK(uniform.item() == doctest::Approx(std::log(4.0)).epsilon(1e-14));

  double prev = 1e9;
  for (double margin : {1.0, 5.0, 20.0, 60.0}) {
    Array logits(Shape{1, 3}, 0.0);
    logits.at(0, 1) = margin;
    const double l =
        cross_entropy(Tensor::constant(logits), std::vector<int>{1}, std::vector<int>{1}).item();
    CHECK(l < prev);
    prev = l;
  }
  CHECK(prev < 1e-20);

  std::mt19937_64 rng(11);
  Array logits = random_array({4, 5}, rng);
  const std::vector<int> targets{1, 4, 0, 2};
  const double masked =
      cross_entropy(Tensor::constant(logits), targets, std::vector<int>{1, 0, 1, 0}).item();
  // recompute on the kept rows only
  Array sub(Shape{2, 5}, 0.0);
  for (std::size_t j = 0; j < 5; ++j) {
    sub.at(0, j) = logits.at(0, j);
    sub.at(1, j) = logits.at(2, j);
  }
  const double direct =
      cross_entropy(Tensor::constant(sub), std::vector<int>{1, 0}, std::vector<int>{1, 1}).item();
  CHECK(masked == doctest::Approx(direct).epsilon(1e-14));

  CHECK_THROWS_AS(cross_entropy(Tensor::constant(logits), targets, std::vector<int>{0, 0, 0, 0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(cross_entropy(Tensor::constant(logits), std::vector<int>{1, 9, 0, 2},
                                std::vector<int>{1, 1, 1, 1}),
                  std::out_of_range);
}

TEST_CASE("grad_check on half squared norm") {
  std::mt19937_64 rng(1);
  ParameterSet ps;
  ps.add("x", random_array({6}, rng));
  auto f = [](const ParameterSet& p) {
    const Tensor& x = p.get("x");
    return scale(sum(mul(x, x)), 0.5);
  };
  auto report = grad_check(f, ps, 1e-5, 1e-8);
  CHECK(report.passed());
  CHECK(report.checked == 6);
  // analytic gradient equals x
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(ps.get("x").grad()[i] == doctest::Approx(ps.get("x").value()[i]).epsilon(1e-14));
  }
}

TEST_CASE("grad_check flags a wrong gradient") {
  ParameterSet ps;
  ps.add("x", Array::vector({0.3, -1.2, 2.0}));
  auto f = [](const ParameterSet& p) {
    const Tensor& x = p.get("x");
    double s = 0.0;
    for (double v : x.value().data()) s += v * v;
    // claims d/dx = x instead of 2x
    return Tensor::make(Array::scalar(s), {x}, [](Node& self) {
      auto g = self.parents[0]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0] * self.parents[0]->value[i];
    });
  };
  auto report = grad_check(f, ps, 1e-5, 1e-4);
  CHECK_FALSE(report.passed());
  CHECK(report.failures.size() == 3);
}

TEST_CASE("kernel gradients match central differences") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 3; ++trial) {
    ParameterSet ps;
    ps.add("a", random_array({3, 4}, rng));
    ps.add("b", random_array({4, 5}, rng));
    ps.add("c", random_array({3, 5}, rng));
    ps.add("w", random_array({5}, rng));
    ps.add("table", random_array({6, 4}, rng));
    const Array probe = random_array({3, 5}, rng);

    auto weighted = [probe](const Tensor& t) { return sum(mul(t, Tensor::constant(probe))); };

    SUBCASE("matmul, add, sub, mul, add_row") {
      auto r = check(
          [&](const ParameterSet& p) {
            auto m = matmul(p.get("a"), p.get("b"));
            auto e = mul(add(m, p.get("c")), sub(m, p.get("c")));
            return weighted(add_row(e, p.get("w")));
          },
          ps);
      CHECK(r.passed());
    }
    SUBCASE("gelu composed with matmul") {
      auto r = check([&](const ParameterSet& p) { return weighted(gelu(matmul(p.get("a"), p.get("b")))); },
                     ps);
      CHECK(r.passed());
    }
    SUBCASE("transpose, concat, slice") {
      auto r = check(
          [&](const ParameterSet& p) {
            auto t = transpose(p.get("b"));                            // 5x4
            auto rows = concat({t, p.get("table")}, 0);                // 11x4
            auto cols = concat({p.get("a"), slice_cols(p.get("c"), 1, 4)}, 1);  // 3x7
            auto s = slice_rows(rows, 2, 9);                           // 7x4
            auto wide = concat({matmul(cols, s), slice_cols(p.get("c"), 0, 1)}, 1);  // 3x5
            return weighted(add(wide, p.get("c")));
          },
          ps);
      CHECK(r.passed());
    }
    SUBCASE("gather_rows with repeated ids") {
      const std::vector<int> ids{2, 0, 2};
      auto r = check(
          [&](const ParameterSet& p) {
            return weighted(matmul(gather_rows(p.get("table"), ids), p.get("b")));
          },
          ps);
      CHECK(r.passed());
    }
    SUBCASE("softmax and rms_norm") {
      auto r = check(
          [&](const ParameterSet& p) {
            return weighted(rms_norm(softmax_last(p.get("c")), p.get("w")));
          },
          ps);
      CHECK(r.passed());
    }
    SUBCASE("rotary") {
      const std::vector<int> pos{4, 1, 9};
      auto r = check(
          [&](const ParameterSet& p) {
            return sum(mul(rotary_apply(p.get("a"), pos, 100.0, 2),
                           Tensor::constant(Array(Shape{3, 4}, 0.7))));
          },
          ps);
      CHECK(r.passed());
    }
    SUBCASE("masked attention") {
      AttentionMask mask(3, 6, true);
      mask.set(0, 5, false);
      mask.set(1, 0, false);
      mask.set(2, 3, false);
      auto r = check(
          [&](const ParameterSet& p) {
            auto q = p.get("a");
            auto kv = p.get("table");
            return weighted(matmul(attention(q, kv, scale(kv, 0.5), mask, 2), p.get("b")));
          },
          ps);
      CHECK(r.passed());
    }
    SUBCASE("cross entropy and token log-probs") {
      const std::vector<int> targets{1, 4, 0};
      const std::vector<int> mask{1, 0, 1};
      auto r = check(
          [&](const ParameterSet& p) {
            auto logits = matmul(p.get("a"), p.get("b"));
            return add(cross_entropy(logits, targets, mask),
                       scale(sum(token_log_probs(logits, targets)), 0.3));
          },
          ps);
      CHECK(r.passed());
    }
  }
}

TEST_CASE("gradient accumulates across uses and passes") {
  ParameterSet ps;
  ps.add("x", Array::vector({1.0, 2.0}));
  const Tensor& x = ps.get("x");
  backward(sum(add(x, x)));
  CHECK(x.grad()[0] == 2.0);
  backward(sum(x));
  CHECK(x.grad()[0] == 3.0);
  ps.zero_grad();
  CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("snapshot round trip is bit exact") {
  std::mt19937_64 rng(5);
  ParameterSet ps;
  ps.add("encoder.projection", random_array({4, 3}, rng), true);
  ps.add("decoder.bias", random_array({7}, rng));
  ps.add("scalar", Array::scalar(std::numbers::pi));
  std::stringstream buf;
  write_snapshot(buf, ps);
  const std::string bytes = buf.str();
  CHECK(bytes.substr(0, 4) == "CXL2");
  ParameterSet back = read_snapshot(buf);
  CHECK(back.bitwise_equal(ps));

  std::stringstream again;
  write_snapshot(again, back);
  CHECK(again.str() == bytes);

  std::stringstream bad("XXXX");
  CHECK_THROWS(read_snapshot(bad));
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS(read_snapshot(truncated));
}

TEST_CASE("operations are deterministic") {
  std::mt19937_64 rng(9);
  Array a = random_array({5, 8}, rng);
  AttentionMask mask(5, 5, true);
  auto run = [&] {
    auto t = Tensor::constant(a);
    return attention(rotary_apply(t, std::vector<int>{0, 1, 2, 3, 4}, 10000.0, 2), t, t, mask, 2)
        .value();
  };
  CHECK(run() == run());
}
