#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "rrg/cli/config.hpp"

namespace rrg::cli {

/// Human-readable results go to `out`, progress to `log`.
struct Io {
  std::ostream& out;
  std::ostream& log;
};

/// Each command runs on a fully resolved config and returns the record that
/// went into its run manifest. Commands writing a run directory refuse a
/// non-empty one.
nlohmann::json gen_data(const RunConfig& config, Io io);
nlohmann::json train_sft(const RunConfig& config, Io io);
nlohmann::json train_grpo(const RunConfig& config, Io io);
nlohmann::json generate_reports(const RunConfig& config, Io io);
nlohmann::json eval_metrics(const RunConfig& config, Io io);

struct ComplexityRequest {
  std::vector<double> lens;
  double baseline = 0.0;
};
nlohmann::json complexity(const ComplexityRequest& request);

struct BinomRequest {
  std::uint64_t k = 0;
  std::uint64_t n = 0;
  double p0 = 0.5;
  std::string alternative = "two-sided";
};
nlohmann::json stats_binom(const BinomRequest& request);

struct PowerRequest {
  std::vector<std::uint64_t> n;
  double p0 = 0.5;
  double p1 = 0.0;
  double alpha = 0.05;
  std::string alternative = "greater";
};
nlohmann::json stats_power(const PowerRequest& request);

nlohmann::json stats_kappa(const std::filesystem::path& ratings);
nlohmann::json stats_glm(const std::filesystem::path& ratings, std::size_t interactions);

/// Human-readable table of a record produced by one of the functions above.
void print_record(const std::string& command, const nlohmann::json& record, std::ostream& out);

/// Writes `<out>/<command>.json` and the run manifest when `out` is set.
void persist_record(const std::filesystem::path& out, const std::string& command,
                    const nlohmann::json& record);

/// Throws UsageError when `dir` exists and is not empty.
void require_fresh_dir(const std::filesystem::path& dir);

}  // namespace rrg::cli
