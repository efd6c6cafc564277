#include "rrg/cli/pipeline.hpp"

#include <filesystem>
#include <functional>
#include <ostream>

#include "rrg/cli/manifest.hpp"

namespace rrg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kMarkerDir = "stages";

struct StageContext {
  const fs::path& run;
  std::string config_ini;
  Io io;
  std::vector<std::string> reused;
};

bool stage_intact(const fs::path& dir) {
  if (!fs::exists(dir / kManifestName)) return false;
  const auto m = json::parse(read_text(dir / kManifestName));
  return m.contains("files") && m["files"] == json(hash_tree(dir));
}

/// Runs `body` into `run/name` unless a valid earlier result exists. Returns
/// the stage's run manifest.
json run_stage(StageContext& ctx, const std::string& name, const std::string& upstream,
               const std::function<void(const fs::path&)>& body) {
  const fs::path dir = ctx.run / name;
  const fs::path marker = ctx.run / kMarkerDir / (name + ".json");
  const std::string key = sha256_hex(name + "\n" + ctx.config_ini + "\n" + upstream);
  if (fs::exists(marker)) {
    const auto m = json::parse(read_text(marker));
    if (m.value("key", "") == key && fs::exists(dir / kManifestName) &&
        m.value("manifest_sha256", "") == sha256_file(dir / kManifestName) && stage_intact(dir)) {
      ctx.io.log << "stage " << name << ": reusing earlier result\n";
      ctx.reused.push_back(name);
      return json::parse(read_text(dir / kManifestName));
    }
    fs::remove(marker);
  }
  fs::remove_all(dir);
  ctx.io.log << "stage " << name << ": running\n";
  try {
    body(dir);
  } catch (const std::exception& e) {
    throw StageFailure(name, e.what());
  }
  write_text(marker, json{{"stage", name},
                          {"key", key},
                          {"manifest_sha256", sha256_file(dir / kManifestName)}}
                         .dump(2) +
                         "\n");
  return json::parse(read_text(dir / kManifestName));
}

}  // namespace

PipelineResult run_pipeline(const RunConfig& config, Io io) {
  require_seed(config);
  if (config.out.empty()) throw UsageError("pipeline needs an output directory (--out)");
  validate_settings(config);
  const std::string ini = to_ini(config);
  const fs::path run = config.out;
  if (fs::exists(run) && !fs::is_empty(run)) {
    if (!fs::exists(run / kConfigSnapshotName)) {
      throw UsageError("'" + run.string() + "' is not empty and holds no pipeline run");
    }
    if (read_text(run / kConfigSnapshotName) != ini) {
      throw UsageError("'" + run.string() + "' holds a run with a different config");
    }
    io.log << "resuming run in " << run.string() << '\n';
  }
  fs::create_directories(run);
  write_text(run / kConfigSnapshotName, ini);
  fs::remove(run / kManifestName);

  StageContext ctx{run, ini, io, {}};
  // Stage results print to the log; the pipeline summary goes to `out`.
  const Io stage_io{io.log, io.log};
  auto stage_config = [&](const std::string& command, const fs::path& out) {
    RunConfig c = config;
    c.command = command;
    c.out = out;
    c.data = run / "data";
    return c;
  };

  run_stage(ctx, "data", "", [&](const fs::path& dir) {
    gen_data(stage_config("gen-data", dir), stage_io);
  });
  const std::string data_hash = sha256_file(run / "data" / kManifestName);

  const auto sft = run_stage(ctx, "sft", data_hash, [&](const fs::path& dir) {
    train_sft(stage_config("train-sft", dir), stage_io);
  });
  const std::string sft_hash = sha256_file(run / "sft" / kManifestName);

  const auto select = run_stage(ctx, "select", sft_hash, [&](const fs::path& dir) {
    const auto& s = sft.at("selected");
    const fs::path ckpt = run / "sft" / s.at("path").get<std::string>();
    if (sha256_file(ckpt) != s.at("sha256").get<std::string>()) {
      throw std::runtime_error("selected checkpoint does not match its recorded hash");
    }
    json record{{"command", "select-checkpoint"},
                {"id", s.at("id")},
                {"path", "sft/" + s.at("path").get<std::string>()},
                {"sha256", s.at("sha256")},
                {"metric", s.at("metric")}};
    fs::create_directories(dir);
    write_text(dir / "selection.json", record.dump(2) + "\n");
    write_run_manifest(dir, record);
  });
  const fs::path reference = run / select.at("path").get<std::string>();
  const std::string select_hash = sha256_file(run / "select" / kManifestName);

  const auto grpo = run_stage(ctx, "grpo", data_hash + select_hash, [&](const fs::path& dir) {
    auto c = stage_config("train-grpo", dir);
    c.checkpoint = reference;
    train_grpo(c, stage_io);
  });
  const std::string grpo_hash = sha256_file(run / "grpo" / kManifestName);
  const fs::path final_ckpt = run / "grpo" / grpo.at("final_checkpoint").at("path").get<std::string>();

  const auto eval = run_stage(ctx, "eval", data_hash + select_hash + grpo_hash,
                              [&](const fs::path& dir) {
                                auto c = stage_config("eval-metrics", dir);
                                c.models = {{"sft", reference}, {"grpo", final_ckpt}};
                                eval_metrics(c, stage_io);
                              });

  json m{{"command", "pipeline"}, {"seed", *config.seed}, {"config_sha256", sha256_hex(ini)}};
  for (const char* s : {"data", "sft", "select", "grpo", "eval"}) {
    m["stages"][s] = sha256_file(run / s / kManifestName);
  }
  m["selected_checkpoint"] = select;
  m["selected_checkpoint"].erase("files");
  m["grpo"] = {{"reference_sha256", grpo.at("reference").at("sha256")},
               {"reward_before", grpo.at("reward_before")},
               {"reward_after", grpo.at("reward_after")},
               {"final_sha256", grpo.at("final_checkpoint").at("sha256")}};
  m["metrics"] = eval.at("models");
  if (eval.contains("significance")) m["significance"] = eval.at("significance");

  PipelineResult result;
  result.reused = ctx.reused;
  result.manifest_sha256 = write_run_manifest(run, m);
  result.manifest = json::parse(read_text(run / kManifestName));

  io.out << "stage\tmanifest_sha256\n";
  for (const auto& [s, h] : m["stages"].items()) io.out << s << '\t' << h.get<std::string>() << '\n';
  io.out << "selected " << select.at("id").get<std::string>() << "; validation reward "
         << grpo.at("reward_before").get<double>() << " -> " << grpo.at("reward_after").get<double>()
         << " after GRPO\n";
  io.out << "run manifest sha256: " << result.manifest_sha256 << '\n';
  return result;
}

}  // namespace rrg::cli
