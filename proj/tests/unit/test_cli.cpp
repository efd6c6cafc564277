#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "rrg/cli/config.hpp"
#include "rrg/cli/dispatch.hpp"
#include "rrg/cli/manifest.hpp"
#include "rrg/cli/pipeline.hpp"
#include "rrg/stats/ratings.hpp"

namespace fs = std::filesystem;
using namespace rrg;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run rrg_cmd(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  Run r;
  r.code = cli::dispatch(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("rrg_test_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

const char* kSmallIni = R"([run]
seed = 11

[data]
studies = 120

[sft]
epochs = 1
warmup = 2

[grpo]
prompts_per_epoch = 4
prompts_per_step = 4
validations_per_epoch = 1
max_completion_tokens = 48
)";

}  // namespace

TEST_CASE("complexity and binomial commands print the published values") {
  const auto cx = rrg_cmd({"complexity", "--lens", "3586,607", "--baseline", "6407"});
  CHECK(cx.code == 0);
  CHECK(cx.out.find("0.313\t68.7%") != std::string::npos);
  CHECK(cx.out.find("0.009\t99.1%") != std::string::npos);

  const auto b = rrg_cmd({"stats", "binom", "--k", "161", "--n", "360", "--p0", "0.5"});
  CHECK(b.code == 0);
  CHECK(b.out.find("\t0.051\n") != std::string::npos);

  const auto j = rrg_cmd({"stats", "binom", "--k", "48", "--n", "96", "--json"});
  CHECK(j.code == 0);
  CHECK(json::parse(j.out)["p_value"].get<double>() == doctest::Approx(1.0));
}

TEST_CASE("exit codes separate usage errors from domain errors") {
  CHECK(rrg_cmd({}).code == cli::kExitUsage);
  CHECK(rrg_cmd({"no-such-command"}).code == cli::kExitUsage);
  CHECK(rrg_cmd({"stats"}).code == cli::kExitUsage);
  CHECK(rrg_cmd({"stats", "binom", "--k", "3"}).code == cli::kExitUsage);
  CHECK(rrg_cmd({"complexity", "--lens", "x", "--baseline", "1"}).code == cli::kExitUsage);
  CHECK(rrg_cmd({"--help"}).code == cli::kExitOk);

  CHECK(rrg_cmd({"stats", "binom", "--k", "9", "--n", "5"}).code == cli::kExitDomain);
  CHECK(rrg_cmd({"stats", "binom", "--k", "1", "--n", "5", "--alternative", "sideways"}).code ==
        cli::kExitDomain);

  TempDir tmp("exit");
  // stochastic commands need a seed; inputs are checked before work starts
  CHECK(rrg_cmd({"gen-data", "--out", (tmp.path / "d").string()}).code == cli::kExitUsage);
  CHECK(!fs::exists(tmp.path / "d"));
  const auto missing = rrg_cmd({"train-sft", "--seed", "1", "--data",
                                (tmp.path / "absent").string(), "--out",
                                (tmp.path / "s").string()});
  CHECK(missing.code == cli::kExitUsage);
  CHECK(!fs::exists(tmp.path / "s"));
  CHECK(rrg_cmd({"gen-data", "--seed", "1", "--sft-epochs", "2"}).code == cli::kExitUsage);
}

TEST_CASE("config files load, flags override and snapshots round-trip") {
  TempDir tmp("config");
  const auto ini = tmp.path / "run.ini";
  cli::write_text(ini, kSmallIni);
  cli::RunConfig c;
  cli::apply_ini(ini, c);
  CHECK(*c.seed == 11);
  CHECK(c.data_settings.studies == 120);
  CHECK(c.grpo.max_completion_tokens == 48);
  CHECK(c.sft.peak_lr == 3e-3);

  // snapshot reads back to the same snapshot
  c.grpo.learning_rate = 3e-5;
  c.reward = {{{"bleu4", 0.5}, {"rougeL", 0.5}}};
  c.model.d_model = 40;
  const auto snap = tmp.path / "snap.ini";
  cli::write_text(snap, cli::to_ini(c));
  cli::RunConfig back;
  cli::apply_ini(snap, back);
  CHECK(cli::to_ini(back) == cli::to_ini(c));
  CHECK(cli::format_double(3e-5) == "3e-05");

  cli::write_text(tmp.path / "bad.ini", "[sft]\nepochz = 3\n");
  cli::RunConfig bad;
  CHECK_THROWS_AS(cli::apply_ini(tmp.path / "bad.ini", bad), cli::UsageError);
  cli::write_text(tmp.path / "bad2.ini", "[sft]\nepochs = three\n");
  CHECK_THROWS_AS(cli::apply_ini(tmp.path / "bad2.ini", bad), cli::UsageError);

  // the flag wins over the file
  const auto out = tmp.path / "data";
  const auto r = rrg_cmd({"gen-data", "--config", ini.string(), "--studies", "40", "--out",
                          out.string()});
  REQUIRE(r.code == 0);
  cli::RunConfig written;
  cli::apply_ini(out / cli::kConfigSnapshotName, written);
  CHECK(written.data_settings.studies == 40);
  CHECK(*written.seed == 11);
  // a non-empty run directory is never overwritten
  CHECK(rrg_cmd({"gen-data", "--config", ini.string(), "--out", out.string()}).code ==
        cli::kExitUsage);
}

TEST_CASE("sha256 matches the standard test vector") {
  CHECK(cli::sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(cli::sha256_hex("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("pipeline is deterministic, resumable and wires its stages") {
  TempDir tmp("pipeline");
  const auto ini = tmp.path / "run.ini";
  cli::write_text(ini, kSmallIni);
  const auto a = tmp.path / "a";
  const auto b = tmp.path / "b";
  const auto ra = rrg_cmd({"pipeline", "--config", ini.string(), "--out", a.string()});
  REQUIRE(ra.code == 0);
  const auto rb = rrg_cmd({"pipeline", "--config", ini.string(), "--out", b.string()});
  REQUIRE(rb.code == 0);
  CHECK(cli::sha256_file(a / cli::kManifestName) == cli::sha256_file(b / cli::kManifestName));

  const auto m = json::parse(cli::read_text(a / cli::kManifestName));
  const auto sft = json::parse(cli::read_text(a / "sft" / cli::kManifestName));
  const auto grpo = json::parse(cli::read_text(a / "grpo" / cli::kManifestName));
  const auto eval = json::parse(cli::read_text(a / "eval" / cli::kManifestName));
  // GRPO starts from the recorded selection; eval scores the GRPO final snapshot
  CHECK(grpo["reference"]["sha256"] == sft["selected"]["sha256"]);
  CHECK(m["selected_checkpoint"]["sha256"] == sft["selected"]["sha256"]);
  CHECK(eval["models"]["grpo"]["checkpoint"]["sha256"] == grpo["final_checkpoint"]["sha256"]);
  CHECK(eval["models"]["sft"]["checkpoint"]["sha256"] == sft["selected"]["sha256"]);
  CHECK(m["files"].contains("eval/metrics.tsv"));

  // resume after SFT: later stages rerun and land on the same manifest
  fs::remove_all(a / "grpo");
  fs::remove_all(a / "eval");
  std::ostringstream out;
  std::ostringstream log;
  cli::RunConfig c;
  cli::apply_ini(ini, c);
  c.command = "pipeline";
  c.out = a;
  const auto resumed = cli::run_pipeline(c, {out, log});
  CHECK(resumed.reused == std::vector<std::string>{"data", "sft", "select"});
  CHECK(resumed.manifest_sha256 == cli::sha256_file(b / cli::kManifestName));
  CHECK(resumed.manifest["grpo"]["reference_sha256"] == sft["selected"]["sha256"]);

  // a tampered artifact invalidates its stage
  {
    std::ofstream f(a / "eval" / "metrics.tsv", std::ios::app);
    f << "tampered\n";
  }
  const auto again = cli::run_pipeline(c, {out, log});
  CHECK(again.reused == std::vector<std::string>{"data", "sft", "select", "grpo"});
  CHECK(again.manifest_sha256 == resumed.manifest_sha256);

  // a different config is refused in the same directory
  CHECK(rrg_cmd({"pipeline", "--config", ini.string(), "--sft-epochs", "2", "--out", a.string()})
            .code == cli::kExitUsage);
}

TEST_CASE("a failing stage names itself and keeps earlier artifacts") {
  TempDir tmp("failure");
  const auto ini = tmp.path / "run.ini";
  cli::write_text(ini, kSmallIni);
  const auto run = tmp.path / "run";
  const auto r = rrg_cmd(
      {"pipeline", "--config", ini.string(), "--preset", "paper-shapes", "--out", run.string()});
  CHECK(r.code == cli::kExitDomain);
  CHECK(r.err.find("stage sft failed") != std::string::npos);
  CHECK(fs::exists(run / "data" / cli::kManifestName));
  CHECK(fs::exists(run / "stages" / "data.json"));
  CHECK(!fs::exists(run / "stages" / "sft.json"));
}

TEST_CASE("standalone training commands chain through run directories") {
  TempDir tmp("chain");
  const auto ini = (tmp.path / "run.ini").string();
  cli::write_text(ini, kSmallIni);
  const auto p = [&](const char* name) { return (tmp.path / name).string(); };
  REQUIRE(rrg_cmd({"gen-data", "--config", ini, "--out", p("data")}).code == 0);
  REQUIRE(rrg_cmd({"train-sft", "--config", ini, "--data", p("data"), "--out", p("sft")}).code == 0);
  REQUIRE(rrg_cmd({"train-grpo", "--config", ini, "--data", p("data"), "--sft-run", p("sft"),
                   "--out", p("grpo")})
              .code == 0);
  const auto g = rrg_cmd({"generate", "--config", ini, "--data", p("data"), "--checkpoint",
                          p("grpo") + "/checkpoints/grpo_final.cxl2", "--split", "validation",
                          "--out", p("gen")});
  REQUIRE(g.code == 0);
  std::ifstream lines(tmp.path / "gen" / "generations.jsonl");
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    CHECK(json::parse(line).contains("study_id"));
    ++n;
  }
  CHECK(n == json::parse(cli::read_text(tmp.path / "gen" / cli::kManifestName))["studies"]);

  // a checkpoint from a differently shaped model is a domain error
  CHECK(rrg_cmd({"generate", "--config", ini, "--data", p("data"), "--checkpoint",
                 p("sft") + "/checkpoints/sft_epoch1.cxl2", "--d-model", "32", "--out",
                 p("gen2")})
            .code == cli::kExitDomain);
  CHECK(rrg_cmd({"generate", "--config", ini, "--data", p("data"), "--checkpoint",
                 p("sft") + "/checkpoints/sft_epoch1.cxl2", "--split", "holdout", "--out",
                 p("gen3")})
            .code == cli::kExitUsage);
}

TEST_CASE("stats commands read a ratings file") {
  TempDir tmp("ratings");
  const auto path = tmp.path / "ratings.tsv";
  {
    std::ofstream f(path);
    stats::write_ratings(f, stats::simulate_ratings(60, {"A", "B", "C"},
                                                    {"atelectasis", "cardiomegaly", "no-finding"},
                                                    0.6, 5));
  }
  const auto k = rrg_cmd({"stats", "kappa", "--ratings", path.string()});
  CHECK(k.code == 0);
  CHECK(k.out.find("A-B") != std::string::npos);
  const auto g = rrg_cmd({"stats", "glm", "--ratings", path.string(), "--json"});
  CHECK(g.code == 0);
  CHECK(json::parse(g.out)["anova"]["rows"].size() == 6);
  const auto rec = tmp.path / "record";
  CHECK(rrg_cmd({"stats", "power", "--n", "360", "--p1", "0.55", "--out", rec.string()}).code == 0);
  CHECK(fs::exists(rec / "stats_power.json"));
  CHECK(fs::exists(rec / cli::kManifestName));
  CHECK(rrg_cmd({"stats", "kappa", "--ratings", (tmp.path / "none.tsv").string()}).code ==
        cli::kExitUsage);
}
