#include "rrg/cli/commands.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "rrg/cli/manifest.hpp"
#include "rrg/corpus/dataset.hpp"
#include "rrg/corpus/generate.hpp"
#include "rrg/corpus/sampling.hpp"
#include "rrg/model/decoder.hpp"
#include "rrg/model/network.hpp"
#include "rrg/model/tokenizer.hpp"
#include "rrg/numkit/parameter.hpp"
#include "rrg/rewards/report.hpp"
#include "rrg/stats/binomial.hpp"
#include "rrg/stats/glm.hpp"
#include "rrg/stats/kappa.hpp"
#include "rrg/stats/ratings.hpp"
#include "rrg/train/sft.hpp"
#include "rrg/train/trainer.hpp"

namespace rrg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVocabName = "vocab.tsv";
constexpr std::array<const char*, 3> kSplits{"train", "validation", "test"};

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

json base_record(const RunConfig& c) {
  const std::string ini = to_ini(c);
  json r;
  r["command"] = c.command;
  if (c.seed) r["seed"] = *c.seed;
  r["config_sha256"] = sha256_hex(ini);
  return r;
}

void begin_run(const RunConfig& c) {
  if (c.out.empty()) throw UsageError(c.command + " needs an output directory (--out)");
  require_fresh_dir(c.out);
  fs::create_directories(c.out);
  write_text(c.out / kConfigSnapshotName, to_ini(c));
}

std::string finish_run(const RunConfig& c, const json& record, Io io) {
  const auto hash = write_run_manifest(c.out, record);
  io.out << "run manifest sha256: " << hash << '\n';
  return hash;
}

/// Hash naming an input directory: its run manifest when present.
std::string dir_fingerprint(const fs::path& dir) {
  if (fs::exists(dir / kManifestName)) return sha256_file(dir / kManifestName);
  return sha256_file(dir / "manifest.json");
}

void require_dataset(const fs::path& dir) {
  require_exists(dir, "dataset directory");
  require_exists(dir / "manifest.json", "dataset manifest");
  require_exists(dir / kVocabName, "dataset vocabulary");
}

void require_split(const std::string& split) {
  for (const char* s : kSplits) {
    if (split == s) return;
  }
  throw UsageError("unknown split '" + split + "' (train, validation or test)");
}

struct Workspace {
  model::Vocabulary vocab;
  model::ModelConfig model;
  std::map<std::string, std::vector<train::Example>> examples;
};

Workspace open_workspace(const RunConfig& c, const std::vector<std::string>& splits, Io io) {
  Workspace w;
  w.vocab = model::Vocabulary::load(c.data / kVocabName);
  w.model = c.model.resolve(w.vocab.size());
  const model::PatchEncoder encoder(w.model);
  const model::AssembleOptions ao{c.data_settings.image_limit, require_seed(c)};
  for (const auto& s : splits) {
    const auto studies = corpus::load_split(c.data, s);
    w.examples[s] = train::prepare_examples(studies, w.vocab, encoder, w.model, ao);
    io.log << s << ": " << w.examples[s].size() << " examples\n";
  }
  return w;
}

/// Loads a snapshot and checks it against the shapes of `config`.
numkit::ParameterSet load_model(const fs::path& path, const model::ModelConfig& config) {
  auto params = train::load_checkpoint(path);
  const auto expected = model::init_parameters(config, 0);
  bool ok = params.size() == expected.size();
  for (const auto& p : expected.items()) {
    if (!ok) break;
    ok = params.contains(p.name) && params.get(p.name).value().shape() == p.tensor.value().shape();
  }
  if (!ok) {
    throw std::invalid_argument("checkpoint '" + path.string() +
                                "' does not match the configured model shapes");
  }
  return params;
}

json checkpoint_ref(const fs::path& path) {
  return {{"file", path.filename().string()}, {"sha256", sha256_file(path)}};
}

void write_generations(const fs::path& path, const std::vector<train::Example>& examples,
                       const train::Evaluation& eval) {
  std::ostringstream out;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& r = eval.reports[i];
    json j{{"study_id", r.study_id},
           {"valid", r.text.has_value()},
           {"reference_findings", examples[i].reference.findings},
           {"reference_impression", examples[i].reference.impression}};
    j["findings"] = r.text ? json(r.text->findings) : json(nullptr);
    j["impression"] = r.text ? json(r.text->impression) : json(nullptr);
    out << j.dump() << '\n';
  }
  write_text(path, out.str());
}

std::string rel(const fs::path& p, const fs::path& base) {
  return fs::relative(p, base).generic_string();
}

}  // namespace

void require_fresh_dir(const fs::path& dir) {
  if (fs::exists(dir) && !(fs::is_directory(dir) && fs::is_empty(dir))) {
    throw UsageError("output directory '" + dir.string() + "' exists and is not empty");
  }
}

json gen_data(const RunConfig& c, Io io) {
  const auto seed = require_seed(c);
  begin_run(c);
  const auto& d = c.data_settings;
  corpus::CorpusOptions co;
  co.n_studies = d.studies;
  co.prior_probability = d.prior_probability;
  co.image_size = d.image_size;
  co.repeat_patient_probability = d.repeat_patient_probability;
  co.seed = seed;
  const auto studies = corpus::generate_corpus(co);
  const auto splits = corpus::split_dataset(studies, d.fractions, seed);
  const auto vocab = model::Vocabulary::build(corpus::corpus_texts(splits.train));
  vocab.save(c.out / kVocabName);

  corpus::DatasetManifest manifest;
  manifest.generator_seed = seed;
  manifest.splits = {corpus::summarise_split("train", splits.train, splits.train_filtered),
                     corpus::summarise_split("validation", splits.validation,
                                             splits.validation_filtered),
                     corpus::summarise_split("test", splits.test)};
  corpus::save_split(c.out, "train", splits.train);
  corpus::save_split(c.out, "validation", splits.validation);
  corpus::save_split(c.out, "test", splits.test);
  corpus::save_manifest(c.out, manifest);

  json r = base_record(c);
  r["vocab_size"] = vocab.size();
  io.out << "split\tstudies\tfiltered\n";
  for (const auto& s : manifest.splits) {
    r["splits"][s.name] = {{"studies", s.study_count}, {"filtered", s.filtered_count}};
    io.out << s.name << '\t' << s.study_count << '\t' << s.filtered_count << '\n';
  }
  io.out << "vocabulary: " << vocab.size() << " tokens\n";
  finish_run(c, r, io);
  return r;
}

json train_sft(const RunConfig& c, Io io) {
  const auto seed = require_seed(c);
  require_dataset(c.data);
  c.sft.validate();
  begin_run(c);
  auto w = open_workspace(c, {"train", "validation"}, io);
  auto params = model::init_parameters(w.model, seed);
  auto cfg = c.sft;
  cfg.seed = seed;
  const auto result = train::run_sft(w.examples["train"], w.examples["validation"], params,
                                     w.model, w.vocab, c.reward, cfg, c.out);

  json r = base_record(c);
  r["data_sha256"] = dir_fingerprint(c.data);
  io.out << "checkpoint\tepoch\tstep\tval_accuracy\tval_reward\n";
  for (const auto& ck : result.checkpoints) {
    r["checkpoints"].push_back({{"id", ck.id},
                                {"path", rel(ck.path, c.out)},
                                {"epoch", ck.epoch},
                                {"step", ck.step},
                                {"accuracy", ck.accuracy},
                                {"reward", ck.reward},
                                {"sha256", sha256_file(ck.path)}});
    io.out << ck.id << '\t' << ck.epoch << '\t' << ck.step << '\t' << fixed(ck.accuracy, 4)
           << '\t' << fixed(ck.reward, 4) << '\n';
  }
  const auto& best = result.checkpoints[result.best];
  r["selected"] = {{"id", best.id},
                   {"path", rel(best.path, c.out)},
                   {"sha256", sha256_file(best.path)},
                   {"metric", c.sft.selection_metric}};
  io.out << "selected: " << best.id << " (" << c.sft.selection_metric << ")\n";
  finish_run(c, r, io);
  return r;
}

fs::path selected_sft_checkpoint(const fs::path& sft_run) {
  require_exists(sft_run / kManifestName, "SFT run manifest");
  const auto m = json::parse(read_text(sft_run / kManifestName));
  if (!m.contains("selected")) {
    throw UsageError("'" + sft_run.string() + "' is not a train-sft run directory");
  }
  return sft_run / m["selected"]["path"].get<std::string>();
}

json train_grpo(const RunConfig& c, Io io) {
  const auto seed = require_seed(c);
  require_dataset(c.data);
  fs::path reference_path = c.checkpoint;
  if (reference_path.empty()) {
    if (c.sft_run.empty()) throw UsageError("train-grpo needs --checkpoint or --sft-run");
    reference_path = selected_sft_checkpoint(c.sft_run);
  }
  require_exists(reference_path, "reference checkpoint");
  c.grpo.validate();
  begin_run(c);
  auto w = open_workspace(c, {"train", "validation"}, io);
  const auto reference = load_model(reference_path, w.model);
  auto policy = reference.clone();
  const auto result = train::run_grpo(w.examples["train"], w.examples["validation"], policy,
                                      reference, w.model, w.vocab, c.reward, c.grpo, seed, c.out);

  json r = base_record(c);
  r["data_sha256"] = dir_fingerprint(c.data);
  r["reference"] = checkpoint_ref(reference_path);
  r["steps"] = result.steps;
  r["skipped_groups"] = result.skipped_groups;
  r["final_checkpoint"] = {{"path", rel(result.final_checkpoint, c.out)},
                           {"sha256", sha256_file(result.final_checkpoint)}};
  io.out << "step\tval_reward\tinvalid_fraction\n";
  for (const auto& v : result.validations) {
    r["validations"].push_back(
        {{"step", v.step}, {"reward", v.reward}, {"invalid_fraction", v.invalid_fraction}});
    io.out << v.step << '\t' << fixed(v.reward, 4) << '\t' << fixed(v.invalid_fraction, 4) << '\n';
  }
  r["reward_before"] = result.validations.front().reward;
  r["reward_after"] = result.validations.back().reward;
  finish_run(c, r, io);
  return r;
}

json generate_reports(const RunConfig& c, Io io) {
  require_seed(c);
  require_dataset(c.data);
  require_split(c.split);
  require_exists(c.checkpoint, "checkpoint");
  begin_run(c);
  auto w = open_workspace(c, {c.split}, io);
  const auto params = load_model(c.checkpoint, w.model);
  const auto& ex = w.examples[c.split];
  const auto eval =
      train::evaluate_greedy(ex, params, w.model, w.vocab, c.reward, w.model.max_generated_tokens);
  write_generations(c.out / "generations.jsonl", ex, eval);

  json r = base_record(c);
  r["data_sha256"] = dir_fingerprint(c.data);
  r["checkpoint"] = checkpoint_ref(c.checkpoint);
  r["split"] = c.split;
  r["studies"] = ex.size();
  r["invalid_fraction"] = eval.invalid_fraction;
  r["mean_reward"] = eval.mean_reward;
  io.out << "studies\tinvalid_fraction\tmean_reward\n"
         << ex.size() << '\t' << fixed(eval.invalid_fraction, 4) << '\t'
         << fixed(eval.mean_reward, 4) << '\n';
  finish_run(c, r, io);
  return r;
}

json eval_metrics(const RunConfig& c, Io io) {
  require_seed(c);
  require_dataset(c.data);
  require_split(c.split);
  if (c.models.empty()) throw UsageError("eval-metrics needs at least one --model name=path");
  std::map<std::string, fs::path> models;
  for (const auto& m : c.models) {
    require_exists(m.path, "checkpoint");
    if (!models.emplace(m.name, m.path).second) {
      throw UsageError("model name '" + m.name + "' given twice");
    }
  }
  begin_run(c);
  auto w = open_workspace(c, {c.split}, io);
  const auto& ex = w.examples[c.split];
  if (ex.empty()) throw std::invalid_argument("split '" + c.split + "' has no usable studies");

  auto metrics = c.reward.names();
  metrics.push_back("composite");
  std::vector<std::string> ids;
  for (const auto& e : ex) ids.push_back(e.study_id);

  json r = base_record(c);
  r["data_sha256"] = dir_fingerprint(c.data);
  r["split"] = c.split;
  std::map<std::string, std::vector<std::vector<double>>> scores;
  for (const auto& [name, path] : models) {
    io.log << "evaluating " << name << '\n';
    const auto params = load_model(path, w.model);
    const auto eval =
        train::evaluate_greedy(ex, params, w.model, w.vocab, c.reward, w.model.max_generated_tokens);
    write_generations(c.out / ("generations_" + name + ".jsonl"), ex, eval);
    auto& rows = scores[name];
    for (const auto& s : eval.scores) {
      auto row = s;
      row.push_back(rewards::weighted_reward(s, c.reward));
      rows.push_back(std::move(row));
    }
    r["models"][name] = {{"checkpoint", checkpoint_ref(path)},
                         {"invalid_fraction", eval.invalid_fraction},
                         {"mean_reward", eval.mean_reward}};
  }
  const auto report = rewards::build_metric_report(metrics, ids, scores);
  rewards::write_metric_report(c.out, "metrics", report);

  io.out << "model";
  for (const auto& m : metrics) io.out << '\t' << m;
  io.out << "\tinvalid_fraction\n";
  for (const auto& [name, means] : report.means) {
    io.out << name;
    for (std::size_t k = 0; k < metrics.size(); ++k) {
      r["models"][name]["means"][metrics[k]] = means[k];
      io.out << '\t' << fixed(means[k], 4);
    }
    io.out << '\t' << fixed(r["models"][name]["invalid_fraction"].get<double>(), 4) << '\n';
  }
  for (const auto& [metric, table] : report.significance) {
    r["significance"][metric] = {{"anova_f", table.anova.f}, {"anova_p", table.anova.p}};
    io.out << metric << ": ANOVA F = " << fixed(table.anova.f, 3)
           << ", p = " << fixed(table.anova.p, 4) << '\n';
  }
  finish_run(c, r, io);
  return r;
}

json complexity(const ComplexityRequest& q) {
  if (q.lens.empty()) throw UsageError("complexity needs --lens");
  json r{{"command", "complexity"}, {"baseline", q.baseline}, {"rows", json::array()}};
  for (double len : q.lens) {
    const auto c = model::relative_complexity(len, q.baseline);
    r["rows"].push_back({{"prompt_len", len}, {"ratio", c.ratio}, {"reduction", c.reduction}});
  }
  return r;
}

json stats_binom(const BinomRequest& q) {
  const auto alt = stats::alternative_from_string(q.alternative);
  return {{"command", "stats binom"},
          {"k", q.k},
          {"n", q.n},
          {"p0", q.p0},
          {"alternative", q.alternative},
          {"p_value", stats::exact_binomial_test(q.k, q.n, q.p0, alt)}};
}

json stats_power(const PowerRequest& q) {
  if (q.n.empty()) throw UsageError("stats power needs --n");
  const auto alt = stats::alternative_from_string(q.alternative);
  json r{{"command", "stats power"},
         {"p0", q.p0},
         {"p1", q.p1},
         {"alpha", q.alpha},
         {"alternative", q.alternative},
         {"rows", json::array()}};
  for (auto n : q.n) {
    r["rows"].push_back({{"n", n}, {"power", stats::binomial_power(n, q.p0, q.p1, q.alpha, alt)}});
  }
  return r;
}

namespace {

json kappa_json(const stats::KappaResult& k) {
  return {{"agreement", k.agreement}, {"kappa", k.kappa}, {"se", k.se}, {"z", k.z}, {"p", k.p}};
}

}  // namespace

json stats_kappa(const fs::path& ratings) {
  require_exists(ratings, "ratings file");
  const auto m = stats::preference_matrix(stats::read_ratings(ratings));
  json r{{"command", "stats kappa"}, {"studies", m.studies.size()}, {"raters", m.raters}};
  r["overall"] = kappa_json(stats::fleiss_kappa(m.ratings, 3));
  for (const auto& p : stats::pairwise_kappa(m.ratings, 3)) {
    auto row = kappa_json(p.result);
    row["rater_a"] = m.raters[p.rater_a];
    row["rater_b"] = m.raters[p.rater_b];
    r["pairwise"].push_back(row);
  }
  return r;
}

json stats_glm(const fs::path& ratings, std::size_t interactions) {
  require_exists(ratings, "ratings file");
  const auto d = stats::ratings_design(stats::read_ratings(ratings));
  if (interactions > d.terms.size() - 3) {
    throw UsageError("--interactions must be at most " + std::to_string(d.terms.size() - 3));
  }
  const auto fit = stats::glm_fit_logistic(stats::main_design(d, interactions), d.y);
  json r{{"command", "stats glm"}, {"rows", d.y.size()}, {"interactions", interactions}};
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    r["coefficients"].push_back({{"term", fit.names[i]},
                                 {"estimate", fit.coefficients[i]},
                                 {"se", fit.se[i]},
                                 {"z", fit.z[i]},
                                 {"p", fit.p[i]},
                                 {"odds_ratio", fit.odds_ratios[i]},
                                 {"ci_low", fit.ci_low[i]},
                                 {"ci_high", fit.ci_high[i]}});
  }
  r["deviance"] = fit.deviance;
  const auto table = stats::anova_deviance(d.terms, d.y);
  r["anova"]["null_df"] = table.null_df;
  r["anova"]["null_deviance"] = table.null_deviance;
  for (const auto& row : table.rows) {
    r["anova"]["rows"].push_back({{"term", row.term},
                                  {"df", row.df},
                                  {"deviance", row.delta},
                                  {"residual_df", row.residual_df},
                                  {"residual_deviance", row.residual_deviance},
                                  {"p", row.p}});
  }
  return r;
}

void print_record(const std::string& command, const json& r, std::ostream& out) {
  if (command == "complexity") {
    out << "prompt_len\tbaseline\tratio\treduction\n";
    for (const auto& row : r["rows"]) {
      out << row["prompt_len"].get<double>() << '\t' << r["baseline"].get<double>() << '\t'
          << fixed(row["ratio"], 3) << '\t' << fixed(100.0 * row["reduction"].get<double>(), 1)
          << "%\n";
    }
  } else if (command == "stats binom") {
    out << "k\tn\tp0\talternative\tp_value\n"
        << r["k"].get<std::uint64_t>() << '\t' << r["n"].get<std::uint64_t>() << '\t'
        << r["p0"].get<double>() << '\t' << r["alternative"].get<std::string>() << '\t'
        << fixed(r["p_value"], 3) << '\n';
  } else if (command == "stats power") {
    out << "n\tpower\n";
    for (const auto& row : r["rows"]) {
      out << row["n"].get<std::uint64_t>() << '\t' << fixed(row["power"], 3) << '\n';
    }
  } else if (command == "stats kappa") {
    out << "raters\tagreement\tkappa\tse\tz\tp\n";
    const auto line = [&](const std::string& who, const json& k) {
      out << who << '\t' << fixed(k["agreement"], 3) << '\t' << fixed(k["kappa"], 3) << '\t'
          << fixed(k["se"], 3) << '\t' << fixed(k["z"], 2) << '\t' << fixed(k["p"], 4) << '\n';
    };
    line("all", r["overall"]);
    for (const auto& p : r["pairwise"]) {
      line(p["rater_a"].get<std::string>() + "-" + p["rater_b"].get<std::string>(), p);
    }
  } else if (command == "stats glm") {
    out << "term\testimate\tse\tz\tp\todds_ratio\tci_low\tci_high\n";
    for (const auto& c : r["coefficients"]) {
      out << c["term"].get<std::string>() << '\t' << fixed(c["estimate"], 4) << '\t'
          << fixed(c["se"], 4) << '\t' << fixed(c["z"], 3) << '\t' << fixed(c["p"], 4) << '\t'
          << fixed(c["odds_ratio"], 3) << '\t' << fixed(c["ci_low"], 3) << '\t'
          << fixed(c["ci_high"], 3) << '\n';
    }
    out << "\nterm\tdf\tdeviance\tresid_df\tresid_deviance\tp\n"
        << "NULL\t\t\t" << r["anova"]["null_df"].get<std::size_t>() << '\t'
        << fixed(r["anova"]["null_deviance"], 3) << "\t\n";
    for (const auto& row : r["anova"]["rows"]) {
      out << row["term"].get<std::string>() << '\t' << row["df"].get<std::size_t>() << '\t'
          << fixed(row["deviance"], 3) << '\t' << row["residual_df"].get<std::size_t>() << '\t'
          << fixed(row["residual_deviance"], 3) << '\t' << fixed(row["p"], 4) << '\n';
    }
  } else {
    out << r.dump(2) << '\n';
  }
}

void persist_record(const fs::path& out, const std::string& command, const json& record) {
  if (out.empty()) return;
  require_fresh_dir(out);
  std::string stem = command;
  for (auto& ch : stem) {
    if (ch == ' ') ch = '_';
  }
  write_text(out / (stem + ".json"), record.dump(2) + "\n");
  write_run_manifest(out, {{"command", command}});
}

}  // namespace rrg::cli
