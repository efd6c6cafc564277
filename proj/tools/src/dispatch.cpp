#include "rrg/cli/dispatch.hpp"

#include <functional>
#include <memory>
#include <ostream>

#include "CLI11.hpp"
#include "rrg/cli/commands.hpp"
#include "rrg/cli/config.hpp"
#include "rrg/cli/pipeline.hpp"

namespace rrg::cli {

namespace fs = std::filesystem;

namespace {

/// Flags that override config-file values only when given.
class Overrides {
 public:
  template <class T, class Fn>
  CLI::Option* add(CLI::App* app, const std::string& name, const std::string& help, Fn set) {
    auto value = std::make_shared<T>();
    auto* opt = app->add_option(name, *value, help);
    appliers_.push_back([opt, value, set](RunConfig& c) {
      if (opt->count() > 0) set(c, *value);
    });
    return opt;
  }

  void apply(RunConfig& c) const {
    for (const auto& a : appliers_) a(c);
  }

 private:
  std::vector<std::function<void(RunConfig&)>> appliers_;
};

std::pair<std::string, std::string> split_assignment(const std::string& text, const char* flag) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == text.size()) {
    throw UsageError(std::string(flag) + " expects name=value, got '" + text + "'");
  }
  return {text.substr(0, eq), text.substr(eq + 1)};
}

struct Cli {
  CLI::App app{"Report generation training and analysis toolkit", "rrg"};
  Overrides flags;
  std::string config_path;
  std::function<int(std::ostream&, std::ostream&)> action;

  void common(CLI::App* sub) {
    sub->add_option("--config", config_path, "INI config file; flags override its values");
    flags.add<std::uint64_t>(sub, "--seed", "Seed for every stochastic step",
                             [](RunConfig& c, std::uint64_t v) { c.seed = v; });
    flags.add<std::string>(sub, "--out", "Run directory (must be empty or absent)",
                           [](RunConfig& c, const std::string& v) { c.out = v; });
  }

  void data_flags(CLI::App* sub) {
    flags.add<std::size_t>(sub, "--studies", "Corpus size",
                           [](RunConfig& c, std::size_t v) { c.data_settings.studies = v; });
    flags.add<double>(sub, "--prior-probability", "Chance a study has a prior",
                      [](RunConfig& c, double v) { c.data_settings.prior_probability = v; });
    flags.add<std::size_t>(sub, "--image-size", "Image side in pixels",
                           [](RunConfig& c, std::size_t v) { c.data_settings.image_size = v; });
    flags.add<double>(sub, "--repeat-patient-probability", "Chance a study reuses a patient",
                      [](RunConfig& c, double v) {
                        c.data_settings.repeat_patient_probability = v;
                      });
    flags.add<double>(sub, "--train-fraction", "Train share of patients",
                      [](RunConfig& c, double v) { c.data_settings.fractions.train = v; });
    flags.add<double>(sub, "--validation-fraction", "Validation share of patients",
                      [](RunConfig& c, double v) { c.data_settings.fractions.validation = v; });
    flags.add<double>(sub, "--test-fraction", "Test share of patients",
                      [](RunConfig& c, double v) { c.data_settings.fractions.test = v; });
  }

  void data_input(CLI::App* sub) {
    flags.add<std::string>(sub, "--data", "Dataset directory written by gen-data",
                           [](RunConfig& c, const std::string& v) { c.data = v; });
  }

  void split_flag(CLI::App* sub) {
    flags.add<std::string>(sub, "--split", "train, validation or test",
                           [](RunConfig& c, const std::string& v) { c.split = v; });
  }

  void model_flags(CLI::App* sub) {
    flags.add<std::size_t>(sub, "--image-limit", "Images kept per timepoint",
                           [](RunConfig& c, std::size_t v) { c.data_settings.image_limit = v; });
    flags.add<std::string>(sub, "--preset", "Model preset: toy or paper-shapes",
                           [](RunConfig& c, const std::string& v) { c.model.preset = v; });
    flags.add<std::size_t>(sub, "--d-model", "Decoder width",
                           [](RunConfig& c, std::size_t v) { c.model.d_model = v; });
    flags.add<std::size_t>(sub, "--decoder-layers", "Decoder depth",
                           [](RunConfig& c, std::size_t v) { c.model.decoder_layers = v; });
    flags.add<std::size_t>(sub, "--heads", "Decoder attention heads",
                           [](RunConfig& c, std::size_t v) { c.model.heads = v; });
    flags.add<std::size_t>(sub, "--ff-dim", "Decoder feed-forward width",
                           [](RunConfig& c, std::size_t v) { c.model.ff_dim = v; });
    flags.add<std::size_t>(sub, "--query-count", "Adapter latent queries",
                           [](RunConfig& c, std::size_t v) { c.model.query_count = v; });
    flags.add<std::size_t>(sub, "--adapter-layers", "Adapter depth",
                           [](RunConfig& c, std::size_t v) { c.model.adapter_layers = v; });
    flags.add<std::size_t>(sub, "--adapter-heads", "Adapter attention heads",
                           [](RunConfig& c, std::size_t v) { c.model.adapter_heads = v; });
    flags.add<std::size_t>(sub, "--max-tokens", "Greedy decoding length limit",
                           [](RunConfig& c, std::size_t v) { c.model.max_generated_tokens = v; });
    flags.add<std::vector<std::string>>(
        sub, "--reward", "Reward component name=weight; replaces the configured set",
        [](RunConfig& c, const std::vector<std::string>& v) {
          rewards::RewardSpec spec;
          for (const auto& item : v) {
            const auto [name, weight] = split_assignment(item, "--reward");
            try {
              spec.components.push_back({name, std::stod(weight)});
            } catch (const std::logic_error&) {
              throw UsageError("--reward: bad weight '" + weight + "'");
            }
          }
          c.reward = spec;
        });
  }

  void sft_flags(CLI::App* sub) {
    flags.add<double>(sub, "--sft-lr", "SFT peak learning rate",
                      [](RunConfig& c, double v) { c.sft.peak_lr = v; });
    flags.add<std::size_t>(sub, "--sft-warmup", "SFT warm-up steps",
                           [](RunConfig& c, std::size_t v) { c.sft.warmup = v; });
    flags.add<std::size_t>(sub, "--sft-epochs", "SFT epochs",
                           [](RunConfig& c, std::size_t v) { c.sft.epochs = v; });
    flags.add<std::size_t>(sub, "--sft-cycles", "Cosine cycles with hard restarts",
                           [](RunConfig& c, std::size_t v) { c.sft.cycles = v; });
    flags.add<std::size_t>(sub, "--batch-size", "SFT batch size",
                           [](RunConfig& c, std::size_t v) { c.sft.batch_size = v; });
    flags.add<std::string>(sub, "--selection-metric", "composite or accuracy",
                           [](RunConfig& c, const std::string& v) { c.sft.selection_metric = v; });
    flags.add<double>(sub, "--weight-decay", "AdamW decoupled weight decay",
                      [](RunConfig& c, double v) { c.sft.adamw.weight_decay = v; });
  }

  void grpo_flags(CLI::App* sub) {
    flags.add<double>(sub, "--grpo-lr", "GRPO learning rate",
                      [](RunConfig& c, double v) { c.grpo.learning_rate = v; });
    flags.add<std::size_t>(sub, "--grpo-warmup", "GRPO warm-up steps",
                           [](RunConfig& c, std::size_t v) { c.grpo.warmup = v; });
    flags.add<std::size_t>(sub, "--grpo-epochs", "GRPO epochs",
                           [](RunConfig& c, std::size_t v) { c.grpo.epochs = v; });
    flags.add<std::size_t>(sub, "--group-size", "Completions per prompt",
                           [](RunConfig& c, std::size_t v) { c.grpo.group_size = v; });
    flags.add<double>(sub, "--kl-beta", "KL penalty coefficient",
                      [](RunConfig& c, double v) { c.grpo.beta = v; });
    flags.add<double>(sub, "--clip-eps", "Ratio clipping range",
                      [](RunConfig& c, double v) { c.grpo.clip_eps = v; });
    flags.add<std::size_t>(sub, "--inner-steps", "Updates per sampled batch",
                           [](RunConfig& c, std::size_t v) { c.grpo.inner_steps = v; });
    flags.add<double>(sub, "--temperature", "Sampling temperature",
                      [](RunConfig& c, double v) { c.grpo.temperature = v; });
    flags.add<std::size_t>(sub, "--max-completion-tokens", "Sampled completion length limit",
                           [](RunConfig& c, std::size_t v) { c.grpo.max_completion_tokens = v; });
    flags.add<std::size_t>(sub, "--prompts-per-step", "Prompts per outer step",
                           [](RunConfig& c, std::size_t v) { c.grpo.prompts_per_step = v; });
    flags.add<std::size_t>(sub, "--prompts-per-epoch", "Prompts per epoch (0: all)",
                           [](RunConfig& c, std::size_t v) { c.grpo.prompts_per_epoch = v; });
    flags.add<std::size_t>(sub, "--validations-per-epoch", "Validation points per epoch",
                           [](RunConfig& c, std::size_t v) { c.grpo.validations_per_epoch = v; });
  }

  RunConfig resolve(const std::string& command) const {
    RunConfig c;
    if (!config_path.empty()) apply_ini(config_path, c);
    flags.apply(c);
    c.command = command;
    return c;
  }

  /// Adds a run-directory command.
  CLI::App* run_command(const std::string& name, const std::string& help,
                        std::function<void(const RunConfig&, Io)> body) {
    auto* sub = app.add_subcommand(name, help);
    common(sub);
    sub->callback([this, name, body] {
      action = [this, name, body](std::ostream& out, std::ostream& err) {
        const auto c = resolve(name);
        validate_settings(c);
        body(c, Io{out, err});
        return kExitOk;
      };
    });
    return sub;
  }

  /// Adds a record-printing command with --out and --json.
  template <class Make>
  void record_command(CLI::App* sub, const std::string& name, Make make) {
    auto out_dir = std::make_shared<std::string>();
    auto as_json = std::make_shared<bool>(false);
    sub->add_option("--out", *out_dir, "Also write the record under this directory");
    sub->add_flag("--json", *as_json, "Print the machine-readable record instead of a table");
    sub->callback([this, name, make, out_dir, as_json] {
      action = [name, make, out_dir, as_json](std::ostream& out, std::ostream&) {
        if (!out_dir->empty()) require_fresh_dir(*out_dir);
        const nlohmann::json record = make();
        if (*as_json) {
          out << record.dump(2) << '\n';
        } else {
          print_record(name, record, out);
        }
        persist_record(*out_dir, name, record);
        return kExitOk;
      };
    });
  }

  Cli() {
    app.require_subcommand(1);
    app.fallthrough(false);

    auto* gen = run_command("gen-data", "Generate a seeded synthetic corpus and its splits",
                            [](const RunConfig& c, Io io) { gen_data(c, io); });
    data_flags(gen);

    auto* sft = run_command("train-sft", "Supervised fine-tuning with checkpoint selection",
                            [](const RunConfig& c, Io io) { train_sft(c, io); });
    data_input(sft);
    model_flags(sft);
    sft_flags(sft);

    auto* grpo = run_command("train-grpo", "GRPO from a reference checkpoint",
                             [](const RunConfig& c, Io io) { train_grpo(c, io); });
    data_input(grpo);
    model_flags(grpo);
    grpo_flags(grpo);
    flags.add<std::string>(grpo, "--checkpoint", "Reference checkpoint",
                           [](RunConfig& c, const std::string& v) { c.checkpoint = v; });
    flags.add<std::string>(grpo, "--sft-run", "train-sft run directory; uses its selected checkpoint",
                           [](RunConfig& c, const std::string& v) { c.sft_run = v; });

    auto* gen_reports = run_command("generate", "Greedy reports for one split",
                                    [](const RunConfig& c, Io io) { generate_reports(c, io); });
    data_input(gen_reports);
    split_flag(gen_reports);
    model_flags(gen_reports);
    flags.add<std::string>(gen_reports, "--checkpoint", "Model checkpoint",
                           [](RunConfig& c, const std::string& v) { c.checkpoint = v; });

    auto* eval = run_command("eval-metrics", "Score checkpoints and test their differences",
                             [](const RunConfig& c, Io io) { eval_metrics(c, io); });
    data_input(eval);
    split_flag(eval);
    model_flags(eval);
    flags.add<std::vector<std::string>>(
        eval, "--model", "Checkpoint as name=path (repeatable)",
        [](RunConfig& c, const std::vector<std::string>& v) {
          c.models.clear();
          for (const auto& item : v) {
            const auto [name, path] = split_assignment(item, "--model");
            c.models.push_back({name, path});
          }
        });

    auto* pipe = run_command("pipeline", "gen-data, train-sft, select, train-grpo, eval-metrics",
                             [](const RunConfig& c, Io io) { run_pipeline(c, io); });
    data_flags(pipe);
    split_flag(pipe);
    model_flags(pipe);
    sft_flags(pipe);
    grpo_flags(pipe);

    auto* cx = app.add_subcommand("complexity", "Self-attention cost relative to a baseline length");
    auto creq = std::make_shared<ComplexityRequest>();
    cx->add_option("--lens", creq->lens, "Prompt lengths")->delimiter(',')->required();
    cx->add_option("--baseline", creq->baseline, "Baseline prompt length")->required();
    record_command(cx, "complexity", [creq] { return complexity(*creq); });

    auto* st = app.add_subcommand("stats", "Statistical tests");
    st->require_subcommand(1);

    auto* binom = st->add_subcommand("binom", "Exact binomial test");
    auto breq = std::make_shared<BinomRequest>();
    binom->add_option("--k", breq->k, "Successes")->required();
    binom->add_option("--n", breq->n, "Trials")->required();
    binom->add_option("--p0", breq->p0, "Null proportion")->capture_default_str();
    binom->add_option("--alternative", breq->alternative, "two-sided, greater or less")
        ->capture_default_str();
    record_command(binom, "stats binom", [breq] { return stats_binom(*breq); });

    auto* power = st->add_subcommand("power", "Power of the exact binomial test");
    auto preq = std::make_shared<PowerRequest>();
    power->add_option("--n", preq->n, "Sample sizes")->delimiter(',')->required();
    power->add_option("--p0", preq->p0, "Null proportion")->capture_default_str();
    power->add_option("--p1", preq->p1, "True proportion")->required();
    power->add_option("--alpha", preq->alpha, "Test level")->capture_default_str();
    power->add_option("--alternative", preq->alternative, "two-sided, greater or less")
        ->capture_default_str();
    record_command(power, "stats power", [preq] { return stats_power(*preq); });

    auto* kappa = st->add_subcommand("kappa", "Fleiss' kappa over raters and rater pairs");
    auto kpath = std::make_shared<std::string>();
    kappa->add_option("--ratings", *kpath, "Ratings TSV")->required();
    record_command(kappa, "stats kappa", [kpath] { return stats_kappa(*kpath); });

    auto* glm = st->add_subcommand("glm", "Logistic model of acceptability with deviance table");
    auto gpath = std::make_shared<std::string>();
    auto inter = std::make_shared<std::size_t>(0);
    glm->add_option("--ratings", *gpath, "Ratings TSV")->required();
    glm->add_option("--interactions", *inter, "Leading interaction terms in the fitted model")
        ->capture_default_str();
    record_command(glm, "stats glm", [gpath, inter] { return stats_glm(*gpath, *inter); });
  }
};

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Cli cli;
  if (argc > 1 && argv[1][0] != '-') {
    bool known = false;
    for (const auto* sub : cli.app.get_subcommands({})) known = known || sub->get_name() == argv[1];
    if (!known) {
      err << "unknown command '" << argv[1] << "'\n" << cli.app.help();
      return kExitUsage;
    }
  }
  try {
    cli.app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return cli.app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return cli.app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    cli.app.exit(e, out, err);
    return kExitUsage;
  }
  try {
    return cli.action(out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitDomain;
  }
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"rrg"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace rrg::cli
