#include "rrg/cli/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <functional>
#include <map>
#include <sstream>

namespace rrg::cli {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

template <class T>
T parse_value(const std::string& key, const std::string& text) {
  T v{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) {
    throw UsageError("config key '" + key + "': cannot parse '" + text + "'");
  }
  return v;
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto size = [](auto get) {
      return [get](RunConfig& c, const std::string& k, const std::string& v) {
        get(c) = parse_value<std::size_t>(k, v);
      };
    };
    auto real = [](auto get) {
      return [get](RunConfig& c, const std::string& k, const std::string& v) {
        get(c) = parse_value<double>(k, v);
      };
    };
    auto opt_size = [](auto get) {
      return [get](RunConfig& c, const std::string& k, const std::string& v) {
        get(c) = parse_value<std::size_t>(k, v);
      };
    };
    t["run.seed"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.seed = parse_value<std::uint64_t>(k, v);
    };
    t["run.split"] = [](RunConfig& c, const std::string&, const std::string& v) { c.split = v; };

    t["data.studies"] = size([](RunConfig& c) -> auto& { return c.data_settings.studies; });
    t["data.prior_probability"] =
        real([](RunConfig& c) -> auto& { return c.data_settings.prior_probability; });
    t["data.image_size"] = size([](RunConfig& c) -> auto& { return c.data_settings.image_size; });
    t["data.repeat_patient_probability"] =
        real([](RunConfig& c) -> auto& { return c.data_settings.repeat_patient_probability; });
    t["data.train_fraction"] =
        real([](RunConfig& c) -> auto& { return c.data_settings.fractions.train; });
    t["data.validation_fraction"] =
        real([](RunConfig& c) -> auto& { return c.data_settings.fractions.validation; });
    t["data.test_fraction"] =
        real([](RunConfig& c) -> auto& { return c.data_settings.fractions.test; });
    t["data.image_limit"] = size([](RunConfig& c) -> auto& { return c.data_settings.image_limit; });

    t["model.preset"] = [](RunConfig& c, const std::string&, const std::string& v) {
      c.model.preset = v;
    };
    t["model.d_model"] = opt_size([](RunConfig& c) -> auto& { return c.model.d_model; });
    t["model.decoder_layers"] =
        opt_size([](RunConfig& c) -> auto& { return c.model.decoder_layers; });
    t["model.heads"] = opt_size([](RunConfig& c) -> auto& { return c.model.heads; });
    t["model.ff_dim"] = opt_size([](RunConfig& c) -> auto& { return c.model.ff_dim; });
    t["model.query_count"] = opt_size([](RunConfig& c) -> auto& { return c.model.query_count; });
    t["model.adapter_layers"] =
        opt_size([](RunConfig& c) -> auto& { return c.model.adapter_layers; });
    t["model.adapter_heads"] =
        opt_size([](RunConfig& c) -> auto& { return c.model.adapter_heads; });
    t["model.max_generated_tokens"] =
        opt_size([](RunConfig& c) -> auto& { return c.model.max_generated_tokens; });

    t["sft.peak_lr"] = real([](RunConfig& c) -> auto& { return c.sft.peak_lr; });
    t["sft.warmup"] = size([](RunConfig& c) -> auto& { return c.sft.warmup; });
    t["sft.epochs"] = size([](RunConfig& c) -> auto& { return c.sft.epochs; });
    t["sft.cycles"] = size([](RunConfig& c) -> auto& { return c.sft.cycles; });
    t["sft.batch_size"] = size([](RunConfig& c) -> auto& { return c.sft.batch_size; });
    t["sft.selection_metric"] = [](RunConfig& c, const std::string&, const std::string& v) {
      c.sft.selection_metric = v;
    };
    t["sft.beta1"] = real([](RunConfig& c) -> auto& { return c.sft.adamw.beta1; });
    t["sft.beta2"] = real([](RunConfig& c) -> auto& { return c.sft.adamw.beta2; });
    t["sft.eps"] = real([](RunConfig& c) -> auto& { return c.sft.adamw.eps; });
    t["sft.weight_decay"] = real([](RunConfig& c) -> auto& { return c.sft.adamw.weight_decay; });

    t["grpo.group_size"] = size([](RunConfig& c) -> auto& { return c.grpo.group_size; });
    t["grpo.beta"] = real([](RunConfig& c) -> auto& { return c.grpo.beta; });
    t["grpo.clip_eps"] = real([](RunConfig& c) -> auto& { return c.grpo.clip_eps; });
    t["grpo.inner_steps"] = size([](RunConfig& c) -> auto& { return c.grpo.inner_steps; });
    t["grpo.temperature"] = real([](RunConfig& c) -> auto& { return c.grpo.temperature; });
    t["grpo.max_completion_tokens"] =
        size([](RunConfig& c) -> auto& { return c.grpo.max_completion_tokens; });
    t["grpo.learning_rate"] = real([](RunConfig& c) -> auto& { return c.grpo.learning_rate; });
    t["grpo.warmup"] = size([](RunConfig& c) -> auto& { return c.grpo.warmup; });
    t["grpo.epochs"] = size([](RunConfig& c) -> auto& { return c.grpo.epochs; });
    t["grpo.prompts_per_step"] =
        size([](RunConfig& c) -> auto& { return c.grpo.prompts_per_step; });
    t["grpo.prompts_per_epoch"] =
        size([](RunConfig& c) -> auto& { return c.grpo.prompts_per_epoch; });
    t["grpo.validations_per_epoch"] =
        size([](RunConfig& c) -> auto& { return c.grpo.validations_per_epoch; });
    return t;
  }();
  return table;
}

void emit(std::ostringstream& out, const std::string& key, const std::string& value) {
  out << key << " = " << value << '\n';
}

}  // namespace

model::ModelConfig ModelSettings::resolve(std::size_t vocab_size) const {
  model::ModelConfig c;
  if (preset == "toy") {
    c = model::toy_config(vocab_size);
  } else if (preset == "paper-shapes") {
    c = model::paper_shape_config(vocab_size);
  } else {
    throw std::invalid_argument("unknown model preset '" + preset + "'");
  }
  if (d_model) c.d_model = *d_model;
  if (decoder_layers) c.decoder_layers = *decoder_layers;
  if (heads) c.heads = *heads;
  if (ff_dim) c.ff_dim = *ff_dim;
  if (query_count) c.query_count = *query_count;
  if (adapter_layers) c.adapter_layers = *adapter_layers;
  if (adapter_heads) c.adapter_heads = *adapter_heads;
  if (max_generated_tokens) c.max_generated_tokens = *max_generated_tokens;
  c.validate();
  return c;
}

void apply_ini(const fs::path& path, RunConfig& config) {
  require_exists(path, "config file");
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw UsageError(e.what());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw UsageError("config key '" + section + "' lies outside any section");
    }
    if (section == "reward") {
      rewards::RewardSpec spec;
      for (const auto& [name, value] : body) {
        spec.components.push_back({name, parse_value<double>("reward." + name, value.data())});
      }
      config.reward = spec;
      continue;
    }
    for (const auto& [name, value] : body) {
      const std::string key = section + "." + name;
      const auto it = setters().find(key);
      if (it == setters().end()) throw UsageError("unknown config key '" + key + "'");
      it->second(config, key, value.data());
    }
  }
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string to_ini(const RunConfig& c) {
  std::ostringstream out;
  const auto z = [](std::size_t v) { return std::to_string(v); };
  out << "[run]\n";
  if (c.seed) emit(out, "seed", std::to_string(*c.seed));
  emit(out, "split", c.split);

  const auto& d = c.data_settings;
  out << "\n[data]\n";
  emit(out, "studies", z(d.studies));
  emit(out, "prior_probability", format_double(d.prior_probability));
  emit(out, "image_size", z(d.image_size));
  emit(out, "repeat_patient_probability", format_double(d.repeat_patient_probability));
  emit(out, "train_fraction", format_double(d.fractions.train));
  emit(out, "validation_fraction", format_double(d.fractions.validation));
  emit(out, "test_fraction", format_double(d.fractions.test));
  emit(out, "image_limit", z(d.image_limit));

  const auto& m = c.model;
  out << "\n[model]\n";
  emit(out, "preset", m.preset);
  const auto opt = [&](const char* key, const std::optional<std::size_t>& v) {
    if (v) emit(out, key, z(*v));
  };
  opt("d_model", m.d_model);
  opt("decoder_layers", m.decoder_layers);
  opt("heads", m.heads);
  opt("ff_dim", m.ff_dim);
  opt("query_count", m.query_count);
  opt("adapter_layers", m.adapter_layers);
  opt("adapter_heads", m.adapter_heads);
  opt("max_generated_tokens", m.max_generated_tokens);

  const auto& s = c.sft;
  out << "\n[sft]\n";
  emit(out, "peak_lr", format_double(s.peak_lr));
  emit(out, "warmup", z(s.warmup));
  emit(out, "epochs", z(s.epochs));
  emit(out, "cycles", z(s.cycles));
  emit(out, "batch_size", z(s.batch_size));
  emit(out, "selection_metric", s.selection_metric);
  emit(out, "beta1", format_double(s.adamw.beta1));
  emit(out, "beta2", format_double(s.adamw.beta2));
  emit(out, "eps", format_double(s.adamw.eps));
  emit(out, "weight_decay", format_double(s.adamw.weight_decay));

  const auto& g = c.grpo;
  out << "\n[grpo]\n";
  emit(out, "group_size", z(g.group_size));
  emit(out, "beta", format_double(g.beta));
  emit(out, "clip_eps", format_double(g.clip_eps));
  emit(out, "inner_steps", z(g.inner_steps));
  emit(out, "temperature", format_double(g.temperature));
  emit(out, "max_completion_tokens", z(g.max_completion_tokens));
  emit(out, "learning_rate", format_double(g.learning_rate));
  emit(out, "warmup", z(g.warmup));
  emit(out, "epochs", z(g.epochs));
  emit(out, "prompts_per_step", z(g.prompts_per_step));
  emit(out, "prompts_per_epoch", z(g.prompts_per_epoch));
  emit(out, "validations_per_epoch", z(g.validations_per_epoch));

  out << "\n[reward]\n";
  for (const auto& comp : c.reward.components) emit(out, comp.name, format_double(comp.weight));
  return out.str();
}

void validate_settings(const RunConfig& config) {
  try {
    config.model.resolve(64);
    config.sft.validate();
    config.grpo.validate();
    config.reward.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("invalid settings: ") + e.what());
  }
}

std::uint64_t require_seed(const RunConfig& config) {
  if (!config.seed) throw UsageError(config.command + " needs a seed (--seed or [run] seed)");
  return *config.seed;
}

void require_exists(const fs::path& path, const std::string& what) {
  if (path.empty()) throw UsageError(what + " not given");
  if (!fs::exists(path)) throw UsageError(what + " '" + path.string() + "' does not exist");
}

}  // namespace rrg::cli
