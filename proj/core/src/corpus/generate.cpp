#include "rrg/corpus/generate.hpp"

#include <algorithm>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>

#include "rrg/corpus/image.hpp"

namespace rrg::corpus {

using model::Section;
using model::StudyRecord;
using model::View;

namespace {

constexpr std::int64_t kDay = 86'400;

std::string numbered(char prefix, std::size_t n) {
  std::string digits = std::to_string(n);
  return std::string(1, prefix) + std::string(digits.size() < 5 ? 5 - digits.size() : 0, '0') +
         digits;
}

double uniform(std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

std::size_t below(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

std::vector<Finding> abnormal_findings() {
  std::vector<Finding> out;
  for (Finding f : kCatalogue) {
    if (f != Finding::no_finding) out.push_back(f);
  }
  return out;
}

Severity random_severity(std::mt19937_64& rng) {
  return uniform(rng) < 0.5 ? Severity::mild : Severity::moderate;
}

void sort_catalogue(std::vector<PlantedFinding>& v) {
  std::sort(v.begin(), v.end(), [](const PlantedFinding& a, const PlantedFinding& b) {
    return static_cast<int>(a.finding) < static_cast<int>(b.finding);
  });
}

std::vector<PlantedFinding> sample_findings(std::mt19937_64& rng) {
  if (uniform(rng) < 0.2) return {};
  const double u = uniform(rng);
  const std::size_t k = u < 0.5 ? 1 : (u < 0.85 ? 2 : 3);
  std::vector<Finding> pool = abnormal_findings();
  std::shuffle(pool.begin(), pool.end(), rng);
  std::vector<PlantedFinding> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back({pool[i], random_severity(rng), Interval::none});
  sort_catalogue(out);
  return out;
}

/// Prior findings consistent with the current ones; fills in intervals and
/// resolutions of `current`.
std::vector<PlantedFinding> sample_prior(ReportPlan& current, std::mt19937_64& rng) {
  std::vector<PlantedFinding> prior;
  for (auto& p : current.present) {
    if (uniform(rng) < 0.55) {
      const Severity before = random_severity(rng);
      prior.push_back({p.finding, before, Interval::none});
      if (before == p.severity) {
        p.interval = Interval::unchanged;
      } else {
        p.interval = p.severity == Severity::moderate ? Interval::worsened : Interval::improved;
      }
    } else {
      p.interval = Interval::new_finding;
    }
  }
  for (Finding f : abnormal_findings()) {
    const bool now = std::any_of(current.present.begin(), current.present.end(),
                                 [f](const PlantedFinding& p) { return p.finding == f; });
    if (!now && uniform(rng) < 0.1) {
      prior.push_back({f, random_severity(rng), Interval::none});
      current.resolved.push_back(f);
    }
  }
  sort_catalogue(prior);
  return prior;
}

std::vector<View> sample_views(std::mt19937_64& rng) {
  switch (below(rng, 3)) {
    case 0: return {View::frontal};
    case 1: return {View::frontal, View::lateral};
    default: return {View::frontal, View::lateral, View::frontal};
  }
}

std::string technique_text(const std::vector<View>& views) {
  if (views.size() == 1) return "single frontal view .";
  if (views.size() == 2) return "frontal and lateral views .";
  return "two frontal views and one lateral view .";
}

void add_images(StudyRecord& s, const std::vector<PlantedFinding>& findings,
                const std::vector<View>& views, std::size_t size, std::mt19937_64& rng) {
  for (std::size_t i = 0; i < views.size(); ++i) {
    model::StudyImage img;
    img.view = views[i];
    img.pixels = normalise_image(render_image(findings, views[i], size, rng));
    img.path = "images/" + s.study_id + "_" + std::to_string(i) + ".pgm";
    s.images.push_back(std::move(img));
  }
}

void write_report(StudyRecord& s, const ReportPlan& plan) {
  s.sections.get(Section::findings) = render_findings(plan);
  s.sections.get(Section::impression) = render_impression(plan);
  s.findings = plan.labels();
}

const char* const kIndications[] = {"cough .", "shortness of breath .", "chest pain .",
                                    "fever .", "follow up ."};
const char* const kHistories[] = {"history of smoking .", "history of heart failure .",
                                  "history of asthma .", "history of hypertension ."};

}  // namespace

std::vector<StudyRecord> generate_corpus(const CorpusOptions& options) {
  if (options.n_studies < 1) throw std::invalid_argument("generate_corpus: n_studies must be >= 1");
  if (!(options.prior_probability >= 0.0 && options.prior_probability <= 1.0)) {
    throw std::invalid_argument("generate_corpus: prior_probability must lie in [0, 1]");
  }
  std::mt19937_64 rng(options.seed);
  std::vector<StudyRecord> out;
  out.reserve(options.n_studies);
  std::size_t patients = 0;
  bool previous_reused = false;
  for (std::size_t i = 0; i < options.n_studies; ++i) {
    StudyRecord s;
    s.study_id = numbered('s', i);
    const bool reuse = i > 0 && !previous_reused && uniform(rng) < options.repeat_patient_probability;
    if (!reuse) ++patients;
    previous_reused = reuse;
    s.patient_id = numbered('p', patients - 1);
    s.timestamp = 1'600'000'000 + static_cast<std::int64_t>(i) * kDay +
                  static_cast<std::int64_t>(below(rng, 86'400));

    ReportPlan plan;
    plan.present = sample_findings(rng);
    const bool has_prior = uniform(rng) < options.prior_probability;
    std::vector<PlantedFinding> prior_findings;
    if (has_prior) prior_findings = sample_prior(plan, rng);

    const auto views = sample_views(rng);
    s.sections.get(Section::indication) = kIndications[below(rng, std::size(kIndications))];
    if (uniform(rng) < 0.5) s.sections.get(Section::history) = kHistories[below(rng, std::size(kHistories))];
    s.sections.get(Section::comparison) = has_prior ? "compared with the prior study ." : "none .";
    s.sections.get(Section::technique) = technique_text(views);
    write_report(s, plan);
    add_images(s, plan.present, views, options.image_size, rng);

    if (has_prior) {
      auto prior = std::make_shared<StudyRecord>();
      prior->study_id = s.study_id + "-prior";
      prior->patient_id = s.patient_id;
      prior->timestamp = s.timestamp - static_cast<std::int64_t>(1 + below(rng, 365)) * kDay -
                         static_cast<std::int64_t>(below(rng, 86'400));
      const auto prior_views = sample_views(rng);
      prior->sections.get(Section::indication) = kIndications[below(rng, std::size(kIndications))];
      prior->sections.get(Section::comparison) = "none .";
      prior->sections.get(Section::technique) = technique_text(prior_views);
      ReportPlan prior_plan;
      prior_plan.present = prior_findings;
      write_report(*prior, prior_plan);
      add_images(*prior, prior_findings, prior_views, options.image_size, rng);
      s.prior = std::move(prior);
    }
    out.push_back(std::move(s));
  }
  return out;
}

ReportPlan recover_plan(const StudyRecord& study) {
  const auto& findings = study.sections.get(Section::findings);
  if (!findings) throw std::invalid_argument("recover_plan: study has no findings section");
  return parse_findings(*findings);
}

std::vector<std::string> corpus_texts(const std::vector<model::StudyRecord>& studies) {
  std::vector<std::string> out;
  auto add = [&out](const model::StudyRecord& s) {
    for (const auto& t : s.sections.text) {
      if (t) out.push_back(*t);
    }
  };
  for (const auto& s : studies) {
    add(s);
    if (s.prior) add(*s.prior);
  }
  return out;
}

}  // namespace rrg::corpus
