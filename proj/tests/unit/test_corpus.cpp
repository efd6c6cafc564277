#include <algorithm>
#include <filesystem>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "rrg/corpus/catalogue.hpp"
#include "rrg/corpus/dataset.hpp"
#include "rrg/corpus/generate.hpp"
#include "rrg/corpus/image.hpp"
#include "rrg/corpus/sampling.hpp"

using namespace rrg;
using namespace rrg::corpus;
using model::GrayImage;
using model::StudyRecord;

namespace {

GrayImage grid(std::size_t h, std::size_t w, const std::vector<int>& values) {
  GrayImage img(h, w);
  for (std::size_t i = 0; i < values.size(); ++i) img.pixels[i] = values[i];
  return img;
}

std::vector<int> as_ints(const GrayImage& img) {
  return {img.pixels.begin(), img.pixels.end()};
}

StudyRecord labelled(const std::string& study, const std::string& patient,
                     std::vector<std::string> findings) {
  StudyRecord s;
  s.study_id = study;
  s.patient_id = patient;
  s.findings = std::move(findings);
  return s;
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("rrg_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("normalise_image rejects zero dynamic range") {
  try {
    normalise_image(GrayImage(4, 4, 17.0));
    FAIL("expected an exception");
  } catch (const ZeroDynamicRange& e) {
    CHECK(std::string(e.what()).find("zero dynamic range") != std::string::npos);
  }
}

TEST_CASE("normalise_image oracle cases") {
  SUBCASE("two levels stay at 0 and 255") {
    std::vector<int> v;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 16; ++c) v.push_back(c < 8 ? 0 : 255);
    CHECK(as_ints(normalise_image(grid(4, 16, v))) == v);
  }
  SUBCASE("uniform ramp is a fixed point") {
    std::vector<int> v(256);
    for (int i = 0; i < 256; ++i) v[static_cast<std::size_t>(i)] = i;
    CHECK(as_ints(normalise_image(grid(16, 16, v))) == v);
  }
  SUBCASE("hand-traced 4x4") {
    // levels 3,7,9,12,40 with counts 4,4,3,4,1: (cdf - 4) / 12 * 255
    const std::vector<int> in{3, 3, 3, 7, 7, 7, 9, 9, 12, 12, 12, 12, 40, 3, 9, 7};
    const std::vector<int> out{0, 0, 0, 85, 85, 85, 149, 149, 234, 234, 234, 234, 255, 0, 149, 85};
    CHECK(as_ints(normalise_image(grid(4, 4, in))) == out);
  }
  SUBCASE("reference values for a random 6x6 grid") {
    const std::vector<int> in{137, 162, 14,  163, 99,  107, 129, 64,  196, 20, 62, 82,
                              118, 87,  34,  18,  10,  19,  38,  199, 46,  133, 152, 54,
                              63,  92,  60,  195, 43,  180, 161, 170, 31,  84, 129, 103};
    const std::vector<int> out{189, 211, 7,   219, 138, 153, 175, 102, 248, 29,  87,  109,
                               160, 124, 44,  15,  0,   22,  51,  255, 66,  182, 197, 73,
                               95,  131, 80,  240, 58,  233, 204, 226, 36,  117, 175, 146};
    CHECK(as_ints(normalise_image(grid(6, 6, in))) == out);
  }
}

TEST_CASE("normalise_image range and idempotence") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const GrayImage raw = render_image({{Finding::pneumonia, Severity::moderate, Interval::none}},
                                       model::View::frontal, 64, rng);
    const GrayImage once = normalise_image(raw);
    CHECK(std::all_of(once.pixels.begin(), once.pixels.end(),
                      [](double v) { return v >= 0.0 && v <= 255.0 && v == std::floor(v); }));
    const GrayImage twice = normalise_image(once);
    double worst = 0.0;
    for (std::size_t i = 0; i < once.pixels.size(); ++i) {
      worst = std::max(worst, std::abs(once.pixels[i] - twice.pixels[i]));
    }
    CHECK(worst <= 1.0);
  }
}

TEST_CASE("pgm round trip") {
  std::mt19937_64 rng(4);
  const GrayImage img = normalise_image(render_image({}, model::View::lateral, 64, rng));
  const auto dir = scratch_dir("pgm");
  std::filesystem::create_directories(dir);
  write_pgm(dir / "a.pgm", img);
  CHECK(read_pgm(dir / "a.pgm") == img);
  std::filesystem::remove_all(dir);
}

TEST_CASE("report grammar is invertible") {
  for (Finding f : kCatalogue) {
    CHECK(finding_from_name(finding_name(f)) == f);
    if (f == Finding::no_finding) {
      CHECK_THROWS_AS(motif(f), std::invalid_argument);
      continue;
    }
    for (Severity s : {Severity::mild, Severity::moderate}) {
      for (Interval i : {Interval::none, Interval::new_finding, Interval::unchanged,
                         Interval::worsened, Interval::improved}) {
        ReportPlan plan;
        plan.present.push_back({f, s, i});
        CHECK(parse_findings(render_findings(plan)) == plan);
      }
    }
  }
  ReportPlan clear;
  clear.resolved = {Finding::cardiomegaly, Finding::pneumothorax};
  CHECK(parse_findings(render_findings(clear)) == clear);
  CHECK(parse_findings(render_findings(ReportPlan{})) == ReportPlan{});
  CHECK(ReportPlan{}.labels() == std::vector<std::string>{"no-finding"});
  CHECK_THROWS_AS(parse_findings("the heart is gigantic ."), std::invalid_argument);

  // motifs occupy distinct cells
  std::set<std::pair<std::size_t, std::size_t>> cells;
  for (Finding f : kCatalogue) {
    if (f != Finding::no_finding) cells.insert({motif(f).cell_row, motif(f).cell_col});
  }
  CHECK(cells.size() == 7);
}

TEST_CASE("generate_corpus") {
  CorpusOptions opts;
  opts.n_studies = 60;
  opts.seed = 11;
  const auto a = generate_corpus(opts);
  const auto b = generate_corpus(opts);
  REQUIRE(a.size() == 60);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(model::same_study(a[i], b[i]));

  std::size_t with_prior = 0;
  for (const auto& s : a) {
    CHECK(s.has_training_target());
    REQUIRE_FALSE(s.images.empty());
    CHECK(s.images.front().view == model::View::frontal);
    CHECK(s.images.size() <= 3);
    const ReportPlan plan = recover_plan(s);
    CHECK(plan.labels() == s.findings);
    if (s.prior) {
      ++with_prior;
      CHECK(s.prior->timestamp < s.timestamp);
      CHECK(s.prior->patient_id == s.patient_id);
      CHECK(recover_plan(*s.prior).labels() == s.prior->findings);
      for (const auto& p : plan.present) CHECK(p.interval != Interval::none);
    } else {
      for (const auto& p : plan.present) CHECK(p.interval == Interval::none);
      CHECK(plan.resolved.empty());
    }
  }
  CHECK(with_prior > 10);

  opts.prior_probability = 0.0;
  for (const auto& s : generate_corpus(opts)) CHECK_FALSE(s.prior);
  opts.prior_probability = 1.5;
  CHECK_THROWS_AS(generate_corpus(opts), std::invalid_argument);
}

TEST_CASE("stratified_sample") {
  const std::vector<std::string> targets{"atelectasis", "cardiomegaly", "pneumonia"};

  SUBCASE("one study per finding") {
    std::vector<StudyRecord> pool;
    for (int rep = 0; rep < 3; ++rep) {
      for (std::size_t t = 0; t < targets.size(); ++t) {
        const std::string id = std::to_string(rep) + "_" + std::to_string(t);
        pool.push_back(labelled("s" + id, "p" + id, {targets[t]}));
      }
    }
    const auto picked = stratified_sample(pool, targets, 3, 1);
    std::multiset<std::string> got;
    for (auto i : picked) got.insert(pool[i].findings.front());
    CHECK(got == std::multiset<std::string>(targets.begin(), targets.end()));
    // catalogue-order tie-break: the first pick serves the first target
    CHECK(pool[picked.front()].findings.front() == "atelectasis");
  }

  SUBCASE("patients are used once") {
    std::vector<StudyRecord> pool{labelled("a", "p1", {"atelectasis"}),
                                  labelled("b", "p1", {"atelectasis"}),
                                  labelled("c", "p2", {"cardiomegaly"}),
                                  labelled("d", "p3", {"pneumonia"})};
    const auto picked = stratified_sample(pool, targets, 3, 5);
    std::set<std::string> patients;
    for (auto i : picked) patients.insert(pool[i].patient_id);
    CHECK(patients.size() == 3);
    try {
      stratified_sample(pool, targets, 4, 5);
      FAIL("expected exhaustion");
    } catch (const PoolExhausted& e) {
      CHECK(e.finding() == "atelectasis");
    }
  }

  SUBCASE("balanced on an ample pool") {
    CorpusOptions opts;
    opts.n_studies = 600;
    opts.seed = 2;
    opts.prior_probability = 0.0;
    const auto pool = generate_corpus(opts);
    const auto all = catalogue_names();
    const auto picked = stratified_sample(pool, all, 80, 9);
    CHECK(picked == stratified_sample(pool, all, 80, 9));
    std::map<std::string, std::size_t> counts;
    std::set<std::string> patients;
    std::size_t max_per_study = 0;
    for (auto i : picked) {
      patients.insert(pool[i].patient_id);
      max_per_study = std::max(max_per_study, pool[i].findings.size());
      for (const auto& f : pool[i].findings) ++counts[f];
    }
    CHECK(patients.size() == picked.size());
    std::size_t lo = picked.size(), hi = 0;
    for (const auto& f : all) {
      lo = std::min(lo, counts[f]);
      hi = std::max(hi, counts[f]);
    }
    CHECK(hi - lo <= max_per_study);
  }
}

TEST_CASE("split_dataset") {
  CorpusOptions opts;
  opts.n_studies = 120;
  opts.seed = 6;
  const auto corpus = generate_corpus(opts);
  const auto s = split_dataset(corpus, {}, 3);
  CHECK(s.train.size() + s.validation.size() + s.test.size() == corpus.size());
  std::map<std::string, int> where;
  auto mark = [&where](const std::vector<StudyRecord>& v, int tag) {
    for (const auto& r : v) {
      auto [it, fresh] = where.emplace(r.patient_id, tag);
      CHECK((fresh || it->second == tag));
    }
  };
  mark(s.train, 0);
  mark(s.validation, 1);
  mark(s.test, 2);
  const auto again = split_dataset(corpus, {}, 3);
  CHECK(again.train.size() == s.train.size());
  for (std::size_t i = 0; i < s.train.size(); ++i) CHECK(again.train[i].study_id == s.train[i].study_id);

  auto stripped = corpus;
  stripped[0].sections.get(model::Section::impression).reset();
  stripped[1].sections.get(model::Section::impression).reset();
  const auto f = split_dataset(stripped, {}, 3);
  CHECK(f.train_filtered + f.validation_filtered + f.test.size() >= 2);
  CHECK(f.train.size() + f.validation.size() + f.test.size() + f.train_filtered +
            f.validation_filtered == corpus.size());

  CHECK_THROWS_AS(split_dataset(corpus, {0.5, 0.5, 0.0}, 1), std::invalid_argument);
  CHECK_THROWS_AS(split_dataset(corpus, {0.5, 0.3, 0.3}, 1), std::invalid_argument);
  CHECK_THROWS_AS(split_dataset({corpus[0], corpus[1]}, {}, 1), std::invalid_argument);
}

TEST_CASE("dataset files round trip") {
  CorpusOptions opts;
  opts.n_studies = 8;
  opts.seed = 12;
  opts.prior_probability = 0.7;
  const auto corpus = generate_corpus(opts);
  const auto dir = scratch_dir("dataset");
  save_split(dir, "train", corpus);
  const auto loaded = load_split(dir, "train");
  REQUIRE(loaded.size() == corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) CHECK(model::same_study(loaded[i], corpus[i]));

  DatasetManifest m;
  m.generator_seed = 12;
  m.splits.push_back(summarise_split("train", corpus));
  std::size_t labels = 0;
  for (const auto& s : corpus) labels += s.findings.size();
  std::size_t counted = 0;
  for (const auto& [name, n] : m.splits[0].finding_counts) counted += n;
  CHECK(counted == labels);
  save_manifest(dir, m);
  CHECK(load_manifest(dir) == m);
  std::filesystem::remove_all(dir);
}
