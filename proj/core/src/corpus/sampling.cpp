#include "rrg/corpus/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

namespace rrg::corpus {

std::vector<std::size_t> stratified_sample(const std::vector<model::StudyRecord>& pool,
                                           const std::vector<std::string>& targets,
                                           std::size_t n, std::uint64_t seed) {
  if (targets.empty()) throw std::invalid_argument("stratified_sample: no target findings");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> counts(targets.size(), 0);
  std::vector<std::size_t> selected;
  std::set<std::string> used_patients;
  std::vector<char> taken(pool.size(), 0);

  auto has = [](const model::StudyRecord& s, const std::string& f) {
    return std::find(s.findings.begin(), s.findings.end(), f) != s.findings.end();
  };

  while (selected.size() < n) {
    const auto min_it = std::min_element(counts.begin(), counts.end());
    const std::size_t t = static_cast<std::size_t>(min_it - counts.begin());
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (!taken[i] && has(pool[i], targets[t]) && !used_patients.contains(pool[i].patient_id)) {
        candidates.push_back(i);
      }
    }
    if (candidates.empty()) {
      throw PoolExhausted(targets[t], "stratified_sample: no unselected patient has a study with '" +
                                          targets[t] + "' (selected " +
                                          std::to_string(selected.size()) + " of " +
                                          std::to_string(n) + ")");
    }
    const std::size_t pick =
        candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng)];
    taken[pick] = 1;
    used_patients.insert(pool[pick].patient_id);
    selected.push_back(pick);
    for (std::size_t k = 0; k < targets.size(); ++k) {
      if (has(pool[pick], targets[k])) ++counts[k];
    }
  }
  return selected;
}

DatasetSplits split_dataset(const std::vector<model::StudyRecord>& corpus,
                            const SplitFractions& fractions, std::uint64_t seed) {
  const double parts[3] = {fractions.train, fractions.validation, fractions.test};
  for (double p : parts) {
    if (!(p > 0.0)) throw std::invalid_argument("split_dataset: fractions must be positive");
  }
  if (std::abs(parts[0] + parts[1] + parts[2] - 1.0) > 1e-9) {
    throw std::invalid_argument("split_dataset: fractions must sum to 1");
  }
  // patients in order of first appearance, then shuffled
  std::vector<std::string> patients;
  std::set<std::string> seen;
  for (const auto& s : corpus) {
    if (seen.insert(s.patient_id).second) patients.push_back(s.patient_id);
  }
  if (patients.size() < 3) {
    throw std::invalid_argument("split_dataset: " + std::to_string(patients.size()) +
                                " patients cannot fill three splits");
  }
  std::mt19937_64 rng(seed);
  std::shuffle(patients.begin(), patients.end(), rng);

  const std::size_t np = patients.size();
  std::size_t n_train = static_cast<std::size_t>(std::llround(parts[0] * static_cast<double>(np)));
  std::size_t n_val = static_cast<std::size_t>(std::llround(parts[1] * static_cast<double>(np)));
  n_train = std::clamp<std::size_t>(n_train, 1, np - 2);
  n_val = std::clamp<std::size_t>(n_val, 1, np - n_train - 1);

  std::map<std::string, int> assignment;
  for (std::size_t i = 0; i < np; ++i) {
    assignment[patients[i]] = i < n_train ? 0 : (i < n_train + n_val ? 1 : 2);
  }
  DatasetSplits out;
  for (const auto& s : corpus) {
    const int split = assignment.at(s.patient_id);
    if (split == 2) {
      out.test.push_back(s);
    } else if (!s.has_training_target()) {
      ++(split == 0 ? out.train_filtered : out.validation_filtered);
    } else {
      (split == 0 ? out.train : out.validation).push_back(s);
    }
  }
  return out;
}

}  // namespace rrg::corpus
