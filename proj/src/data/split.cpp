#include "data/split.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "common/binary_io.hpp"
#include "common/error.hpp"
#include "common/rng.hpp"

namespace ccan {

namespace {

std::size_t fraction_count(std::size_t n, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError("fraction must lie in (0, 1], got " + std::to_string(fraction));
  }
  // Guard against products like 0.1·30 = 3.0000000000000004.
  const auto count = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
  return std::clamp<std::size_t>(count, n == 0 ? 0 : 1, n);
}

}  // namespace

SplitPlan patient_grouped_kfold(const std::vector<FeatureBag>& bags, std::size_t k, double val_fraction,
                                std::uint64_t seed) {
  if (k == 0) throw ConfigError("k must be positive");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must lie in [0, 1)");

  std::vector<std::string> patients;
  std::unordered_map<std::string, std::vector<std::size_t>> bags_of;
  for (std::size_t i = 0; i < bags.size(); ++i) {
    auto [it, inserted] = bags_of.try_emplace(bags[i].patient_id);
    if (inserted) patients.push_back(bags[i].patient_id);
    it->second.push_back(i);
  }
  if (k > patients.size()) {
    throw ConfigError("k = " + std::to_string(k) + " exceeds the patient count " + std::to_string(patients.size()));
  }

  Rng rng(derive_seed(seed, "split/patients"));
  rng.shuffle(patients.begin(), patients.end());
  std::vector<std::size_t> group(patients.size());
  for (std::size_t i = 0; i < patients.size(); ++i) group[i] = i % k;

  SplitPlan plan;
  plan.k = k;
  plan.seed = seed;
  for (std::size_t f = 0; f < k; ++f) {
    // 0 = train, 1 = val, 2 = test, indexed by bag.
    std::vector<int> set_of(bags.size(), 0);
    std::vector<std::size_t> rest;
    std::size_t rest_bags = 0;
    for (std::size_t i = 0; i < patients.size(); ++i) {
      if (group[i] == f) {
        for (std::size_t b : bags_of[patients[i]]) set_of[b] = 2;
      } else {
        rest.push_back(i);
        rest_bags += bags_of[patients[i]].size();
      }
    }
    Rng val_rng(derive_seed(seed, "split/val/" + std::to_string(f)));
    val_rng.shuffle(rest.begin(), rest.end());
    const double target = val_fraction * static_cast<double>(rest_bags);
    std::size_t val_bags = 0;
    // Keep at least one patient in train.
    for (std::size_t r = 0; r + 1 < rest.size() && static_cast<double>(val_bags) < target; ++r) {
      for (std::size_t b : bags_of[patients[rest[r]]]) set_of[b] = 1;
      val_bags += bags_of[patients[rest[r]]].size();
    }

    Fold fold;
    for (std::size_t b = 0; b < bags.size(); ++b) {
      auto& dest = set_of[b] == 0 ? fold.train : set_of[b] == 1 ? fold.val : fold.test;
      dest.push_back(bags[b].bag_id);
    }
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

void write_split_plan(const SplitPlan& plan, const std::string& path) {
  std::ostringstream out;
  out << "# k=" << plan.k << " seed=" << plan.seed << "\n";
  out << "fold,set,bag_id\n";
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    for (const auto& id : plan.folds[f].train) out << f << ",train," << id << '\n';
    for (const auto& id : plan.folds[f].val) out << f << ",val," << id << '\n';
    for (const auto& id : plan.folds[f].test) out << f << ",test," << id << '\n';
  }
  write_text_file(path, out.str());
}

SplitPlan read_split_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open split plan " + path);
  SplitPlan plan;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      unsigned long long k = 0, seed = 0;
      if (std::sscanf(line.c_str(), "# k=%llu seed=%llu", &k, &seed) == 2) {
        plan.k = k;
        plan.seed = seed;
      }
      continue;
    }
    if (!header_seen) {
      if (line != "fold,set,bag_id") throw DataError(path + ": expected header fold,set,bag_id");
      header_seen = true;
      continue;
    }
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string::npos) throw DataError(path + ":" + std::to_string(line_no) + ": malformed row");
    std::size_t fold = 0;
    try {
      fold = std::stoul(line.substr(0, c1));
    } catch (const std::exception&) {
      throw DataError(path + ":" + std::to_string(line_no) + ": bad fold index");
    }
    const std::string set = line.substr(c1 + 1, c2 - c1 - 1);
    if (plan.folds.size() <= fold) plan.folds.resize(fold + 1);
    Fold& f = plan.folds[fold];
    const std::string id = line.substr(c2 + 1);
    if (set == "train") f.train.push_back(id);
    else if (set == "val") f.val.push_back(id);
    else if (set == "test") f.test.push_back(id);
    else throw DataError(path + ":" + std::to_string(line_no) + ": unknown set '" + set + "'");
  }
  if (!header_seen) throw DataError(path + ": empty split plan");
  if (plan.k == 0) plan.k = plan.folds.size();
  return plan;
}

std::vector<std::string> subsample_fraction(const std::vector<std::string>& ids, double fraction, std::uint64_t seed) {
  const std::size_t count = fraction_count(ids.size(), fraction);
  if (fraction == 1.0) return ids;
  std::vector<std::string> shuffled = ids;
  Rng rng(derive_seed(seed, "subsample"));
  rng.shuffle(shuffled.begin(), shuffled.end());
  shuffled.resize(count);
  return shuffled;
}

std::vector<std::string> subsample_fraction_by_patient(const std::vector<std::string>& ids,
                                                       const std::vector<std::string>& patient_of, double fraction,
                                                       std::uint64_t seed) {
  if (patient_of.size() != ids.size()) throw DataError("patient list does not match the id list");
  const std::size_t count = fraction_count(ids.size(), fraction);
  if (fraction == 1.0) return ids;
  std::vector<std::string> patients;
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto [it, inserted] = members.try_emplace(patient_of[i]);
    if (inserted) patients.push_back(patient_of[i]);
    it->second.push_back(i);
  }
  Rng rng(derive_seed(seed, "subsample"));
  rng.shuffle(patients.begin(), patients.end());
  std::vector<std::string> out;
  for (const auto& p : patients) {
    if (out.size() >= count) break;
    for (std::size_t i : members[p]) out.push_back(ids[i]);
  }
  return out;
}

std::vector<const FeatureBag*> select_bags(const std::vector<FeatureBag>& bags, const std::vector<std::string>& ids) {
  std::unordered_map<std::string, const FeatureBag*> by_id;
  for (const auto& b : bags) by_id.emplace(b.bag_id, &b);
  std::vector<const FeatureBag*> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw DataError("bag id '" + id + "' not found in the dataset");
    out.push_back(it->second);
  }
  return out;
}

}  // namespace ccan
