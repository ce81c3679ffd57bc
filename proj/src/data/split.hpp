#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "data/bag.hpp"

namespace ccan {

struct Fold {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;

  bool operator==(const Fold&) const = default;
};

struct SplitPlan {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<Fold> folds;

  bool operator==(const SplitPlan&) const = default;
};

// Patients are shuffled by seed and dealt into k test groups. For each fold the
// remaining patients are split into train/val so val holds about val_fraction of
// the remaining bags. Bag ids inside each set keep dataset order.
// Throws ConfigError when k exceeds the number of patients.
SplitPlan patient_grouped_kfold(const std::vector<FeatureBag>& bags, std::size_t k, double val_fraction,
                                std::uint64_t seed);

// CSV: fold,set,bag_id with set in {train,val,test}. The seed rides in a comment line.
void write_split_plan(const SplitPlan& plan, const std::string& path);
SplitPlan read_split_plan(const std::string& path);

// ceil(fraction·|ids|) ids taken as the prefix of one seeded shuffle, so subsets
// for increasing fractions are nested. fraction = 1 returns ids unchanged.
std::vector<std::string> subsample_fraction(const std::vector<std::string>& ids, double fraction, std::uint64_t seed);

// Same prefix rule applied to whole patients: patients are added until the subset
// reaches ceil(fraction·|ids|) bags. patient_of maps each id to its patient.
std::vector<std::string> subsample_fraction_by_patient(const std::vector<std::string>& ids,
                                                       const std::vector<std::string>& patient_of, double fraction,
                                                       std::uint64_t seed);

// Resolves bag ids against a dataset. Throws DataError for unknown ids.
std::vector<const FeatureBag*> select_bags(const std::vector<FeatureBag>& bags, const std::vector<std::string>& ids);

}  // namespace ccan
