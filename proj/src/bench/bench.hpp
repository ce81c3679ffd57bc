#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "model/config.hpp"

namespace ccan {

// Closed-form multiply-accumulate count of one eval-mode CCAN forward over N tokens:
// input projection, every cross/self block, the skip-free head per stage.
std::uint64_t count_macs(const CCANConfig& config, std::size_t n);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

// Ordinary least squares of y on x. r2 is 1 when y is constant and perfectly fit.
LinearFit linear_fit(const std::vector<double>& xs, const std::vector<double>& ys);

struct ScalingRow {
  ModelKind kind = ModelKind::kCCAN;
  std::size_t n = 0;
  double wall_ms = 0.0;          // median over repeats
  std::uint64_t macs = 0;        // analytic count
  std::uint64_t probed_macs = 0; // counted during one instrumented forward
  std::uint64_t attention_macs = 0;  // full-self-attention N² term; 0 for CCAN
  std::uint64_t peak_bytes = 0;  // live-tensor accounting
  bool failed = false;
  std::string error;
};

struct ScalingReport {
  std::vector<ScalingRow> rows;
  LinearFit ccan_time;   // wall_ms vs N
  LinearFit ccan_macs;   // analytic MACs vs N
  // attention_macs(N_{i+1}) / attention_macs(N_i) of the baseline, per consecutive pair.
  std::vector<double> baseline_attention_ratios;
};

struct BenchOptions {
  std::size_t repeats = 7;
  std::size_t warmups = 2;
  bool include_baseline = true;
  std::uint64_t seed = 0;
};

// Eval-mode forwards of CCAN (and the full-self-attention baseline) on synthetic
// bags of each N. Failures at one size become failed rows. Throws ConfigError
// when repeats < 5 or Ns is not strictly increasing.
ScalingReport bench_scaling(const CCANConfig& config, const std::vector<std::size_t>& ns,
                            const BenchOptions& options = {});

// model,n,wall_ms,macs,probed_macs,attention_macs,peak_bytes,status
std::string scaling_csv(const ScalingReport& report);
std::string scaling_summary(const ScalingReport& report);

}  // namespace ccan
