#include "bench/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <sstream>

#include "attention/attention.hpp"
#include "common/error.hpp"
#include "common/format.hpp"
#include "common/rng.hpp"
#include "model/baseline.hpp"
#include "model/model.hpp"

namespace ccan {

std::uint64_t count_macs(const CCANConfig& cfg, std::size_t n) {
  cfg.validate();
  const std::uint64_t d = cfg.latent_dim;
  std::uint64_t total = static_cast<std::uint64_t>(n) * cfg.input_width() * d;
  const auto counts = cfg.stage_latent_counts();
  std::size_t context = n;
  for (std::size_t m : counts) {
    total += cfg.repeats * (cross_block_macs(m, context, d, d) + cfg.self_layers * self_block_macs(m, d));
    total += cross_block_macs(m + 1, n, d, d) + self_block_macs(m + 1, d);
    total += d * d + d * cfg.output_dim();  // head
    context = m;
  }
  return total;
}

LinearFit linear_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw UsageError("linear fit needs at least two paired points");
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0) throw UsageError("linear fit needs distinct x values");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
    ss_res += r * r;
  }
  fit.r2 = syy == 0.0 ? 1.0 : 1.0 - ss_res / syy;
  return fit;
}

namespace {

FeatureBag bench_bag(std::size_t n, std::size_t dim, Rng& rng) {
  FeatureBag bag;
  bag.bag_id = "bench" + std::to_string(n);
  bag.patient_id = "bench";
  std::size_t side = 1;
  while (side * side < n) ++side;
  bag.rows_total = side;
  bag.cols_total = side;
  bag.tokens = Matrix(n, dim);
  for (float& v : bag.tokens.values) v = static_cast<float>(rng.normal());
  for (std::size_t i = 0; i < n; ++i) bag.coords.push_back({i / side, i % side, side, side});
  return bag;
}

template <typename Fn>
ScalingRow measure(ModelKind kind, std::size_t n, const BenchOptions& options, Fn&& run) {
  ScalingRow row;
  row.kind = kind;
  row.n = n;
  try {
    NoGradGuard no_grad;
    {
      MacProbe macs;
      MemoryProbe memory;
      run();
      row.probed_macs = macs.count();
      row.peak_bytes = memory.peak_bytes();
    }
    for (std::size_t w = 0; w < options.warmups; ++w) run();
    std::vector<double> times;
    for (std::size_t r = 0; r < options.repeats; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      run();
      times.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    }
    std::sort(times.begin(), times.end());
    row.wall_ms = times[times.size() / 2];
  } catch (const std::bad_alloc&) {
    row.failed = true;
    row.error = "out of memory";
  } catch (const std::exception& e) {
    row.failed = true;
    row.error = e.what();
  }
  return row;
}

}  // namespace

ScalingReport bench_scaling(const CCANConfig& config, const std::vector<std::size_t>& ns, const BenchOptions& options) {
  config.validate();
  if (options.repeats < 5) throw ConfigError("bench.repeats must be at least 5");
  if (ns.empty()) throw ConfigError("bench needs at least one token count");
  for (std::size_t i = 0; i < ns.size(); ++i) {
    if (ns[i] == 0 || (i > 0 && ns[i] <= ns[i - 1])) throw ConfigError("bench token counts must be strictly increasing and positive");
  }
  const auto model = init_model<float>(config, derive_seed(options.seed, "bench/ccan"));
  const auto baseline = init_baseline<float>(ModelKind::kFullSelfAttention, config, derive_seed(options.seed, "bench/baseline"));
  Rng rng(derive_seed(options.seed, "bench/bags"));

  ScalingReport report;
  std::vector<double> xs, times, macs;
  std::vector<std::uint64_t> attention;
  for (std::size_t n : ns) {
    const FeatureBag bag = bench_bag(n, config.feature_dim, rng);
    ScalingRow row = measure(ModelKind::kCCAN, n, options, [&] { (void)forward(model, bag, nullptr, false); });
    row.macs = count_macs(config, n);
    if (!row.failed) {
      xs.push_back(static_cast<double>(n));
      times.push_back(row.wall_ms);
      macs.push_back(static_cast<double>(row.macs));
    }
    report.rows.push_back(row);
    if (options.include_baseline) {
      ScalingRow b = measure(ModelKind::kFullSelfAttention, n, options, [&] { (void)baseline_forward(baseline, bag); });
      b.macs = baseline_macs(ModelKind::kFullSelfAttention, config, n);
      b.attention_macs = baseline_attention_macs(config, n);
      attention.push_back(b.attention_macs);
      report.rows.push_back(b);
    }
  }
  if (xs.size() >= 2) {
    report.ccan_time = linear_fit(xs, times);
    report.ccan_macs = linear_fit(xs, macs);
  }
  for (std::size_t i = 1; i < attention.size(); ++i) {
    report.baseline_attention_ratios.push_back(static_cast<double>(attention[i]) / static_cast<double>(attention[i - 1]));
  }
  return report;
}

std::string scaling_csv(const ScalingReport& report) {
  std::ostringstream out;
  out << "model,n,wall_ms,macs,probed_macs,attention_macs,peak_bytes,status\n";
  for (const auto& r : report.rows) {
    out << to_string(r.kind) << ',' << r.n << ',' << format_double(r.wall_ms) << ',' << r.macs << ','
        << r.probed_macs << ',' << r.attention_macs << ',' << r.peak_bytes << ','
        << (r.failed ? "failed: " + r.error : std::string("ok")) << '\n';
  }
  return out.str();
}

std::string scaling_summary(const ScalingReport& report) {
  std::ostringstream out;
  char line[256];
  out << "model                  N     median_ms          MACs   peak_MiB\n";
  for (const auto& r : report.rows) {
    if (r.failed) {
      std::snprintf(line, sizeof(line), "%-20s %5zu  failed (%s)\n", to_string(r.kind).c_str(), r.n, r.error.c_str());
    } else {
      std::snprintf(line, sizeof(line), "%-20s %5zu  %12.3f  %12llu  %9.2f\n", to_string(r.kind).c_str(), r.n, r.wall_ms,
                    static_cast<unsigned long long>(r.macs), static_cast<double>(r.peak_bytes) / (1024.0 * 1024.0));
    }
    out << line;
  }
  std::snprintf(line, sizeof(line), "ccan time fit: %.6g ms/token + %.6g ms, R^2 = %.6f\n", report.ccan_time.slope,
                report.ccan_time.intercept, report.ccan_time.r2);
  out << line;
  std::snprintf(line, sizeof(line), "ccan MAC fit:  %.6g MACs/token + %.6g, R^2 = %.9f\n", report.ccan_macs.slope,
                report.ccan_macs.intercept, report.ccan_macs.r2);
  out << line;
  for (double r : report.baseline_attention_ratios) {
    std::snprintf(line, sizeof(line), "baseline attention MAC ratio between consecutive N: %.6f\n", r);
    out << line;
  }
  return out.str();
}

}  // namespace ccan
