#include "preprocess/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "common/binary_io.hpp"
#include "common/error.hpp"
#include "common/rng.hpp"

namespace ccan {

std::vector<std::uint8_t> resize_bilinear(const std::vector<std::uint8_t>& src, std::size_t src_w, std::size_t src_h,
                                          std::size_t channels, std::size_t dst_w, std::size_t dst_h) {
  if (src_w == dst_w && src_h == dst_h) return src;
  std::vector<std::uint8_t> dst(dst_w * dst_h * channels);
  const double sx = static_cast<double>(src_w) / static_cast<double>(dst_w);
  const double sy = static_cast<double>(src_h) / static_cast<double>(dst_h);
  for (std::size_t y = 0; y < dst_h; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(src_h - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, src_h - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < dst_w; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(src_w - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, src_w - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t c = 0; c < channels; ++c) {
        auto px = [&](std::size_t xx, std::size_t yy) { return static_cast<double>(src[(yy * src_w + xx) * channels + c]); };
        const double top = px(x0, y0) * (1.0 - wx) + px(x1, y0) * wx;
        const double bottom = px(x0, y1) * (1.0 - wx) + px(x1, y1) * wx;
        const double v = top * (1.0 - wy) + bottom * wy;
        dst[(y * dst_w + x) * channels + c] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return dst;
}

Tessellation tessellate(const RasterImage& img, double patch_microns, std::size_t out_size) {
  img.validate();
  if (!(patch_microns > 0.0)) throw DataError("patch edge length must be positive");
  const auto side = static_cast<std::size_t>(std::lround(patch_microns / img.microns_per_pixel));
  if (side == 0 || img.width < side || img.height < side) {
    throw DataError("image " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                    " is smaller than one patch of " + std::to_string(side) + " px");
  }
  Tessellation t;
  t.grid_rows = img.height / side;
  t.grid_cols = img.width / side;
  std::vector<std::uint8_t> crop(side * side * 3);
  for (std::size_t r = 0; r < t.grid_rows; ++r) {
    for (std::size_t c = 0; c < t.grid_cols; ++c) {
      PatchRecord p;
      p.size = out_size;
      p.row = r;
      p.col = c;
      p.src_x = c * side;
      p.src_y = r * side;
      p.src_side = side;
      for (std::size_t y = 0; y < side; ++y) {
        for (std::size_t x = 0; x < side; ++x) {
          for (std::size_t ch = 0; ch < 3; ++ch) {
            const std::size_t src_ch = img.channels == 3 ? ch : 0;
            crop[(y * side + x) * 3 + ch] = img.at(p.src_x + x, p.src_y + y, src_ch);
          }
        }
      }
      p.pixels = resize_bilinear(crop, side, side, 3, out_size, out_size);
      t.patches.push_back(std::move(p));
    }
  }
  return t;
}

std::vector<double> grayscale(const PatchRecord& patch, GrayMode mode) {
  const std::size_t n = patch.size * patch.size;
  if (patch.pixels.size() != n * 3) throw DataError("patch pixel buffer does not match its size");
  std::vector<double> gray(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = patch.pixels[i * 3], g = patch.pixels[i * 3 + 1], b = patch.pixels[i * 3 + 2];
    gray[i] = mode == GrayMode::kLuma601 ? 0.299 * r + 0.587 * g + 0.114 * b : (r + g + b) / 3.0;
  }
  return gray;
}

bool is_white(const PatchRecord& patch, double threshold, GrayMode mode) {
  const auto gray = grayscale(patch, mode);
  double total = 0.0;
  for (double v : gray) total += v;
  // Luma weights sum to 1 only up to rounding; an all-v patch must average exactly v.
  const double mean = total / static_cast<double>(gray.size());
  return mean - threshold > 1e-9;
}

std::vector<std::uint8_t> canny_edges(const std::vector<double>& gray, std::size_t w, std::size_t h,
                                      const CannyParams& params) {
  if (gray.size() != w * h) throw DimensionError("grayscale buffer does not match the extents");
  if (params.kernel % 2 == 0) throw ConfigError("canny kernel size must be odd");
  auto clampi = [](long v, std::size_t n) { return static_cast<std::size_t>(std::clamp(v, 0L, static_cast<long>(n) - 1)); };

  // Separable Gaussian, replicated borders.
  const long half = static_cast<long>(params.kernel / 2);
  std::vector<double> kernel(params.kernel);
  double ksum = 0.0;
  for (long i = -half; i <= half; ++i) {
    kernel[static_cast<std::size_t>(i + half)] = std::exp(-static_cast<double>(i * i) / (2.0 * params.sigma * params.sigma));
    ksum += kernel[static_cast<std::size_t>(i + half)];
  }
  for (double& k : kernel) k /= ksum;
  std::vector<double> tmp(w * h), smooth(w * h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (long i = -half; i <= half; ++i) acc += kernel[static_cast<std::size_t>(i + half)] * gray[y * w + clampi(static_cast<long>(x) + i, w)];
      tmp[y * w + x] = acc;
    }
  }
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (long i = -half; i <= half; ++i) acc += kernel[static_cast<std::size_t>(i + half)] * tmp[clampi(static_cast<long>(y) + i, h) * w + x];
      smooth[y * w + x] = acc;
    }
  }

  // Sobel gradients; magnitude clamped to the 8-bit range.
  std::vector<double> mag(w * h, 0.0);
  std::vector<std::uint8_t> dir(w * h, 0);  // 0: horizontal gradient, 1: 45°, 2: vertical, 3: 135°
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      auto s = [&](long dx, long dy) {
        return smooth[clampi(static_cast<long>(y) + dy, h) * w + clampi(static_cast<long>(x) + dx, w)];
      };
      const double gx = (s(1, -1) + 2 * s(1, 0) + s(1, 1)) - (s(-1, -1) + 2 * s(-1, 0) + s(-1, 1));
      const double gy = (s(-1, 1) + 2 * s(0, 1) + s(1, 1)) - (s(-1, -1) + 2 * s(0, -1) + s(1, -1));
      mag[y * w + x] = std::min(std::hypot(gx, gy), 255.0);
      double angle = std::atan2(gy, gx) * 180.0 / 3.14159265358979323846;
      if (angle < 0) angle += 180.0;
      dir[y * w + x] = angle < 22.5 || angle >= 157.5 ? 0 : angle < 67.5 ? 1 : angle < 112.5 ? 2 : 3;
    }
  }

  // Non-maximum suppression; image border pixels are never edges.
  std::vector<double> thin(w * h, 0.0);
  for (std::size_t y = 1; y + 1 < h; ++y) {
    for (std::size_t x = 1; x + 1 < w; ++x) {
      const double m = mag[y * w + x];
      if (m == 0.0) continue;
      double a = 0, b = 0;
      switch (dir[y * w + x]) {
        case 0: a = mag[y * w + x - 1]; b = mag[y * w + x + 1]; break;
        case 1: a = mag[(y - 1) * w + x - 1]; b = mag[(y + 1) * w + x + 1]; break;
        case 2: a = mag[(y - 1) * w + x]; b = mag[(y + 1) * w + x]; break;
        default: a = mag[(y - 1) * w + x + 1]; b = mag[(y + 1) * w + x - 1]; break;
      }
      if (m >= a && m >= b) thin[y * w + x] = m;
    }
  }

  // Hysteresis: weak pixels survive when 8-connected to a strong one.
  std::vector<std::uint8_t> edges(w * h, 0);
  std::deque<std::size_t> queue;
  for (std::size_t i = 0; i < w * h; ++i) {
    if (thin[i] >= params.high) {
      edges[i] = 1;
      queue.push_back(i);
    }
  }
  while (!queue.empty()) {
    const std::size_t i = queue.front();
    queue.pop_front();
    const long x = static_cast<long>(i % w), y = static_cast<long>(i / w);
    for (long dy = -1; dy <= 1; ++dy) {
      for (long dx = -1; dx <= 1; ++dx) {
        const long nx = x + dx, ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= static_cast<long>(w) || ny >= static_cast<long>(h)) continue;
        const std::size_t j = static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx);
        if (!edges[j] && thin[j] >= params.low) {
          edges[j] = 1;
          queue.push_back(j);
        }
      }
    }
  }
  return edges;
}

double canny_edge_fraction(const PatchRecord& patch, const CannyParams& params, GrayMode mode) {
  const auto edges = canny_edges(grayscale(patch, mode), patch.size, patch.size, params);
  std::size_t count = 0;
  for (auto e : edges) count += e;
  return static_cast<double>(count) / static_cast<double>(edges.size());
}

bool is_blurry(const PatchRecord& patch, double threshold, const CannyParams& params, GrayMode mode) {
  return canny_edge_fraction(patch, params, mode) < threshold;
}

namespace {
constexpr std::size_t kStubGrid = 16;
constexpr std::size_t kStubInputs = kStubGrid * kStubGrid * 3;
}  // namespace

StubFeatureExtractor::StubFeatureExtractor(std::size_t feature_dim, std::uint64_t seed)
    : feature_dim_(feature_dim), projection_(kStubInputs * feature_dim) {
  if (feature_dim == 0) throw ConfigError("feature_dim must be positive");
  Rng rng(derive_seed(seed, "stub_features/projection"));
  const double sd = 1.0 / std::sqrt(static_cast<double>(kStubInputs));
  for (float& v : projection_) v = static_cast<float>(rng.normal(0.0, sd));
}

std::vector<float> StubFeatureExtractor::operator()(const PatchRecord& patch) const {
  if (patch.size % kStubGrid != 0 || patch.pixels.size() != patch.size * patch.size * 3) {
    throw DataError("stub features need a square 3-channel patch with side divisible by 16");
  }
  const std::size_t cell = patch.size / kStubGrid;
  std::vector<double> pooled(kStubInputs, 0.0);
  for (std::size_t y = 0; y < patch.size; ++y) {
    for (std::size_t x = 0; x < patch.size; ++x) {
      const std::size_t base = ((y / cell) * kStubGrid + x / cell) * 3;
      for (std::size_t c = 0; c < 3; ++c) pooled[base + c] += patch.pixels[(y * patch.size + x) * 3 + c];
    }
  }
  // Centered to [-1, 1].
  const double norm = 1.0 / (static_cast<double>(cell * cell) * 127.5);
  for (double& v : pooled) v = v * norm - 1.0;
  std::vector<double> acc(feature_dim_, 0.0);
  for (std::size_t i = 0; i < kStubInputs; ++i) {
    const float* row = &projection_[i * feature_dim_];
    for (std::size_t d = 0; d < feature_dim_; ++d) acc[d] += pooled[i] * row[d];
  }
  std::vector<float> out(feature_dim_);
  for (std::size_t d = 0; d < feature_dim_; ++d) out[d] = static_cast<float>(std::tanh(acc[d]));
  return out;
}

std::vector<float> stub_features(const PatchRecord& patch, std::size_t feature_dim, std::uint64_t seed) {
  return StubFeatureExtractor(feature_dim, seed)(patch);
}

FeatureBag build_bag(const RasterImage& img, std::uint32_t label, const std::string& bag_id,
                     const std::string& patient_id, const PipelineOptions& options, QcReport& qc) {
  qc = {};
  const Tessellation t = tessellate(img, options.patch_microns, options.patch_pixels);
  qc.total = t.patches.size();
  std::vector<const PatchRecord*> kept;
  for (const auto& p : t.patches) {
    if (is_white(p, options.white_threshold, options.gray)) {
      ++qc.white_rejected;
    } else if (is_blurry(p, options.blur_threshold, options.canny, options.gray)) {
      ++qc.blur_rejected;
    } else {
      kept.push_back(&p);
    }
  }
  qc.kept = kept.size();
  if (kept.empty()) {
    throw DataError("no patch of " + bag_id + " survived filtering (" + std::to_string(qc.white_rejected) +
                    " white, " + std::to_string(qc.blur_rejected) + " blurry of " + std::to_string(qc.total) + ")");
  }
  const StubFeatureExtractor extract(options.feature_dim, options.seed);
  FeatureBag bag;
  bag.bag_id = bag_id;
  bag.patient_id = patient_id;
  bag.label = label;
  bag.rows_total = t.grid_rows;
  bag.cols_total = t.grid_cols;
  bag.tokens = Matrix(kept.size(), options.feature_dim);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const auto f = extract(*kept[i]);
    std::copy(f.begin(), f.end(), bag.tokens.values.begin() + static_cast<std::ptrdiff_t>(i * options.feature_dim));
    bag.coords.push_back({kept[i]->row, kept[i]->col, t.grid_rows, t.grid_cols});
  }
  return bag;
}

std::string qc_csv(const QcReport& qc) {
  return "total,white_rejected,blur_rejected,kept\n" + std::to_string(qc.total) + "," +
         std::to_string(qc.white_rejected) + "," + std::to_string(qc.blur_rejected) + "," + std::to_string(qc.kept) +
         "\n";
}

QcReport run_pipeline(const RasterImage& img, const std::string& out_path, std::uint32_t label,
                      const std::string& bag_id, const std::string& patient_id, const PipelineOptions& options,
                      const std::string& qc_path) {
  QcReport qc;
  FeatureBag bag;
  try {
    bag = build_bag(img, label, bag_id, patient_id, options, qc);
  } catch (const DataError&) {
    if (!qc_path.empty() && qc.total > 0) write_text_file(qc_path, qc_csv(qc));
    throw;
  }
  write_bag(bag, out_path);
  if (!qc_path.empty()) write_text_file(qc_path, qc_csv(qc));
  return qc;
}

}  // namespace ccan
