#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "data/bag.hpp"
#include "preprocess/image.hpp"

namespace ccan {

inline constexpr std::size_t kPatchPixels = 256;

enum class GrayMode { kLuma601, kChannelMean };

struct CannyParams {
  double sigma = 1.4;
  std::size_t kernel = 5;  // odd
  double low = 50.0;
  double high = 100.0;
};

// A resized square patch, always three channels.
struct PatchRecord {
  std::size_t size = kPatchPixels;
  std::vector<std::uint8_t> pixels;  // size × size × 3
  std::size_t row = 0;               // grid position
  std::size_t col = 0;
  std::size_t src_x = 0;             // source rectangle in image pixels
  std::size_t src_y = 0;
  std::size_t src_side = 0;
};

struct Tessellation {
  std::size_t grid_rows = 0;
  std::size_t grid_cols = 0;
  std::vector<PatchRecord> patches;  // raster order
};

// Non-overlapping patches of round(patch_microns / mpp) pixels from the top-left,
// partial edge patches dropped, each bilinearly resized (half-pixel centers) to
// out_size. Throws DataError when not even one patch fits.
Tessellation tessellate(const RasterImage& img, double patch_microns = 256.0, std::size_t out_size = kPatchPixels);

// Square-image bilinear resize with half-pixel centers; identity when sizes match.
std::vector<std::uint8_t> resize_bilinear(const std::vector<std::uint8_t>& src, std::size_t src_w, std::size_t src_h,
                                          std::size_t channels, std::size_t dst_w, std::size_t dst_h);

std::vector<double> grayscale(const PatchRecord& patch, GrayMode mode = GrayMode::kLuma601);

// Mean grayscale strictly above the threshold.
bool is_white(const PatchRecord& patch, double threshold = 224.0, GrayMode mode = GrayMode::kLuma601);

// Binary Canny edge map of a grayscale image (1 = edge).
std::vector<std::uint8_t> canny_edges(const std::vector<double>& gray, std::size_t width, std::size_t height,
                                      const CannyParams& params = {});

double canny_edge_fraction(const PatchRecord& patch, const CannyParams& params = {},
                           GrayMode mode = GrayMode::kLuma601);

// Edge fraction strictly below the threshold.
bool is_blurry(const PatchRecord& patch, double threshold = 0.02, const CannyParams& params = {},
               GrayMode mode = GrayMode::kLuma601);

// 16×16×3 box downsample, seeded Gaussian projection to feature_dim, tanh.
class StubFeatureExtractor {
 public:
  StubFeatureExtractor(std::size_t feature_dim, std::uint64_t seed);
  std::vector<float> operator()(const PatchRecord& patch) const;
  std::size_t feature_dim() const { return feature_dim_; }

 private:
  std::size_t feature_dim_;
  std::vector<float> projection_;  // 768 × feature_dim
};

std::vector<float> stub_features(const PatchRecord& patch, std::size_t feature_dim = 2048, std::uint64_t seed = 0);

struct PipelineOptions {
  double patch_microns = 256.0;
  std::size_t patch_pixels = kPatchPixels;
  double white_threshold = 224.0;
  double blur_threshold = 0.02;
  CannyParams canny;
  GrayMode gray = GrayMode::kLuma601;
  std::size_t feature_dim = 2048;
  std::uint64_t seed = 0;
};

struct QcReport {
  std::size_t total = 0;
  std::size_t white_rejected = 0;
  std::size_t blur_rejected = 0;  // counted only among non-white patches
  std::size_t kept = 0;
};

// Tessellate, filter and featurize one image. qc is filled even when no patch
// survives, in which case DataError is thrown.
FeatureBag build_bag(const RasterImage& img, std::uint32_t label, const std::string& bag_id,
                     const std::string& patient_id, const PipelineOptions& options, QcReport& qc);

// build_bag, then the CCFB file at out_path and a QC CSV at qc_path (if non-empty).
// The QC file is written before a zero-survivor error is raised.
QcReport run_pipeline(const RasterImage& img, const std::string& out_path, std::uint32_t label,
                      const std::string& bag_id, const std::string& patient_id, const PipelineOptions& options,
                      const std::string& qc_path = "");

// Header total,white_rejected,blur_rejected,kept.
std::string qc_csv(const QcReport& qc);

}  // namespace ccan
