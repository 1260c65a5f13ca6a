#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "amenable/common.hpp"
#include "amenable/nn/tensor.hpp"

namespace amenable::synth {

enum class ArtefactKind { kNone, kGaussianNoise, kStripe, kBlur, kChannelMisalign };
enum class HardKind { kNone, kLowContrast, kTinyTarget };

std::string to_string(ArtefactKind kind);
std::string to_string(HardKind kind);
ArtefactKind artefact_kind_from_string(const std::string& s);
HardKind hard_kind_from_string(const std::string& s);

/// H x W x C raster, channels interleaved, row-major.
struct Raster {
  std::size_t height = 0, width = 0, channels = 1;
  std::vector<double> data;

  Raster() = default;
  Raster(std::size_t h, std::size_t w, std::size_t c, double fill = 0.0)
      : height(h), width(w), channels(c), data(h * w * c, fill) {}
  double& at(std::size_t y, std::size_t x, std::size_t c = 0) { return data[(y * width + x) * channels + c]; }
  double at(std::size_t y, std::size_t x, std::size_t c = 0) const { return data[(y * width + x) * channels + c]; }
  friend bool operator==(const Raster&, const Raster&) = default;
};

/// Binary H x W mask stored as 0.0 / 1.0.
using Mask = std::vector<double>;

/// Half-open pixel box [y0, y1) x [x0, x1).
struct Region {
  std::size_t y0 = 0, x0 = 0, y1 = 0, x1 = 0;
  bool contains(std::size_t y, std::size_t x) const { return y >= y0 && y < y1 && x >= x0 && x < x1; }
  friend bool operator==(const Region&, const Region&) = default;
};

struct ImageSample {
  std::size_t id = 0;
  Raster raster;
  /// Segmentation label (clean geometry). The classification label is
  /// target presence, i.e. whether the mask is nonempty.
  Mask mask;
  bool target_present = false;
  /// Bounding box of the target (or of where it would be when absent).
  Region roi;
  bool artefact_flag = false;
  ArtefactKind artefact_kind = ArtefactKind::kNone;
  bool artefact_in_roi = false;
  bool hard_flag = false;
  HardKind hard_kind = HardKind::kNone;

  int class_label() const { return target_present ? 1 : 0; }
  friend bool operator==(const ImageSample&, const ImageSample&) = default;
};

/// Full-severity magnitude of each artefact kind.
struct CorruptionStrength {
  double noise_sigma = 0.35;
  double stripe_amplitude = 0.4;
  std::size_t blur_radius = 2;
  double misalign_pixels = 4.0;
  friend bool operator==(const CorruptionStrength&, const CorruptionStrength&) = default;
};

struct GeneratorConfig {
  std::size_t train = 512, validation = 128, holdout = 256;
  std::size_t height = 32, width = 32, channels = 1;
  /// Fraction of samples containing the target disc.
  double target_rate = 1.0;
  /// Disc radius as a fraction of min(height, width).
  double radius_min = 0.12, radius_max = 0.22;
  double contrast_min = 0.35, contrast_max = 0.6;
  double background_min = 0.15, background_max = 0.3;
  double texture_amplitude = 0.04;
  double pixel_noise = 0.02;
  double artefact_rate = 0.3;
  double artefact_in_roi_rate = 0.5;  // among artefact samples
  /// Relative weights of noise, stripe, blur, channel_misalign.
  std::vector<double> artefact_kind_weights{0.4, 0.3, 0.15, 0.15};
  double artefact_severity_min = 0.7, artefact_severity_max = 1.0;
  CorruptionStrength strength;
  double hard_rate = 0.2;             // among target-present samples
  double low_contrast_share = 0.5;    // remainder are tiny targets
  double hard_severity_min = 0.85, hard_severity_max = 0.95;
  /// Minimum training-set size; callers set it to 8 x batch size.
  std::size_t min_train = 8;
  std::uint64_t seed = 0;

  /// Throws ConfigError for out-of-range values or rates that leave one of
  /// the four artefact x hard quadrants empty while others are populated.
  void validate() const;
  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

struct SplitDataset {
  GeneratorConfig config;
  std::vector<ImageSample> train, validation, holdout;
  friend bool operator==(const SplitDataset&, const SplitDataset&) = default;
};

SplitDataset generate(const GeneratorConfig& cfg);

/// Applies an artefact inside `roi` (in_roi) or strictly outside it. Values
/// are clamped to [0,1]; severity must lie in (0,1].
Raster corrupt(const Raster& raster, ArtefactKind kind, const Region& roi, bool in_roi, double severity, Rng& rng,
               const CorruptionStrength& strength = {});

struct HardResult {
  Raster raster;
  Mask mask;
};

/// low_contrast pulls the target's mean intensity toward the local
/// background by `severity`; tiny_target shrinks the target to the (at most)
/// four pixels nearest its centroid and updates the mask. Severity 0 is a
/// no-op. Throws Error if the mask is empty.
HardResult make_hard(const Raster& raster, const Mask& mask, HardKind kind, double severity, Rng& rng);

/// Mean target intensity minus mean of the background ring (ROI box grown by
/// two pixels, target excluded), channel 0.
double target_contrast(const Raster& raster, const Mask& mask);

/// Batch tensor N x C x H x W of the given samples.
nn::Tensor to_tensor(const std::vector<ImageSample>& samples);
/// N x 1 x H x W mask tensor.
nn::Tensor mask_tensor(const std::vector<ImageSample>& samples);
/// N x 1 class-id tensor (target presence).
nn::Tensor class_tensor(const std::vector<ImageSample>& samples);

inline constexpr const char* kDatasetVersion = "data-v1";

/// Directory with manifest.json, samples.bin and labels.bin (little-endian
/// float32, row-major, samples concatenated in manifest order).
void save_dataset(const std::filesystem::path& dir, const SplitDataset& data);
SplitDataset load_dataset(const std::filesystem::path& dir);

/// FNV-1a over samples.bin and labels.bin contents, hex.
std::string dataset_checksum(const std::filesystem::path& dir);

}  // namespace amenable::synth
