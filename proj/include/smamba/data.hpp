#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "smamba/tensor.hpp"

namespace smamba::data {

// H x W x L reflectance cube stored band-last in 32-bit floats.
struct HsiCube {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t bands = 0;
  std::vector<float> reflectance;
  std::vector<double> band_wavelengths;  // optional, nm

  std::size_t pixels() const { return height * width; }
  float at(std::size_t row, std::size_t col, std::size_t band) const {
    return reflectance[(row * width + col) * bands + band];
  }
  std::vector<double> spectrum(std::size_t row, std::size_t col) const;
  void validate() const;
};

// Per-pixel class labels, 0 = unlabeled, classes 1..K.
struct LabelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint16_t> labels;

  std::uint16_t at(std::size_t row, std::size_t col) const { return labels[row * width + col]; }
  std::uint16_t max_class() const;
  std::size_t labeled() const;
};

void save_cube(const std::filesystem::path& path, const HsiCube& cube);
HsiCube load_cube(const std::filesystem::path& path);
void save_labels(const std::filesystem::path& path, const LabelMap& labels);
LabelMap load_labels(const std::filesystem::path& path);

// Per-band min-max scaling to [0,1]; constant bands become 0.
HsiCube normalize(const HsiCube& cube);

// Mirror index for a coordinate that may fall outside [0, size).
std::size_t reflect_index(long i, std::size_t size);

// P x P window centred on (row, col) as a band-major [L, P, P] tensor; positions
// outside the image are mirrored back across the border.
Tensor extract_patch(const HsiCube& cube, std::size_t row, std::size_t col, std::size_t patch);

struct SynthOptions {
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t bands = 48;
  std::size_t classes = 4;
  double noise_sigma = 0.05;
  double illumination_jitter = 0.2;  // scale drawn from [1 - j, 1 + j]
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kMaxSynthClasses = 16;
inline constexpr double kMinPrototypeGap = 0.2;

struct SynthScene {
  HsiCube cube;
  LabelMap labels;
  std::vector<std::vector<double>> prototypes;  // [K][L]
};

SynthScene synth_scene(const SynthOptions& opts);

}  // namespace smamba::data
