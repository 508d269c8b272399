#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "smamba/data.hpp"

namespace smamba::data {

struct SplitSpec {
  std::size_t budget = 20;       // training pixels per class
  std::size_t superpixels = 0;   // 0 selects H*W/64
  double compactness = 10.0;     // m
  std::uint64_t seed = 0;
  std::size_t slic_iterations = 10;

  std::size_t resolved_superpixels(std::size_t height, std::size_t width) const;
};

struct Segmentation {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint32_t> ids;  // contiguous 0..count-1, raster-ordered
  std::size_t count = 0;
};

// SLIC over full normalized spectra: seeds on a staggered grid, moved to the
// lowest-gradient pixel of their 3x3 neighbourhood, k-means iterations in
// 2S x 2S windows under D = sqrt(d_spec^2 + (d_xy / S)^2 m^2), then orphan
// fragments are merged into their largest 4-neighbour segment.
Segmentation slic_segment(const HsiCube& cube, const SplitSpec& spec);

struct Split {
  LabelMap train;
  LabelMap test;
};

// Class-balanced split: homogeneous superpixels of each class are drawn in a
// seeded random order until the class budget is met; the segment that
// overshoots is subsampled to the exact budget. Everything else is test.
Split make_split(const LabelMap& labels, const Segmentation& segments, const SplitSpec& spec);

// Per-class train and test counts, index = class id (entry 0 unused).
std::vector<std::pair<std::size_t, std::size_t>> split_counts(const Split& split);

}  // namespace smamba::data
