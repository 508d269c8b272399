#include "smamba/split.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include "smamba/error.hpp"

namespace smamba::data {

std::size_t SplitSpec::resolved_superpixels(std::size_t height, std::size_t width) const {
  if (superpixels != 0) return superpixels;
  return std::max<std::size_t>(1, height * width / 64);
}

namespace {

constexpr long kNone = -1;

// Squared spectral gradient with central differences, one-sided at the border.
std::vector<double> spectral_gradient(const HsiCube& cube) {
  const std::size_t h = cube.height, w = cube.width, l = cube.bands;
  std::vector<double> grad(h * w, 0.0);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      double g = 0.0;
      const std::size_t c0 = c > 0 ? c - 1 : c, c1 = c + 1 < w ? c + 1 : c;
      const std::size_t r0 = r > 0 ? r - 1 : r, r1 = r + 1 < h ? r + 1 : r;
      if (c1 > c0) {
        const double span = static_cast<double>(c1 - c0);
        for (std::size_t b = 0; b < l; ++b) {
          const double d = (cube.at(r, c1, b) - cube.at(r, c0, b)) / span;
          g += d * d;
        }
      }
      if (r1 > r0) {
        const double span = static_cast<double>(r1 - r0);
        for (std::size_t b = 0; b < l; ++b) {
          const double d = (cube.at(r1, c, b) - cube.at(r0, c, b)) / span;
          g += d * d;
        }
      }
      grad[r * w + c] = g;
    }
  }
  return grad;
}

struct Center {
  std::vector<double> spectrum;
  double row = 0.0;
  double col = 0.0;
};

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  // Attaches a's root under b's root.
  void attach(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }

 private:
  std::vector<std::size_t> parent_;
};

struct Components {
  std::vector<std::size_t> comp;  // per pixel
  std::vector<std::size_t> size;
  std::vector<long> label;
};

Components label_components(const std::vector<long>& labels, std::size_t h, std::size_t w) {
  Components out;
  constexpr std::size_t kUnset = std::numeric_limits<std::size_t>::max();
  out.comp.assign(h * w, kUnset);
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < h * w; ++start) {
    if (out.comp[start] != kUnset) continue;
    const std::size_t id = out.size.size();
    out.size.push_back(0);
    out.label.push_back(labels[start]);
    out.comp[start] = id;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      ++out.size[id];
      const std::size_t r = p / w, c = p % w;
      const std::size_t nbrs[4] = {r > 0 ? p - w : kUnset, r + 1 < h ? p + w : kUnset,
                                   c > 0 ? p - 1 : kUnset, c + 1 < w ? p + 1 : kUnset};
      for (std::size_t q : nbrs) {
        if (q == kUnset || out.comp[q] != kUnset || labels[q] != labels[start]) continue;
        out.comp[q] = id;
        stack.push_back(q);
      }
    }
  }
  return out;
}

// Merges fragments (non-largest pieces of a label, pieces below min_size, and
// unassigned pixels) into their largest adjacent component until none remain.
void enforce_connectivity(std::vector<long>& labels, std::size_t h, std::size_t w, std::size_t min_size) {
  for (;;) {
    Components cc = label_components(labels, h, w);
    const std::size_t n = cc.size.size();
    if (n <= 1) return;

    std::map<long, std::size_t> largest;  // label -> component with the most pixels
    for (std::size_t i = 0; i < n; ++i) {
      auto it = largest.find(cc.label[i]);
      if (it == largest.end() || cc.size[i] > cc.size[it->second]) largest[cc.label[i]] = i;
    }
    std::vector<bool> orphan(n, false);
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
      orphan[i] = cc.label[i] == kNone || largest[cc.label[i]] != i || cc.size[i] < min_size;
      any = any || orphan[i];
    }
    if (!any) return;

    std::vector<std::set<std::size_t>> adjacent(n);
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        const std::size_t a = cc.comp[r * w + c];
        if (c + 1 < w && cc.comp[r * w + c + 1] != a) {
          adjacent[a].insert(cc.comp[r * w + c + 1]);
          adjacent[cc.comp[r * w + c + 1]].insert(a);
        }
        if (r + 1 < h && cc.comp[(r + 1) * w + c] != a) {
          adjacent[a].insert(cc.comp[(r + 1) * w + c]);
          adjacent[cc.comp[(r + 1) * w + c]].insert(a);
        }
      }
    }

    DisjointSet sets(n);
    std::vector<std::size_t> merged_size = cc.size;
    for (std::size_t i = 0; i < n; ++i) {
      if (!orphan[i]) continue;
      const std::size_t self = sets.find(i);
      std::size_t best = n;
      for (std::size_t j : adjacent[i]) {
        const std::size_t root = sets.find(j);
        if (root == self) continue;
        if (best == n || merged_size[root] > merged_size[best] ||
            (merged_size[root] == merged_size[best] && root < best)) {
          best = root;
        }
      }
      if (best == n) continue;
      sets.attach(self, best);
      merged_size[best] += merged_size[self];
    }
    for (std::size_t p = 0; p < h * w; ++p) labels[p] = cc.label[sets.find(cc.comp[p])];
  }
}

}  // namespace

Segmentation slic_segment(const HsiCube& raw, const SplitSpec& spec) {
  raw.validate();
  const std::size_t h = raw.height, w = raw.width, l = raw.bands;
  const std::size_t count = spec.resolved_superpixels(h, w);
  if (count > h * w) {
    throw ConfigError("slic: superpixel count " + std::to_string(count) + " exceeds " +
                      std::to_string(h * w) + " pixels");
  }
  if (!(spec.compactness > 0.0)) throw ConfigError("slic: compactness must be positive");

  const HsiCube cube = normalize(raw);
  const double step = std::sqrt(static_cast<double>(h * w) / static_cast<double>(count));
  const auto ny = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(h / step)), 1, h);
  const auto nx = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(w / step)), 1, w);
  const double sy = static_cast<double>(h) / static_cast<double>(ny);
  const double sx = static_cast<double>(w) / static_cast<double>(nx);

  // Staggered grid: odd rows shifted a quarter cell right, even rows left.
  std::vector<std::size_t> seeds;
  for (std::size_t i = 0; i < ny; ++i) {
    const double shift = (i % 2 == 1) ? 0.25 : -0.25;
    const auto r = static_cast<std::size_t>(std::floor((static_cast<double>(i) + 0.5) * sy));
    for (std::size_t j = 0; j < nx; ++j) {
      const auto c = static_cast<std::size_t>(std::floor((static_cast<double>(j) + 0.5 + shift) * sx));
      seeds.push_back(std::min(r, h - 1) * w + std::min(c, w - 1));
    }
  }

  const auto grad = spectral_gradient(cube);
  std::set<std::size_t> occupied(seeds.begin(), seeds.end());
  for (auto& s : seeds) {
    const long r = static_cast<long>(s / w), c = static_cast<long>(s % w);
    std::size_t best = s;
    for (long dr = -1; dr <= 1; ++dr) {
      for (long dc = -1; dc <= 1; ++dc) {
        const long rr = r + dr, cc = c + dc;
        if (rr < 0 || cc < 0 || rr >= static_cast<long>(h) || cc >= static_cast<long>(w)) continue;
        const std::size_t q = static_cast<std::size_t>(rr) * w + static_cast<std::size_t>(cc);
        if (grad[q] < grad[best] && !occupied.count(q)) best = q;
      }
    }
    if (best != s) {
      occupied.erase(s);
      occupied.insert(best);
      s = best;
    }
  }

  std::vector<Center> centers;
  centers.reserve(seeds.size());
  for (std::size_t s : seeds) {
    centers.push_back({cube.spectrum(s / w, s % w), static_cast<double>(s / w), static_cast<double>(s % w)});
  }

  const double m2 = spec.compactness * spec.compactness;
  const double inv_s2 = 1.0 / (step * step);
  const long radius = static_cast<long>(std::ceil(step));
  std::vector<long> labels(h * w, kNone);
  std::vector<double> dist(h * w);
  for (std::size_t iter = 0; iter < spec.slic_iterations; ++iter) {
    std::fill(labels.begin(), labels.end(), kNone);
    std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const Center& ck = centers[k];
      const long cr = std::lround(ck.row), cc = std::lround(ck.col);
      const long r_lo = std::max(0L, cr - radius), r_hi = std::min(static_cast<long>(h) - 1, cr + radius);
      const long c_lo = std::max(0L, cc - radius), c_hi = std::min(static_cast<long>(w) - 1, cc + radius);
      for (long r = r_lo; r <= r_hi; ++r) {
        for (long c = c_lo; c <= c_hi; ++c) {
          const std::size_t p = static_cast<std::size_t>(r) * w + static_cast<std::size_t>(c);
          const float* px = &cube.reflectance[p * l];
          double ds = 0.0;
          for (std::size_t b = 0; b < l; ++b) {
            const double d = px[b] - ck.spectrum[b];
            ds += d * d;
          }
          const double dr = static_cast<double>(r) - ck.row, dc = static_cast<double>(c) - ck.col;
          const double d2 = ds + (dr * dr + dc * dc) * inv_s2 * m2;
          if (d2 < dist[p]) {
            dist[p] = d2;
            labels[p] = static_cast<long>(k);
          }
        }
      }
    }
    std::vector<Center> sums(centers.size(), Center{std::vector<double>(l, 0.0), 0.0, 0.0});
    std::vector<std::size_t> members(centers.size(), 0);
    for (std::size_t p = 0; p < h * w; ++p) {
      if (labels[p] == kNone) continue;
      const auto k = static_cast<std::size_t>(labels[p]);
      ++members[k];
      sums[k].row += static_cast<double>(p / w);
      sums[k].col += static_cast<double>(p % w);
      for (std::size_t b = 0; b < l; ++b) sums[k].spectrum[b] += cube.reflectance[p * l + b];
    }
    for (std::size_t k = 0; k < centers.size(); ++k) {
      if (members[k] == 0) continue;
      const double inv = 1.0 / static_cast<double>(members[k]);
      centers[k].row = sums[k].row * inv;
      centers[k].col = sums[k].col * inv;
      for (std::size_t b = 0; b < l; ++b) centers[k].spectrum[b] = sums[k].spectrum[b] * inv;
    }
  }

  const auto min_size = std::max<std::size_t>(1, static_cast<std::size_t>(step * step / 4.0));
  enforce_connectivity(labels, h, w, min_size);

  Segmentation seg;
  seg.height = h;
  seg.width = w;
  seg.ids.resize(h * w);
  std::map<long, std::uint32_t> remap;
  for (std::size_t p = 0; p < h * w; ++p) {
    auto [it, inserted] = remap.try_emplace(labels[p], static_cast<std::uint32_t>(remap.size()));
    seg.ids[p] = it->second;
  }
  seg.count = remap.size();
  return seg;
}

Split make_split(const LabelMap& labels, const Segmentation& segments, const SplitSpec& spec) {
  if (segments.height != labels.height || segments.width != labels.width ||
      segments.ids.size() != labels.labels.size()) {
    throw DimensionError("split: segmentation and labels differ in size");
  }
  if (spec.budget == 0) throw ConfigError("split: budget must be >= 1");

  const std::size_t n = labels.labels.size();
  const std::size_t k_max = labels.max_class();
  std::vector<std::size_t> class_count(k_max + 1, 0);
  for (auto v : labels.labels) ++class_count[v];
  for (std::size_t k = 1; k <= k_max; ++k) {
    if (class_count[k] > 0 && class_count[k] < spec.budget) {
      throw SplitError("class " + std::to_string(k) + " has " + std::to_string(class_count[k]) +
                       " labeled pixels, fewer than the budget of " + std::to_string(spec.budget));
    }
  }

  // Labeled pixels per segment, raster order; class 0 marks a mixed segment.
  std::size_t seg_count = 0;
  for (auto id : segments.ids) seg_count = std::max<std::size_t>(seg_count, id + 1);
  std::vector<std::vector<std::size_t>> seg_pixels(seg_count);
  std::vector<long> seg_class(seg_count, kNone);
  for (std::size_t p = 0; p < n; ++p) {
    const auto v = labels.labels[p];
    if (v == 0) continue;
    const auto s = segments.ids[p];
    seg_pixels[s].push_back(p);
    if (seg_class[s] == kNone) {
      seg_class[s] = v;
    } else if (seg_class[s] != v) {
      seg_class[s] = 0;
    }
  }

  std::mt19937_64 rng(spec.seed);
  std::vector<bool> in_train(n, false);
  for (std::size_t k = 1; k <= k_max; ++k) {
    if (class_count[k] == 0) continue;
    std::vector<std::size_t> candidates;
    for (std::size_t s = 0; s < seg_count; ++s) {
      if (seg_class[s] == static_cast<long>(k)) candidates.push_back(s);
    }
    std::shuffle(candidates.begin(), candidates.end(), rng);
    std::size_t taken = 0;
    auto take_from = [&](std::vector<std::size_t> pool) {
      const std::size_t need = spec.budget - taken;
      if (pool.size() > need) {
        std::shuffle(pool.begin(), pool.end(), rng);
        pool.resize(need);
      }
      for (auto p : pool) in_train[p] = true;
      taken += pool.size();
    };
    for (std::size_t s : candidates) {
      if (taken == spec.budget) break;
      take_from(seg_pixels[s]);
    }
    if (taken < spec.budget) {
      // Not enough homogeneous segments: top up from the class's other pixels.
      std::vector<std::size_t> rest;
      for (std::size_t p = 0; p < n; ++p) {
        if (labels.labels[p] == k && !in_train[p]) rest.push_back(p);
      }
      take_from(std::move(rest));
    }
  }

  Split out;
  out.train = LabelMap{labels.height, labels.width, std::vector<std::uint16_t>(n, 0)};
  out.test = out.train;
  for (std::size_t p = 0; p < n; ++p) {
    if (labels.labels[p] == 0) continue;
    (in_train[p] ? out.train : out.test).labels[p] = labels.labels[p];
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> split_counts(const Split& split) {
  const std::size_t k = std::max(split.train.max_class(), split.test.max_class());
  std::vector<std::pair<std::size_t, std::size_t>> counts(k + 1, {0, 0});
  for (auto v : split.train.labels) {
    if (v) ++counts[v].first;
  }
  for (auto v : split.test.labels) {
    if (v) ++counts[v].second;
  }
  return counts;
}

}  // namespace smamba::data
