#include "smamba/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <string>

#include "json.hpp"
#include "smamba/error.hpp"

namespace smamba::data {

namespace {

using nlohmann::json;

constexpr char kCubeMagic[] = "SPMC1";
constexpr char kLabelMagic[] = "SPML1";
constexpr std::size_t kMagicLen = 5;

template <typename T>
void to_little_endian(std::vector<T>& values) {
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& v : values) {
      unsigned char bytes[sizeof(T)];
      std::memcpy(bytes, &v, sizeof(T));
      std::reverse(bytes, bytes + sizeof(T));
      std::memcpy(&v, bytes, sizeof(T));
    }
  }
}

template <typename T>
void write_container(const std::filesystem::path& path, const char* magic, const json& header,
                     std::vector<T> payload) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const std::string head = header.dump();
  out.write(magic, kMagicLen);
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  out.put('\n');
  to_little_endian(payload);
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(T)));
  if (!out) throw IoError("write failed for " + path.string());
}

struct Container {
  json header;
  std::size_t payload_offset = 0;
  std::size_t payload_bytes = 0;
};

Container read_header(std::ifstream& in, const std::filesystem::path& path, const char* magic) {
  Container c;
  char got[kMagicLen] = {};
  in.read(got, kMagicLen);
  if (in.gcount() != static_cast<std::streamsize>(kMagicLen) || std::memcmp(got, magic, kMagicLen) != 0) {
    throw FormatError(path.string() + ": bad magic at byte 0 (expected " + std::string(magic) + ")");
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw FormatError(path.string() + ": truncated header at byte " + std::to_string(kMagicLen));
  }
  try {
    c.header = json::parse(line);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": malformed header at byte " +
                      std::to_string(kMagicLen + e.byte) + ": " + e.what());
  }
  c.payload_offset = kMagicLen + line.size() + 1;
  const auto total = std::filesystem::file_size(path);
  c.payload_bytes = total > c.payload_offset ? total - c.payload_offset : 0;
  return c;
}

std::size_t header_dim(const json& h, const char* key, const std::filesystem::path& path) {
  if (!h.contains(key) || !h[key].is_number_unsigned() || h[key].get<std::size_t>() == 0) {
    throw FormatError(path.string() + ": header field '" + key + "' must be a positive integer");
  }
  return h[key].get<std::size_t>();
}

template <typename T>
std::vector<T> read_payload(std::ifstream& in, const Container& c, std::size_t expected,
                            const std::filesystem::path& path) {
  const std::size_t found = c.payload_bytes / sizeof(T);
  if (c.payload_bytes % sizeof(T) != 0 || found != expected) {
    throw FormatError(path.string() + ": payload at byte " + std::to_string(c.payload_offset) +
                      " holds " + std::to_string(found) + " values (" +
                      std::to_string(c.payload_bytes) + " bytes), expected " +
                      std::to_string(expected));
  }
  std::vector<T> values(expected);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(expected * sizeof(T)));
  if (in.gcount() != static_cast<std::streamsize>(expected * sizeof(T))) {
    throw FormatError(path.string() + ": truncated payload at byte " +
                      std::to_string(c.payload_offset + static_cast<std::size_t>(in.gcount())));
  }
  to_little_endian(values);
  return values;
}

}  // namespace

std::vector<double> HsiCube::spectrum(std::size_t row, std::size_t col) const {
  const float* p = &reflectance[(row * width + col) * bands];
  return std::vector<double>(p, p + bands);
}

void HsiCube::validate() const {
  if (height == 0 || width == 0 || bands == 0) throw ConfigError("cube: dimensions must be positive");
  if (reflectance.size() != height * width * bands) {
    throw DimensionError("cube: " + std::to_string(reflectance.size()) + " values for " +
                         std::to_string(height) + "x" + std::to_string(width) + "x" +
                         std::to_string(bands));
  }
  for (float v : reflectance) {
    if (!std::isfinite(v)) throw NumericError("cube: non-finite reflectance");
  }
}

std::uint16_t LabelMap::max_class() const {
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
}

std::size_t LabelMap::labeled() const {
  return static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](auto l) { return l != 0; }));
}

void save_cube(const std::filesystem::path& path, const HsiCube& cube) {
  cube.validate();
  json h = {{"h", cube.height}, {"w", cube.width}, {"l", cube.bands}, {"dtype", "f32"}, {"order", "band-last"}};
  if (!cube.band_wavelengths.empty()) h["wavelengths"] = cube.band_wavelengths;
  write_container(path, kCubeMagic, h, cube.reflectance);
}

HsiCube load_cube(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const Container c = read_header(in, path, kCubeMagic);
  HsiCube cube;
  cube.height = header_dim(c.header, "h", path);
  cube.width = header_dim(c.header, "w", path);
  cube.bands = header_dim(c.header, "l", path);
  if (c.header.value("dtype", "f32") != "f32" || c.header.value("order", "band-last") != "band-last") {
    throw FormatError(path.string() + ": unsupported dtype/order in header");
  }
  if (c.header.contains("wavelengths")) {
    cube.band_wavelengths = c.header["wavelengths"].get<std::vector<double>>();
  }
  cube.reflectance = read_payload<float>(in, c, cube.height * cube.width * cube.bands, path);
  for (std::size_t i = 0; i < cube.reflectance.size(); ++i) {
    if (!std::isfinite(cube.reflectance[i])) {
      throw FormatError(path.string() + ": non-finite value at byte " +
                        std::to_string(c.payload_offset + i * sizeof(float)));
    }
  }
  return cube;
}

void save_labels(const std::filesystem::path& path, const LabelMap& labels) {
  if (labels.labels.size() != labels.height * labels.width) {
    throw DimensionError("labels: size does not match " + std::to_string(labels.height) + "x" +
                         std::to_string(labels.width));
  }
  json h = {{"h", labels.height}, {"w", labels.width}, {"dtype", "u16"}};
  write_container(path, kLabelMagic, h, labels.labels);
}

LabelMap load_labels(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const Container c = read_header(in, path, kLabelMagic);
  LabelMap m;
  m.height = header_dim(c.header, "h", path);
  m.width = header_dim(c.header, "w", path);
  if (c.header.value("dtype", "u16") != "u16") throw FormatError(path.string() + ": unsupported dtype");
  m.labels = read_payload<std::uint16_t>(in, c, m.height * m.width, path);
  return m;
}

HsiCube normalize(const HsiCube& cube) {
  HsiCube out = cube;
  const std::size_t n = cube.pixels();
  for (std::size_t b = 0; b < cube.bands; ++b) {
    float lo = cube.reflectance[b], hi = cube.reflectance[b];
    for (std::size_t p = 0; p < n; ++p) {
      lo = std::min(lo, cube.reflectance[p * cube.bands + b]);
      hi = std::max(hi, cube.reflectance[p * cube.bands + b]);
    }
    const double range = static_cast<double>(hi) - static_cast<double>(lo);
    for (std::size_t p = 0; p < n; ++p) {
      float& v = out.reflectance[p * cube.bands + b];
      v = range > 0.0 ? static_cast<float>((static_cast<double>(v) - lo) / range) : 0.0f;
    }
  }
  return out;
}

std::size_t reflect_index(long i, std::size_t size) {
  const long n = static_cast<long>(size);
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return static_cast<std::size_t>(i);
}

Tensor extract_patch(const HsiCube& cube, std::size_t row, std::size_t col, std::size_t patch) {
  if (patch == 0 || patch % 2 == 0) {
    throw ConfigError("extract_patch: patch size must be odd, got " + std::to_string(patch));
  }
  if (row >= cube.height || col >= cube.width) {
    throw IndexError("extract_patch: (" + std::to_string(row) + "," + std::to_string(col) +
                     ") outside " + std::to_string(cube.height) + "x" + std::to_string(cube.width));
  }
  const long half = static_cast<long>(patch / 2);
  std::vector<double> v(cube.bands * patch * patch);
  for (std::size_t i = 0; i < patch; ++i) {
    const std::size_t r = reflect_index(static_cast<long>(row) + static_cast<long>(i) - half, cube.height);
    for (std::size_t j = 0; j < patch; ++j) {
      const std::size_t c = reflect_index(static_cast<long>(col) + static_cast<long>(j) - half, cube.width);
      const float* src = &cube.reflectance[(r * cube.width + c) * cube.bands];
      for (std::size_t b = 0; b < cube.bands; ++b) v[(b * patch + i) * patch + j] = src[b];
    }
  }
  return Tensor({cube.bands, patch, patch}, std::move(v));
}

namespace {

std::vector<double> draw_prototype(std::size_t bands, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(2, 3);
  const double span = static_cast<double>(bands);
  std::uniform_real_distribution<double> center(0.0, span);
  std::uniform_real_distribution<double> width(std::max(1.0, span / 12.0), std::max(1.5, span / 4.0));
  std::uniform_real_distribution<double> amp(0.3, 0.8);

  const int n = count(rng);
  std::vector<double> centers;
  while (static_cast<int>(centers.size()) < n) {
    const double c = center(rng);
    const bool distinct = std::all_of(centers.begin(), centers.end(),
                                      [&](double o) { return std::abs(o - c) >= span / 16.0; });
    if (distinct) centers.push_back(c);
  }
  std::vector<double> p(bands, 0.1);
  for (double c : centers) {
    const double w = width(rng), a = amp(rng);
    for (std::size_t b = 0; b < bands; ++b) {
      const double d = static_cast<double>(b) - c;
      p[b] += a * std::exp(-d * d / (2.0 * w * w));
    }
  }
  return p;
}

double max_gap(const std::vector<double>& a, const std::vector<double>& b) {
  double g = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) g = std::max(g, std::abs(a[i] - b[i]));
  return g;
}

}  // namespace

SynthScene synth_scene(const SynthOptions& opts) {
  if (opts.classes == 0 || opts.classes > kMaxSynthClasses) {
    throw ConfigError("synth: K must be in [1, " + std::to_string(kMaxSynthClasses) + "], got " +
                      std::to_string(opts.classes));
  }
  if (opts.height == 0 || opts.width == 0 || opts.bands == 0) {
    throw ConfigError("synth: H, W, L must be positive");
  }
  if (opts.classes > opts.height * opts.width) throw ConfigError("synth: more classes than pixels");
  if (opts.noise_sigma < 0.0 || opts.illumination_jitter < 0.0 || opts.illumination_jitter >= 1.0) {
    throw ConfigError("synth: noise must be >= 0 and jitter in [0,1)");
  }

  std::mt19937_64 rng(opts.seed);
  SynthScene scene;
  constexpr int kMaxAttempts = 10000;
  for (std::size_t k = 0; k < opts.classes; ++k) {
    int attempts = 0;
    for (;;) {
      auto p = draw_prototype(opts.bands, rng);
      const bool separated = std::all_of(scene.prototypes.begin(), scene.prototypes.end(),
                                         [&](const auto& o) { return max_gap(o, p) >= kMinPrototypeGap; });
      if (separated) {
        scene.prototypes.push_back(std::move(p));
        break;
      }
      if (++attempts == kMaxAttempts) {
        throw ConfigError("synth: could not draw " + std::to_string(opts.classes) +
                          " separated prototypes over " + std::to_string(opts.bands) + " bands");
      }
    }
  }

  // Voronoi sites, spread out by rejection with a shrinking minimum distance.
  const double h = static_cast<double>(opts.height), w = static_cast<double>(opts.width);
  std::uniform_int_distribution<std::size_t> row_dist(0, opts.height - 1), col_dist(0, opts.width - 1);
  std::vector<std::pair<std::size_t, std::size_t>> sites;
  double min_dist = 0.5 * std::sqrt(h * w / static_cast<double>(opts.classes));
  int rejected = 0;
  while (sites.size() < opts.classes) {
    const std::pair<std::size_t, std::size_t> s{row_dist(rng), col_dist(rng)};
    const bool ok = std::all_of(sites.begin(), sites.end(), [&](const auto& o) {
      const double dr = static_cast<double>(o.first) - static_cast<double>(s.first);
      const double dc = static_cast<double>(o.second) - static_cast<double>(s.second);
      return std::sqrt(dr * dr + dc * dc) >= min_dist && o != s;
    });
    if (ok) {
      sites.push_back(s);
    } else if (++rejected % 200 == 0) {
      min_dist *= 0.8;
    }
  }

  HsiCube& cube = scene.cube;
  cube.height = opts.height;
  cube.width = opts.width;
  cube.bands = opts.bands;
  cube.reflectance.resize(opts.height * opts.width * opts.bands);
  LabelMap& labels = scene.labels;
  labels.height = opts.height;
  labels.width = opts.width;
  labels.labels.resize(opts.height * opts.width);

  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> scale_dist(1.0 - opts.illumination_jitter,
                                                    1.0 + opts.illumination_jitter);
  for (std::size_t r = 0; r < opts.height; ++r) {
    for (std::size_t c = 0; c < opts.width; ++c) {
      std::size_t best = 0;
      double best_d = 0.0;
      for (std::size_t k = 0; k < sites.size(); ++k) {
        const double dr = static_cast<double>(sites[k].first) - static_cast<double>(r);
        const double dc = static_cast<double>(sites[k].second) - static_cast<double>(c);
        const double d = dr * dr + dc * dc;
        if (k == 0 || d < best_d) {
          best = k;
          best_d = d;
        }
      }
      labels.labels[r * opts.width + c] = static_cast<std::uint16_t>(best + 1);
      const double scale = opts.illumination_jitter > 0.0 ? scale_dist(rng) : 1.0;
      const auto& proto = scene.prototypes[best];
      float* dst = &cube.reflectance[(r * opts.width + c) * opts.bands];
      for (std::size_t b = 0; b < opts.bands; ++b) {
        const double n = opts.noise_sigma > 0.0 ? opts.noise_sigma * noise(rng) : 0.0;
        dst[b] = static_cast<float>(scale * proto[b] + n);
      }
    }
  }
  return scene;
}

}  // namespace smamba::data
