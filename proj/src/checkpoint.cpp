#include "smamba/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "smamba/error.hpp"
#include "smamba/serialize.hpp"

namespace smamba {

namespace {

constexpr char kMagic[] = "SPMW1";
constexpr std::size_t kMagicLen = 5;

template <typename T>
T to_le(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg, const ModelWeights& w) {
  check_weights(cfg, w);
  json tensors = json::array();
  std::size_t offset = 0;
  for (const auto& [name, t] : w.parameters()) {
    tensors.push_back({{"name", name}, {"shape", t->shape()}, {"offset", offset}});
    offset += t->numel() * sizeof(double);
  }
  const std::string manifest = json{{"config", to_json(cfg)}, {"tensors", tensors}}.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kMagic, kMagicLen);
  const auto len = to_le(static_cast<std::uint64_t>(manifest.size()));
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
  for (const auto& [name, t] : w.parameters()) {
    for (double v : t->data()) {
      const double le = to_le(v);
      out.write(reinterpret_cast<const char*>(&le), sizeof le);
    }
  }
  if (!out) throw IoError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < kMagicLen + 8 || bytes.compare(0, kMagicLen, kMagic) != 0) {
    throw FormatError(path.string() + ": bad magic at byte 0 (expected SPMW1)");
  }
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + kMagicLen, sizeof len);
  len = to_le(len);
  const std::size_t data_start = kMagicLen + 8 + len;
  if (data_start > bytes.size()) {
    throw FormatError(path.string() + ": manifest of " + std::to_string(len) +
                      " bytes overruns file at byte " + std::to_string(kMagicLen + 8));
  }
  json manifest;
  try {
    manifest = json::parse(bytes.substr(kMagicLen + 8, len));
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": malformed manifest at byte " +
                      std::to_string(kMagicLen + 8 + e.byte) + ": " + e.what());
  }

  Checkpoint ck;
  ck.config = model_config_from_json(manifest.at("config"));
  ck.weights = init_weights(ck.config, 0);
  std::map<std::string, Tensor*> slots;
  for (auto& p : ck.weights.parameters()) slots[p.name] = p.tensor;

  const auto& entries = manifest.at("tensors");
  if (entries.size() != slots.size()) {
    throw ContractError(path.string() + ": checkpoint holds " + std::to_string(entries.size()) +
                        " tensors, config expects " + std::to_string(slots.size()));
  }
  for (const auto& e : entries) {
    const auto name = e.at("name").get<std::string>();
    auto it = slots.find(name);
    if (it == slots.end()) throw ContractError(path.string() + ": unexpected tensor " + name);
    const auto shape = e.at("shape").get<Shape>();
    if (shape != it->second->shape()) {
      throw ContractError(path.string() + ": tensor " + name + shape_str(shape) +
                          " does not match config shape " + shape_str(it->second->shape()));
    }
    const auto offset = e.at("offset").get<std::size_t>();
    const std::size_t n = shape_numel(shape);
    if (data_start + offset + n * sizeof(double) > bytes.size()) {
      throw FormatError(path.string() + ": tensor " + name + " truncated at byte " +
                        std::to_string(data_start + offset));
    }
    std::vector<double> values(n);
    std::memcpy(values.data(), bytes.data() + data_start + offset, n * sizeof(double));
    for (auto& v : values) v = to_le(v);
    *it->second = Tensor(shape, std::move(values), true);
  }
  return ck;
}

}  // namespace smamba
