#include "smamba/serialize.hpp"

#include <fstream>
#include <map>

#include "smamba/error.hpp"

namespace smamba {

json to_json(const ModelConfig& cfg) {
  return {{"bands", cfg.bands},   {"pieces", cfg.pieces},
          {"piece_len", cfg.piece_len()}, {"state", cfg.state},
          {"expand", cfg.expand}, {"patch", cfg.patch},
          {"classes", cfg.classes}, {"depth", cfg.depth},
          {"variant", variant_name(cfg.variant)}, {"mamba", cfg.mamba}};
}

ModelConfig model_config_from_json(const json& j) {
  try {
    ModelConfig cfg;
    cfg.bands = j.at("bands").get<std::size_t>();
    cfg.pieces = j.value("pieces", cfg.pieces);
    cfg.state = j.value("state", cfg.state);
    cfg.expand = j.value("expand", cfg.expand);
    cfg.patch = j.value("patch", cfg.patch);
    cfg.classes = j.at("classes").get<std::size_t>();
    cfg.depth = j.value("depth", cfg.depth);
    cfg.variant = parse_variant(j.value("variant", std::string("patchwise")));
    cfg.mamba = j.value("mamba", cfg.mamba);
    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
}

json to_json(const TrainConfig& cfg) {
  return {{"lr", cfg.lr0},          {"weight_decay", cfg.weight_decay}, {"epochs", cfg.epochs},
          {"batch", cfg.batch},     {"step_epochs", cfg.step_epochs},   {"gamma", cfg.gamma},
          {"seed", cfg.seed}};
}

TrainConfig train_config_from_json(const json& j) {
  try {
    TrainConfig cfg;
    cfg.lr0 = j.value("lr", cfg.lr0);
    cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.batch = j.value("batch", cfg.batch);
    cfg.step_epochs = j.value("step_epochs", cfg.step_epochs);
    cfg.gamma = j.value("gamma", cfg.gamma);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
}

json to_json(const data::SplitSpec& spec) {
  return {{"budget", spec.budget}, {"superpixels", spec.superpixels},
          {"compactness", spec.compactness}, {"seed", spec.seed},
          {"slic_iterations", spec.slic_iterations}};
}

json to_json(const CostReport& report, const ModelConfig& cfg) {
  json layers = json::array();
  for (const auto& l : report.layers) {
    layers.push_back({{"name", l.name}, {"params", l.params}, {"macs_per_sample", l.macs}});
  }
  return {{"params", report.params}, {"macs", report.macs},     {"batch", report.batch},
          {"convention", kMacConvention}, {"layers", layers}, {"config", to_json(cfg)}};
}

json metrics_json(const Metrics& m, const ModelConfig& cfg, std::uint64_t params, std::uint64_t macs,
                  std::uint64_t seed) {
  json confusion = json::array();
  for (std::size_t i = 0; i < m.confusion.classes(); ++i) {
    json row = json::array();
    for (std::size_t k = 0; k < m.confusion.classes(); ++k) row.push_back(m.confusion.at(i, k));
    confusion.push_back(std::move(row));
  }
  return {{"oa", m.oa},         {"aa", m.aa},         {"kappa", m.kappa},
          {"ca", m.ca},         {"confusion", confusion}, {"params", params},
          {"macs", macs},       {"config", to_json(cfg)}, {"seed", seed}};
}

json to_json(const std::vector<AblationCell>& cells) {
  json out = json::array();
  for (const auto& c : cells) {
    out.push_back({{"section", c.section}, {"gssm", c.gssm},   {"pss", c.pss},
                   {"mamba", c.mamba},     {"pieces", c.pieces}, {"oa", c.oa},
                   {"aa", c.aa},           {"kappa", c.kappa},   {"macs", c.macs},
                   {"params", c.params}});
  }
  return out;
}

json split_to_json(const data::Split& split, const data::SplitSpec& spec) {
  std::map<std::uint16_t, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> classes;
  for (std::size_t p = 0; p < split.train.labels.size(); ++p) {
    if (auto v = split.train.labels[p]) classes[v].first.push_back(p);
    if (auto v = split.test.labels[p]) classes[v].second.push_back(p);
  }
  json cls = json::object();
  for (const auto& [k, lists] : classes) {
    cls[std::to_string(k)] = {{"train", lists.first}, {"test", lists.second}};
  }
  json j = to_json(spec);
  j["height"] = split.train.height;
  j["width"] = split.train.width;
  j["classes"] = std::move(cls);
  return j;
}

data::Split split_from_json(const json& j) {
  try {
    data::Split s;
    const auto h = j.at("height").get<std::size_t>(), w = j.at("width").get<std::size_t>();
    s.train = data::LabelMap{h, w, std::vector<std::uint16_t>(h * w, 0)};
    s.test = s.train;
    for (const auto& [key, lists] : j.at("classes").items()) {
      const auto k = static_cast<std::uint16_t>(std::stoul(key));
      for (auto p : lists.at("train").get<std::vector<std::size_t>>()) {
        if (p >= h * w) throw FormatError("split: pixel index " + std::to_string(p) + " out of range");
        s.train.labels[p] = k;
      }
      for (auto p : lists.at("test").get<std::vector<std::size_t>>()) {
        if (p >= h * w) throw FormatError("split: pixel index " + std::to_string(p) + " out of range");
        if (s.train.labels[p]) throw FormatError("split: pixel " + std::to_string(p) + " in train and test");
        s.test.labels[p] = k;
      }
    }
    return s;
  } catch (const json::exception& e) {
    throw FormatError(std::string("split: ") + e.what());
  }
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace smamba
