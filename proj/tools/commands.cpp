#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include "smamba/ablation.hpp"
#include "smamba/checkpoint.hpp"
#include "smamba/cost.hpp"
#include "smamba/error.hpp"
#include "smamba/render.hpp"
#include "smamba/serialize.hpp"

namespace smamba::cli {

namespace fs = std::filesystem;

namespace {

fs::path prepare_dir(const std::string& out) {
  if (out.empty()) throw ConfigError("--out is required");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create " + out + ": " + ec.message());
  return fs::path(out);
}

ModelConfig model_config(const ModelArgs& m, std::size_t bands, std::size_t classes) {
  ModelConfig cfg;
  cfg.bands = bands;
  cfg.classes = classes;
  cfg.variant = parse_variant(m.variant);
  cfg.pieces = m.pieces;
  cfg.state = m.state;
  cfg.expand = m.expand;
  cfg.patch = m.patch;
  cfg.depth = m.depth;
  cfg.mamba = !m.no_mamba;
  cfg.validate();
  return cfg;
}

struct Scene {
  data::HsiCube cube;
  data::LabelMap labels;
  data::Split split;
};

Scene load_scene(const std::string& cube_path, const std::string& labels_path, const std::string& split_path) {
  Scene s;
  s.cube = data::load_cube(cube_path);
  s.labels = data::load_labels(labels_path);
  if (s.labels.height != s.cube.height || s.labels.width != s.cube.width) {
    throw DimensionError("labels " + std::to_string(s.labels.height) + "x" + std::to_string(s.labels.width) +
                         " do not match cube " + std::to_string(s.cube.height) + "x" +
                         std::to_string(s.cube.width));
  }
  if (split_path.empty()) {
    s.split.train = s.labels;
    s.split.test = s.labels;
  } else {
    s.split = split_from_json(read_json_file(split_path));
    if (s.split.train.height != s.cube.height || s.split.train.width != s.cube.width) {
      throw DimensionError("split does not match cube size");
    }
  }
  return s;
}

}  // namespace

int run_synth(const SynthArgs& a) {
  const fs::path dir = prepare_dir(a.out);
  const auto scene = data::synth_scene(a.synth);
  data::save_cube(dir / "cube.spmc", scene.cube);
  data::save_labels(dir / "labels.spml", scene.labels);
  write_json_file(dir / "synth_config.json",
                  {{"command", "synth"},
                   {"h", a.synth.height},
                   {"w", a.synth.width},
                   {"l", a.synth.bands},
                   {"k", a.synth.classes},
                   {"noise", a.synth.noise_sigma},
                   {"jitter", a.synth.illumination_jitter},
                   {"seed", a.synth.seed},
                   {"out", a.out}});
  std::cout << "wrote " << (dir / "cube.spmc").string() << " and " << (dir / "labels.spml").string() << '\n';
  return 0;
}

int run_split(const SplitArgs& a) {
  const auto cube = data::load_cube(a.cube);
  const auto labels = data::load_labels(a.labels);
  const fs::path dir = prepare_dir(a.out);
  const auto segments = data::slic_segment(cube, a.spec);
  const auto split = data::make_split(labels, segments, a.spec);
  write_json_file(dir / "split.json", split_to_json(split, a.spec));
  json cfg = {{"command", "split"}, {"cube", a.cube}, {"labels", a.labels}, {"out", a.out},
              {"split", to_json(a.spec)}};
  cfg["split"]["superpixels_resolved"] = a.spec.resolved_superpixels(cube.height, cube.width);
  cfg["segments"] = segments.count;
  write_json_file(dir / "split_config.json", cfg);

  const auto counts = data::split_counts(split);
  std::size_t train_total = 0, test_total = 0;
  for (std::size_t k = 1; k < counts.size(); ++k) {
    if (counts[k].first + counts[k].second == 0) continue;
    std::cout << "class " << k << ": train " << counts[k].first << " test " << counts[k].second << '\n';
    train_total += counts[k].first;
    test_total += counts[k].second;
  }
  std::cout << "total: train " << train_total << " test " << test_total << " (" << segments.count
            << " superpixels)\n";
  return 0;
}

int run_train(const TrainArgs& a) {
  const Scene s = load_scene(a.cube, a.labels, a.split);
  const fs::path dir = prepare_dir(a.out);
  const ModelConfig cfg = model_config(a.model, s.cube.bands, s.labels.max_class());
  a.train.validate();
  std::cout << "piece_len " << cfg.piece_len() << " (L=" << cfg.bands << ", R=" << cfg.pieces << ")\n";

  write_json_file(dir / "train_config.json", {{"command", "train"},
                                              {"cube", a.cube},
                                              {"labels", a.labels},
                                              {"split", a.split},
                                              {"out", a.out},
                                              {"model", to_json(cfg)},
                                              {"train", to_json(a.train)}});
  const auto result = train(cfg, s.cube, s.split.train, a.train);
  save_checkpoint(dir / "weights.spmw", cfg, result.weights);

  std::ofstream csv(dir / "loss.csv", std::ios::trunc);
  if (!csv) throw IoError("cannot write loss.csv");
  csv << "epoch,loss,lr\n";
  csv.precision(17);
  for (const auto& e : result.log) csv << e.epoch << ',' << e.loss << ',' << e.lr << '\n';
  std::cout << "final loss " << result.log.back().loss << " after " << result.log.size() << " epochs\n";
  return 0;
}

int run_eval(const EvalArgs& a) {
  const Scene s = load_scene(a.cube, a.labels, a.split);
  const Checkpoint ck = load_checkpoint(a.weights);
  if (ck.config.bands != s.cube.bands) {
    throw ContractError("checkpoint expects " + std::to_string(ck.config.bands) + " bands, cube has " +
                        std::to_string(s.cube.bands));
  }
  if (s.labels.max_class() > ck.config.classes) {
    throw ContractError("labels reach class " + std::to_string(s.labels.max_class()) + ", checkpoint has " +
                        std::to_string(ck.config.classes) + " classes");
  }
  std::uint64_t seed = 0;
  const fs::path train_cfg = fs::path(a.weights).parent_path() / "train_config.json";
  if (fs::exists(train_cfg)) seed = read_json_file(train_cfg).at("train").value("seed", std::uint64_t{0});

  const Metrics m = evaluate(ck.config, ck.weights, s.cube, s.split.test, a.threads);
  for (auto k : m.absent_classes) {
    std::cerr << "warning: class " << (k + 1) << " absent from the test set; excluded from AA\n";
  }
  const json out = metrics_json(m, ck.config, count_params(ck.weights), count_macs(ck.config), seed);
  std::cout << out.dump(2) << '\n';
  if (!a.metrics_out.empty()) write_json_file(a.metrics_out, out);
  if (!a.map_out.empty()) {
    const auto classes = predict_scene(ck.config, ck.weights, s.cube, a.threads);
    write_class_map_ppm(a.map_out, s.cube.height, s.cube.width, classes);
  }
  return 0;
}

int run_cost(const CostArgs& a) {
  ModelConfig cfg;
  if (!a.config.empty()) {
    json j = read_json_file(a.config);
    // Accept either a bare model config or a resolved train config.
    if (j.contains("model")) j = j["model"];
    cfg = model_config_from_json(j);
  } else {
    if (a.bands == 0 || a.classes == 0) throw ConfigError("cost: give --config or both --bands and --classes");
    cfg = model_config(a.model, a.bands, a.classes);
  }
  std::cout << to_json(cost_report(cfg, kCostBatch), cfg).dump(2) << '\n';
  return 0;
}

int run_ablate(const AblateArgs& a) {
  const Scene s = load_scene(a.cube, a.labels, a.split);
  const fs::path dir = prepare_dir(a.out);
  const ModelConfig base = model_config(a.model, s.cube.bands, s.labels.max_class());
  AblationGrid grid;
  if (a.grid == "pieces") {
    grid.modules = false;
  } else if (a.grid == "modules") {
    grid.pieces_sweep = false;
  } else if (a.grid != "all") {
    throw ConfigError("--grid must be all, pieces or modules");
  }
  write_json_file(dir / "ablate_config.json", {{"command", "ablate"},
                                               {"cube", a.cube},
                                               {"labels", a.labels},
                                               {"split", a.split},
                                               {"grid", a.grid},
                                               {"out", a.out},
                                               {"model", to_json(base)},
                                               {"train", to_json(a.train)}});
  const auto cells = ablate(s.cube, s.split.train, s.split.test, base, a.train, grid, a.threads,
                            [](const AblationCell& c) {
                              std::cerr << c.section << " R=" << c.pieces << " gssm=" << c.gssm
                                        << " mamba=" << c.mamba << " OA=" << c.oa << '\n';
                            });
  const std::string table = ablation_table(cells);
  write_json_file(dir / "ablation.json", {{"cells", to_json(cells)},
                                          {"batch", kCostBatch},
                                          {"mac_convention", kMacConvention}});
  std::ofstream(dir / "ablation.txt", std::ios::trunc) << table;
  std::cout << table;
  return 0;
}

}  // namespace smamba::cli
