#include "smamba/ablation.hpp"

#include <cstdio>

#include "smamba/cost.hpp"

namespace smamba {

ModelConfig ablation_config(const ModelConfig& base, bool gssm, bool pss, bool mamba, std::size_t pieces) {
  ModelConfig cfg = base;
  cfg.variant = gssm ? Variant::kPatchwise : Variant::kPixelwise;
  cfg.pieces = pss ? pieces : 1;
  cfg.mamba = mamba;
  return cfg;
}

namespace {

AblationCell run_cell(const std::string& section, const ModelConfig& cfg, bool gssm, bool pss,
                      const data::HsiCube& cube, const data::LabelMap& train_labels,
                      const data::LabelMap& test_labels, const TrainConfig& tcfg, unsigned threads) {
  const auto trained = train(cfg, cube, train_labels, tcfg);
  const Metrics m = evaluate(cfg, trained.weights, cube, test_labels, threads);
  AblationCell cell;
  cell.section = section;
  cell.gssm = gssm;
  cell.pss = pss;
  cell.mamba = cfg.mamba;
  cell.pieces = cfg.pieces;
  cell.oa = m.oa;
  cell.aa = m.aa;
  cell.kappa = m.kappa;
  cell.macs = count_macs(cfg);
  cell.params = count_params(trained.weights);
  return cell;
}

}  // namespace

std::vector<AblationCell> ablate(const data::HsiCube& cube, const data::LabelMap& train_labels,
                                 const data::LabelMap& test_labels, const ModelConfig& base,
                                 const TrainConfig& tcfg, const AblationGrid& grid, unsigned threads,
                                 const AblationProgress& progress) {
  std::vector<AblationCell> cells;
  auto emit = [&](AblationCell c) {
    if (progress) progress(c);
    cells.push_back(std::move(c));
  };
  if (grid.pieces_sweep) {
    const bool gssm = base.variant == Variant::kPatchwise;
    for (std::size_t r : grid.pieces) {
      const ModelConfig cfg = ablation_config(base, gssm, true, true, r);
      emit(run_cell("pieces", cfg, gssm, true, cube, train_labels, test_labels, tcfg, threads));
    }
  }
  if (grid.modules) {
    for (bool gssm : {true, false}) {
      for (bool pss : {true, false}) {
        for (bool mamba : {true, false}) {
          const ModelConfig cfg = ablation_config(base, gssm, pss, mamba, base.pieces);
          emit(run_cell("modules", cfg, gssm, pss, cube, train_labels, test_labels, tcfg, threads));
        }
      }
    }
  }
  return cells;
}

std::string ablation_table(const std::vector<AblationCell>& cells) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-8s %-5s %-5s %-5s %3s %8s %8s %8s %14s %10s\n", "section", "GSSM",
                "PSS", "Mamba", "R", "OA", "AA", "kappa", "MACs", "Params");
  out += line;
  auto mark = [](bool on) { return on ? "on" : "off"; };
  for (const auto& c : cells) {
    std::snprintf(line, sizeof line, "%-8s %-5s %-5s %-5s %3zu %8.4f %8.4f %8.4f %14llu %10llu\n",
                  c.section.c_str(), mark(c.gssm), mark(c.pss), mark(c.mamba), c.pieces, c.oa, c.aa,
                  c.kappa, static_cast<unsigned long long>(c.macs), static_cast<unsigned long long>(c.params));
    out += line;
  }
  return out;
}

}  // namespace smamba
