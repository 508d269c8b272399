#pragma once

#include <cstdint>
#include <string>

#include "smamba/data.hpp"
#include "smamba/model.hpp"
#include "smamba/split.hpp"
#include "smamba/train.hpp"

namespace smamba::cli {

struct SynthArgs {
  data::SynthOptions synth;
  std::string out;
};

struct SplitArgs {
  std::string cube, labels, out;
  data::SplitSpec spec;
};

struct ModelArgs {
  std::string variant = "patchwise";
  std::size_t pieces = 6;
  std::size_t state = 16;
  std::size_t expand = 8;
  std::size_t patch = 3;
  std::size_t depth = 1;
  bool no_mamba = false;
};

struct TrainArgs {
  std::string cube, labels, split, out;
  ModelArgs model;
  TrainConfig train;
};

struct EvalArgs {
  std::string cube, labels, split, weights, map_out, metrics_out;
  unsigned threads = 1;
};

struct CostArgs {
  std::string config;
  ModelArgs model;
  std::size_t bands = 0;
  std::size_t classes = 0;
};

struct AblateArgs {
  std::string cube, labels, split, out;
  std::string grid = "all";
  ModelArgs model;
  TrainConfig train;
  unsigned threads = 1;
};

int run_synth(const SynthArgs& a);
int run_split(const SplitArgs& a);
int run_train(const TrainArgs& a);
int run_eval(const EvalArgs& a);
int run_cost(const CostArgs& a);
int run_ablate(const AblateArgs& a);

}  // namespace smamba::cli
