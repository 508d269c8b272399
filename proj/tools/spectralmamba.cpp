// spectralmamba: synthetic scenes, superpixel splits, training, evaluation,
// cost accounting and ablations from the command line.

#include <exception>
#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "smamba/error.hpp"

namespace {

void add_model_flags(CLI::App* cmd, smamba::cli::ModelArgs& m) {
  cmd->add_option("--variant", m.variant, "pixelwise or patchwise")->capture_default_str();
  cmd->add_option("--pieces", m.pieces, "PSS pieces R")->capture_default_str();
  cmd->add_option("--state", m.state, "SSM state size N")->capture_default_str();
  cmd->add_option("--expand", m.expand, "feature expansion E")->capture_default_str();
  cmd->add_option("--patch", m.patch, "patch size P (patchwise)")->capture_default_str();
  cmd->add_option("--depth", m.depth, "number of Mamba blocks")->capture_default_str();
  cmd->add_flag("--no-mamba", m.no_mamba, "replace the Mamba blocks with the identity");
}

void add_train_flags(CLI::App* cmd, smamba::TrainConfig& t) {
  cmd->add_option("--lr", t.lr0, "initial learning rate")->capture_default_str();
  cmd->add_option("--wd", t.weight_decay, "decoupled weight decay")->capture_default_str();
  cmd->add_option("--epochs", t.epochs)->capture_default_str();
  cmd->add_option("--batch", t.batch)->capture_default_str();
  cmd->add_option("--step", t.step_epochs, "epochs per learning-rate step")->capture_default_str();
  cmd->add_option("--gamma", t.gamma, "learning-rate factor per step")->capture_default_str();
  cmd->add_option("--seed", t.seed)->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  namespace cli = smamba::cli;
  CLI::App app{"SpectralMamba hyperspectral classification toolkit"};
  app.require_subcommand(1);

  cli::SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "write a synthetic labeled cube");
  c_synth->set_help_flag("--help", "print this help message and exit");
  c_synth->add_option("--h", synth.synth.height)->capture_default_str();
  c_synth->add_option("--w", synth.synth.width)->capture_default_str();
  c_synth->add_option("--l", synth.synth.bands)->capture_default_str();
  c_synth->add_option("--k", synth.synth.classes)->capture_default_str();
  c_synth->add_option("--noise", synth.synth.noise_sigma)->capture_default_str();
  c_synth->add_option("--jitter", synth.synth.illumination_jitter, "illumination scale half-range")
      ->capture_default_str();
  c_synth->add_option("--seed", synth.synth.seed)->capture_default_str();
  c_synth->add_option("--out", synth.out, "output directory")->required();

  cli::SplitArgs split;
  auto* c_split = app.add_subcommand("split", "superpixel-based train/test split");
  c_split->add_option("--cube", split.cube)->required();
  c_split->add_option("--labels", split.labels)->required();
  c_split->add_option("--budget", split.spec.budget, "training pixels per class")->capture_default_str();
  c_split->add_option("--superpixels", split.spec.superpixels, "0 = H*W/64")->capture_default_str();
  c_split->add_option("--compactness", split.spec.compactness)->capture_default_str();
  c_split->add_option("--iterations", split.spec.slic_iterations)->capture_default_str();
  c_split->add_option("--seed", split.spec.seed)->capture_default_str();
  c_split->add_option("--out", split.out, "output directory")->required();

  cli::TrainArgs train;
  auto* c_train = app.add_subcommand("train", "train a model and write a checkpoint");
  c_train->add_option("--cube", train.cube)->required();
  c_train->add_option("--labels", train.labels)->required();
  c_train->add_option("--split", train.split, "split JSON (default: all labels train)");
  c_train->add_option("--out", train.out, "output directory")->required();
  add_model_flags(c_train, train.model);
  add_train_flags(c_train, train.train);

  cli::EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "evaluate a checkpoint");
  c_eval->add_option("--cube", eval.cube)->required();
  c_eval->add_option("--labels", eval.labels)->required();
  c_eval->add_option("--split", eval.split, "split JSON (default: all labels test)");
  c_eval->add_option("--weights", eval.weights)->required();
  c_eval->add_option("--map-out", eval.map_out, "write a PPM classification map");
  c_eval->add_option("--metrics-out", eval.metrics_out, "also write metrics JSON here");
  c_eval->add_option("--threads", eval.threads)->capture_default_str();

  cli::CostArgs cost;
  auto* c_cost = app.add_subcommand("cost", "MACs and parameter count at batch 64");
  c_cost->add_option("--config", cost.config, "model or train config JSON");
  c_cost->add_option("--bands", cost.bands);
  c_cost->add_option("--classes", cost.classes);
  add_model_flags(c_cost, cost.model);

  cli::AblateArgs ablate;
  auto* c_ablate = app.add_subcommand("ablate", "module on/off grid and pieces sweep");
  c_ablate->add_option("--cube", ablate.cube)->required();
  c_ablate->add_option("--labels", ablate.labels)->required();
  c_ablate->add_option("--split", ablate.split);
  c_ablate->add_option("--grid", ablate.grid, "all, pieces or modules")->capture_default_str();
  c_ablate->add_option("--out", ablate.out, "output directory")->required();
  c_ablate->add_option("--threads", ablate.threads)->capture_default_str();
  add_model_flags(c_ablate, ablate.model);
  add_train_flags(c_ablate, ablate.train);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "ERR:usage: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*c_synth) return cli::run_synth(synth);
    if (*c_split) return cli::run_split(split);
    if (*c_train) return cli::run_train(train);
    if (*c_eval) return cli::run_eval(eval);
    if (*c_cost) return cli::run_cost(cost);
    if (*c_ablate) return cli::run_ablate(ablate);
  } catch (const smamba::Error& e) {
    std::cerr << "ERR:" << e.kind() << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "ERR:internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
