#include <exception>
#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "facn/common/error.hpp"
#include "facn/training/trainer.hpp"

using namespace facn::cli;

int main(int argc, char** argv) {
  CLI::App app{"facn: facial attribute capsule super-resolution"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals globals;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Master seed");
  app.add_option("--config", globals.config, "Training config file (key = value)");
  app.add_option("--out", globals.out, "Output directory");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Render a procedural face corpus with attribute table");
  synth_cmd->add_option("--count", synth.count, "Number of faces")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--size", synth.size, "Image side in pixels")->check(CLI::PositiveNumber);

  DegradeArgs degrade;
  auto* degrade_cmd = app.add_subcommand("degrade", "Make LR images from a directory of HR PNGs");
  degrade_cmd->add_option("--in", degrade.in_dir, "Directory of HR PNGs")->required();
  degrade_cmd->add_option("--kind", degrade.kind, "Bic, BicN or BBicN");
  degrade_cmd->add_option("--noise-level", degrade.noise_level, "Override the noise std (0-255 units)");
  degrade_cmd->add_option("--hr-size", degrade.hr_size, "Expected HR side");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a model from a config file");
  train_cmd->add_option("--resume", train.resume, "Continue from a checkpoint directory");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Y-channel PSNR/SSIM of a checkpoint against the bicubic baseline");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Checkpoint directory")->required();
  eval_cmd->add_option("--lr", eval.lr_dir, "Directory of LR PNGs")->required();
  eval_cmd->add_option("--hr", eval.hr_dir, "Directory of HR PNGs with matching names")->required();
  eval_cmd->add_option("--threads", eval.threads, "Metric workers (0: hardware concurrency)");
  eval_cmd->add_option("--grids", eval.max_grids, "Comparison grids to write (-1: all)");

  AblateArgs ablate;
  auto* ablate_cmd = app.add_subcommand("ablate", "Train and evaluate a grid of variants / capsule shapes");
  ablate_cmd->add_option("--variants", ablate.variants, "Subset of full,v1,v2,v3")->delimiter(',');
  ablate_cmd->add_option("--k", ablate.ks, "Capsule counts")->delimiter(',');
  ablate_cmd->add_option("--d", ablate.ds, "Capsule dimensions")->delimiter(',');
  ablate_cmd->add_option("--steps", ablate.steps, "Training steps per cell")->check(CLI::PositiveNumber);

  GradcheckArgs gradcheck;
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient suite in double precision");
  gradcheck_cmd->add_option("--scope", gradcheck.scope, "layers, encoder, cgb, decoder, discriminator, full-loss or all");
  gradcheck_cmd->add_option("--tolerance", gradcheck.tolerance, "Maximum relative error");
  gradcheck_cmd->add_flag("--corrupt", gradcheck.corrupt)->group("");  // negative control, hidden

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }
  if (*seed_opt) globals.seed = seed;

  try {
    if (*synth_cmd) return run_synth(globals, synth);
    if (*degrade_cmd) return run_degrade(globals, degrade);
    if (*train_cmd) return run_train(globals, train);
    if (*eval_cmd) return run_eval(globals, eval);
    if (*ablate_cmd) return run_ablate(globals, ablate);
    if (*gradcheck_cmd) return run_gradcheck(globals, gradcheck);
  } catch (const facn::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const facn::training::TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << "\n" << e.snapshot() << "\n";
    return kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kValidation;
}
