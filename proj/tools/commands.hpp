#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace facn::cli {

enum ExitCode { kOk = 0, kValidation = 1, kRuntime = 2 };

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
};

struct SynthArgs {
  int count = 200;
  int size = 128;
};

struct DegradeArgs {
  std::string in_dir;
  std::string kind = "BicN";
  std::optional<double> noise_level;
  int hr_size = 128;
};

struct TrainArgs {
  std::string resume;
};

struct EvalArgs {
  std::string checkpoint;
  std::string lr_dir;
  std::string hr_dir;
  int threads = 0;
  int max_grids = -1;
};

struct AblateArgs {
  std::vector<std::string> variants;
  std::vector<int> ks;
  std::vector<int> ds;
  std::int64_t steps = 500;
};

struct GradcheckArgs {
  std::string scope = "all";
  double tolerance = 1e-4;
  bool corrupt = false;
};

int run_synth(const Globals& g, const SynthArgs& a);
int run_degrade(const Globals& g, const DegradeArgs& a);
int run_train(const Globals& g, const TrainArgs& a);
int run_eval(const Globals& g, const EvalArgs& a);
int run_ablate(const Globals& g, const AblateArgs& a);
int run_gradcheck(const Globals& g, const GradcheckArgs& a);

}  // namespace facn::cli
