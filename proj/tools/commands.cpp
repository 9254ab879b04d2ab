#include "commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "facn/common/error.hpp"
#include "facn/common/rng.hpp"
#include "facn/imaging/degradation.hpp"
#include "facn/imaging/png_io.hpp"
#include "facn/training/config_file.hpp"
#include "facn/training/dataset.hpp"
#include "facn/training/evaluation.hpp"
#include "facn/training/gradient_suite.hpp"
#include "facn/training/harness.hpp"
#include "facn/training/synthetic_faces.hpp"
#include "facn/training/trainer.hpp"

namespace fs = std::filesystem;

namespace facn::cli {

namespace {

std::vector<fs::path> list_pngs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::invalid_argument("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

fs::path out_dir(const Globals& g, const std::string& fallback) {
  const fs::path dir = g.out.empty() ? fs::path(fallback) : fs::path(g.out);
  fs::create_directories(dir);
  return dir;
}

std::string hex(std::uint64_t v) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << v;
  return ss.str();
}

training::TrainConfig load_config(const Globals& g) {
  if (g.config.empty()) throw std::invalid_argument("--config is required");
  training::TrainConfig config = training::load_train_config(g.config);
  if (g.seed) {
    config.seed = *g.seed;
    config.model.seed = *g.seed;
  }
  return config;
}

training::Dataset load_data(const training::TrainConfig& config) {
  training::DatasetManifest m;
  m.image_dir = config.dataset_dir;
  m.attribute_table = config.attribute_table();
  m.train = config.dataset_train;
  m.test = config.dataset_test;
  m.hr_size = config.model.hr_size;
  m.seed = config.seed;
  return training::load_dataset(m);
}

// Reads "# key = value" lines from the header block of a manifest written by `degrade`.
std::map<std::string, std::string> manifest_header(const fs::path& path) {
  std::map<std::string, std::string> out;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line) && line.rfind('#', 0) == 0) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) out[line.substr(2, eq - 2)] = line.substr(eq + 3);
  }
  return out;
}

}  // namespace

int run_synth(const Globals& g, const SynthArgs& a) {
  const fs::path dir = out_dir(g, "faces");
  training::write_synthetic_corpus(dir, a.count, g.seed.value_or(1), a.size);
  std::cout << "wrote " << a.count << " faces and attributes.txt to " << dir.string() << "\n";
  return kOk;
}

int run_degrade(const Globals& g, const DegradeArgs& a) {
  const auto kind = imaging::parse_degradation_kind(a.kind);
  const std::uint64_t seed = g.seed.value_or(0);
  imaging::DegradationSpec base = imaging::DegradationSpec::make(kind, seed, a.hr_size);
  if (a.noise_level) base.noise_level = *a.noise_level;
  base.validate();
  const auto inputs = list_pngs(a.in_dir);
  const fs::path dir = out_dir(g, "lr");

  std::ostringstream rows;
  std::vector<std::string> failures;
  int written = 0;
  for (const auto& path : inputs) {
    const std::string name = path.filename().string();
    try {
      const imaging::Image hr = imaging::read_png(path);
      if (hr.height() != a.hr_size || hr.width() != a.hr_size || hr.channels() != 3)
        throw LoadError(path.string(), "expected a " + std::to_string(a.hr_size) + "x" + std::to_string(a.hr_size) +
                                           " RGB image");
      imaging::DegradationSpec spec = base;
      spec.seed = derive_seed(seed, {fnv1a(name)});
      imaging::write_png(dir / name, imaging::degrade(hr, spec));
      rows << name << ',' << spec.seed << '\n';
      ++written;
    } catch (const std::exception& e) {
      failures.push_back(name + ": " + e.what());
    }
  }

  std::ofstream manifest(dir / "manifest.csv");
  manifest << "# facn degradation manifest\n";
  manifest << "# kind = " << imaging::to_string(base.kind) << "\n";
  manifest << "# scale = " << base.scale << "\n";
  manifest << "# hr_size = " << base.hr_size << "\n";
  manifest << "# lr_size = " << base.lr_size() << "\n";
  if (base.has_blur()) {
    manifest << "# blur_size = " << base.blur_size << "\n";
    manifest << "# blur_sigma = " << base.blur_sigma << "\n";
  }
  manifest << "# noise_level = " << base.noise_level << "\n";
  manifest << "# seed = " << seed << "\n";
  manifest << "# images = " << written << "\n";
  manifest << "file,seed\n" << rows.str();
  if (!failures.empty()) {
    manifest << "# failures\n";
    for (const auto& f : failures) manifest << "# " << f << "\n";
  }
  std::cout << "degraded " << written << " of " << inputs.size() << " images (" << imaging::to_string(base.kind)
            << ") into " << dir.string() << "\n";
  if (!failures.empty()) {
    std::cerr << failures.size() << " file(s) failed:\n";
    for (const auto& f : failures) std::cerr << "  " << f << "\n";
    return kRuntime;
  }
  return kOk;
}

int run_train(const Globals& g, const TrainArgs& a) {
  training::TrainConfig config = load_config(g);
  const fs::path dir = out_dir(g, "run");
  const training::Dataset data = load_data(config);
  if (data.train.empty()) throw std::invalid_argument("the training split is empty");

  // The checkpoint supplies weights, optimizer state and step; the config supplies the budget.
  training::Trainer trainer(config);
  if (!a.resume.empty()) trainer.restore(nn::load_checkpoint(a.resume));
  {
    std::ofstream cfg(dir / "config.txt");
    cfg << training::to_text(trainer.config());
  }
  const bool append = !a.resume.empty() && fs::exists(dir / "metrics.csv");
  std::ofstream metrics(dir / "metrics.csv", append ? std::ios::app : std::ios::trunc);
  if (!append) training::write_metrics_header(metrics, trainer.config());
  std::ofstream epochs(dir / "epochs.csv", append ? std::ios::app : std::ios::trunc);
  if (!append)
    epochs << "# facn epoch summary\nepoch,lr,steps,objective,reconstruction,coarse,kl,attribute,adversarial,"
              "perceptual,discriminator\n";

  std::vector<training::StepMetrics> epoch_rows;
  const int spe = trainer.steps_per_epoch(data.train.size());
  std::cerr << "training on " << data.train.size() << " images, " << spe << " steps per epoch\n";
  try {
    trainer.fit(
        data.train,
        [&](const training::StepMetrics& m) {
          training::write_metrics_row(metrics, m);
          epoch_rows.push_back(m);
          if (m.step % 10 == 0)
            std::cerr << "step " << m.step << " epoch " << m.epoch << " lr " << m.learning_rate << " objective "
                      << m.objective << "\n";
        },
        [&](int epoch) {
          auto mean = [&](auto field) {
            double s = 0;
            for (const auto& r : epoch_rows) s += field(r);
            return epoch_rows.empty() ? 0.0 : s / static_cast<double>(epoch_rows.size());
          };
          epochs << epoch << ',' << (epoch_rows.empty() ? 0.0 : epoch_rows.back().learning_rate) << ','
                 << epoch_rows.size() << ',' << mean([](const auto& r) { return r.objective; }) << ','
                 << mean([](const auto& r) { return r.generator.reconstruction; }) << ','
                 << mean([](const auto& r) { return r.generator.coarse; }) << ','
                 << mean([](const auto& r) { return r.generator.kl; }) << ','
                 << mean([](const auto& r) { return r.generator.attribute; }) << ','
                 << mean([](const auto& r) { return r.adversarial; }) << ','
                 << mean([](const auto& r) { return r.perceptual; }) << ','
                 << mean([](const auto& r) { return r.discriminator; }) << '\n';
          epochs.flush();
          metrics.flush();
          epoch_rows.clear();
          trainer.save(dir / "checkpoint");
        });
  } catch (const training::TrainingDiverged& e) {
    std::ofstream(dir / "diverged.txt") << e.what() << "\n" << e.snapshot() << "\n";
    throw;
  }
  trainer.save(dir / "checkpoint");
  std::cout << "trained " << trainer.step() << " steps; checkpoint at " << (dir / "checkpoint").string() << "\n";
  return kOk;
}

int run_eval(const Globals& g, const EvalArgs& a) {
  training::TrainConfig config;
  model::Generator<float> generator = training::load_generator(a.checkpoint, &config);
  const fs::path dir = out_dir(g, "eval");
  const int lr_size = generator.config().lr_size();

  std::map<std::string, fs::path> hr_files;
  for (const auto& p : list_pngs(a.hr_dir)) hr_files[p.filename().string()] = p;
  std::vector<training::EvalPair> pairs;
  std::vector<std::string> warnings;
  std::set<std::string> matched;
  for (const auto& lr_path : list_pngs(a.lr_dir)) {
    const std::string name = lr_path.filename().string();
    auto it = hr_files.find(name);
    if (it == hr_files.end()) {
      warnings.push_back(name + ": no HR image with this name");
      continue;
    }
    matched.insert(name);
    imaging::Image lr = imaging::read_png(lr_path);
    imaging::Image hr = imaging::read_png(it->second);
    if (lr.channels() != 3 || lr.height() != lr_size || lr.width() != lr_size) {
      warnings.push_back(name + ": LR image is not " + std::to_string(lr_size) + "x" + std::to_string(lr_size) + " RGB");
      continue;
    }
    if (hr.channels() != 3 || hr.height() != generator.config().hr_size || hr.width() != generator.config().hr_size) {
      warnings.push_back(name + ": HR image does not match the model size");
      continue;
    }
    pairs.push_back({name, std::move(lr), std::move(hr)});
  }
  for (const auto& [name, path] : hr_files)
    if (!matched.count(name)) warnings.push_back(name + ": no LR image with this name");
  if (pairs.empty()) throw std::invalid_argument("no paired LR/HR images to evaluate");

  std::vector<imaging::Image> lr_images;
  for (const auto& p : pairs) lr_images.push_back(p.lr);
  const auto outputs = training::super_resolve(generator, lr_images);
  const int threads = a.threads > 0 ? a.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  training::EvalReport report = training::evaluate_outputs(pairs, outputs, generator.config().scale, threads);
  report.checkpoint = a.checkpoint;
  report.config_hash = hex(generator.config().hash());
  const auto header = manifest_header(fs::path(a.lr_dir) / "manifest.csv");
  report.degradation = header.count("kind") ? header.at("kind") : std::string("unknown");

  fs::create_directories(dir / "sr");
  fs::create_directories(dir / "grids");
  int grids = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    imaging::write_png(dir / "sr" / pairs[i].name, outputs[i]);
    if (a.max_grids < 0 || grids < a.max_grids) {
      const auto bic = training::bicubic_baseline(pairs[i].lr, generator.config().scale);
      imaging::write_png(dir / "grids" / pairs[i].name,
                         training::comparison_grid(pairs[i].hr, pairs[i].lr, bic, outputs[i]));
      ++grids;
    }
  }
  std::ofstream csv(dir / "report.csv");
  training::write_report_csv(csv, report);
  if (!warnings.empty()) {
    csv << "# skipped\n";
    for (const auto& w : warnings) csv << "# " << w << "\n";
    std::cerr << "skipped " << warnings.size() << " file(s):\n";
    for (const auto& w : warnings) std::cerr << "  " << w << "\n";
  }
  std::cout << std::fixed << std::setprecision(4) << "images " << report.rows.size() << "  facn PSNR "
            << report.mean_psnr << " SSIM " << report.mean_ssim << "  bicubic PSNR " << report.mean_bicubic_psnr
            << " SSIM " << report.mean_bicubic_ssim << "\n";
  return kOk;
}

int run_ablate(const Globals& g, const AblateArgs& a) {
  training::TrainConfig config = load_config(g);
  const fs::path dir = out_dir(g, "ablation");
  const training::Dataset data = load_data(config);
  if (data.train.empty()) throw std::invalid_argument("the training split is empty");
  std::vector<model::Variant> variants;
  for (const auto& v : a.variants) variants.push_back(model::parse_variant(v));
  const auto cells = training::ablation_grid(config.model, variants, a.ks, a.ds);
  const auto& eval_samples = data.test.empty() ? data.train : data.test;
  const auto eval = training::make_eval_pairs(config, eval_samples, derive_seed(config.seed, {0xe7a1}));
  const auto rows = training::ablation_harness(
      cells, data.train, eval, config, a.steps, [](const training::AblationCell& c, const training::StepMetrics& m) {
        if (m.step % 50 == 0) std::cerr << c.label << " step " << m.step << " objective " << m.objective << "\n";
      });
  std::ofstream csv(dir / "ablation.csv");
  training::write_ablation_report(csv, rows, config, a.steps);
  training::write_ablation_report(std::cout, rows, config, a.steps);
  const bool any_diverged = std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.diverged; });
  return any_diverged ? kRuntime : kOk;
}

int run_gradcheck(const Globals& g, const GradcheckArgs& a) {
  training::GradSuiteOptions options;
  options.tolerance = a.tolerance;
  options.corrupt = a.corrupt;
  if (g.seed) options.seed = *g.seed;
  const auto entries = training::run_gradient_suite(a.scope, options);

  std::ostringstream table;
  table << std::left << std::setw(15) << "scope" << std::setw(42) << "check" << std::setw(14) << "max_rel_err"
        << std::setw(8) << "coords" << std::setw(8) << "skipped" << "result\n";
  bool all_passed = true;
  for (const auto& e : entries) {
    const bool ok = e.passed(a.tolerance);
    all_passed = all_passed && ok;
    table << std::left << std::setw(15) << e.scope << std::setw(42) << e.name << std::setw(14) << std::scientific
          << std::setprecision(3) << e.result.max_relative_error << std::defaultfloat << std::setw(8)
          << e.result.coordinates << std::setw(8) << e.result.skipped << (ok ? "PASS" : "FAIL") << "\n";
  }
  std::cout << table.str();
  std::cout << (all_passed ? "all checks passed" : "gradient check FAILED") << " (tolerance " << a.tolerance << ")\n";
  if (!g.out.empty()) {
    const fs::path dir = out_dir(g, ".");
    std::ofstream csv(dir / "gradcheck.csv");
    csv << "# facn gradient check\n# tolerance = " << a.tolerance << "\n# scope = " << a.scope << "\n";
    csv << "scope,check,max_relative_error,coordinates,skipped,passed\n";
    csv << std::setprecision(6);
    for (const auto& e : entries)
      csv << e.scope << ',' << e.name << ',' << e.result.max_relative_error << ',' << e.result.coordinates << ','
          << e.result.skipped << ',' << (e.passed(a.tolerance) ? 1 : 0) << '\n';
  }
  return all_passed ? kOk : kRuntime;
}

}  // namespace facn::cli
