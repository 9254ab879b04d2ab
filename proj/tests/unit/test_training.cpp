#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "facn/common/error.hpp"
#include "facn/imaging/metrics.hpp"
#include "facn/training/config_file.hpp"
#include "facn/training/dataset.hpp"
#include "facn/training/evaluation.hpp"
#include "facn/training/synthetic_faces.hpp"
#include "facn/training/trainer.hpp"

using namespace facn;
using namespace facn::training;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("facn_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TrainConfig tiny(bool gan = true) {
  TrainConfig c;
  c.dataset_dir = "unused";
  c.model.hr_size = 16;
  c.model.width = 4;
  c.model.k = 18;
  c.model.d = 4;
  c.batch_size = 2;
  c.adversarial = gan;
  c.disc_width = 4;
  c.disc_hidden = 8;
  c.seed = 5;
  c.model.seed = 5;
  c.validate();
  return c;
}

std::vector<Sample> faces(int n, int size) {
  std::vector<Sample> out;
  for (int i = 0; i < n; ++i) {
    SyntheticFace f = render_synthetic_face(100 + i, size);
    out.push_back({"f" + std::to_string(i), std::move(f.image), std::move(f.attributes)});
  }
  return out;
}

std::string parse_error(const std::string& text, const EnvLookup& env = {}) {
  try {
    parse_train_config(text, env);
  } catch (const ParseError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Config, MissingDatasetDirNamesKey) {
  const std::string msg = parse_error("train.batch_size = 4\n");
  EXPECT_NE(msg.find("dataset.dir"), std::string::npos) << msg;
}

TEST(Config, UnknownKeyNamesKeyAndLine) {
  const std::string msg = parse_error("dataset.dir = x\n\ntrain.batchsize = 4\n");
  EXPECT_NE(msg.find("train.batchsize"), std::string::npos) << msg;
  EXPECT_NE(msg.find(":3:"), std::string::npos) << msg;
}

TEST(Config, BadNumberNamesKey) {
  const std::string msg = parse_error("dataset.dir = x\ntrain.learning_rate = fast\n");
  EXPECT_NE(msg.find("train.learning_rate"), std::string::npos) << msg;
  EXPECT_NE(parse_error("dataset.dir = x\ntrain.batch_size = 0\n").find("train.batch_size"), std::string::npos);
  EXPECT_NE(parse_error("dataset.dir = x\nmodel.hr_size = 48\n"), "");
}

TEST(Config, DefaultsAndComments) {
  const TrainConfig c = parse_train_config("dataset.dir = faces   # trailing comment\n");
  EXPECT_EQ(c.dataset_dir, "faces");
  EXPECT_EQ(c.batch_size, 16);
  EXPECT_DOUBLE_EQ(c.learning_rate, 3e-4);
  EXPECT_EQ(c.halving_epochs, 20);
  EXPECT_DOUBLE_EQ(c.lambda, 1.0);
  EXPECT_EQ(c.model.hr_size, 128);
  EXPECT_EQ(c.model.k, 64);
  EXPECT_EQ(c.degradation.kind, imaging::DegradationKind::BicN);
  EXPECT_EQ(c.attribute_table(), fs::path("faces") / "attributes.txt");
}

TEST(Config, EnvironmentOverridesFile) {
  const EnvLookup env = [](const std::string& name) -> std::optional<std::string> {
    if (name == "FACN_TRAIN_BATCH_SIZE") return "7";
    return std::nullopt;
  };
  EXPECT_EQ(env_name("train.batch_size"), "FACN_TRAIN_BATCH_SIZE");
  const TrainConfig c = parse_train_config("dataset.dir = x\ntrain.batch_size = 4\n", env);
  EXPECT_EQ(c.batch_size, 7);
}

TEST(Config, EnvironmentCanSupplyRequiredKey) {
  const EnvLookup env = [](const std::string& name) -> std::optional<std::string> {
    if (name == "FACN_DATASET_DIR") return "from_env";
    return std::nullopt;
  };
  EXPECT_EQ(parse_train_config("", env).dataset_dir, "from_env");
}

TEST(Config, SeedPropagatesToModel) {
  const TrainConfig c = parse_train_config("dataset.dir = x\nseed = 42\n");
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.model.seed, 42u);
}

TEST(Config, KindIsAppliedBeforeNoiseLevel) {
  const TrainConfig c = parse_train_config("dataset.dir = x\ndegradation.noise_level = 3\ndegradation.kind = BBicN\n");
  EXPECT_EQ(c.degradation.kind, imaging::DegradationKind::BBicN);
  EXPECT_DOUBLE_EQ(c.degradation.noise_level, 3.0);
}

TEST(Config, TextRoundTrip) {
  TrainConfig c = tiny();
  c.learning_rate = 1.25e-3;
  c.model.variant = model::Variant::V2;
  c.degradation = imaging::DegradationSpec::make(imaging::DegradationKind::BBicN);
  const TrainConfig back = parse_train_config(to_text(c));
  EXPECT_EQ(to_text(back), to_text(c));
  EXPECT_EQ(config_values(back), config_values(c));
}

TEST(Config, LoadMissingFileIsLoadError) {
  EXPECT_THROW(load_train_config("/nonexistent/facn.cfg", {}), LoadError);
}

TEST(Schedule, HalvesEveryPeriod) {
  EXPECT_DOUBLE_EQ(lr_schedule(0, 3e-4), 3e-4);
  EXPECT_DOUBLE_EQ(lr_schedule(19, 3e-4), 3e-4);
  EXPECT_NEAR(lr_schedule(20, 3e-4), 1.5e-4, 1e-12);
  EXPECT_NEAR(lr_schedule(40, 3e-4), 7.5e-5, 1e-12);
  EXPECT_NEAR(lr_schedule(7, 1.0, 3), 0.25, 1e-15);
}

TEST(Attributes, SelectsSupervisedColumnsByName) {
  std::ostringstream text;
  text << "2\n";
  std::vector<std::string> header = {"Extra"};
  for (auto n : kAttributeNames) header.emplace_back(n);
  std::reverse(header.begin(), header.end());
  for (const auto& h : header) text << h << ' ';
  text << "\n";
  for (int r = 0; r < 2; ++r) {
    text << "img" << r << ".png";
    for (std::size_t i = 0; i < header.size(); ++i) text << ' ' << ((i + r) % 2 ? 1 : -1);
    text << "\n";
  }
  std::istringstream in(text.str());
  const AttributeTable t = parse_attribute_table(in);
  ASSERT_EQ(t.rows.size(), 2u);
  ASSERT_EQ(t.names.size(), 18u);
  for (std::size_t a = 0; a < 18; ++a) {
    EXPECT_EQ(t.names[a], kAttributeNames[a]);
    const auto col = static_cast<std::size_t>(std::find(header.begin(), header.end(), t.names[a]) - header.begin());
    for (int r = 0; r < 2; ++r) EXPECT_EQ(t.rows[r].values[a], (col + r) % 2 ? 1.0f : 0.0f);
  }
}

TEST(Attributes, Errors) {
  std::string header;
  for (auto n : kAttributeNames) header += std::string(n) + " ";
  std::string row = "a.png";
  for (int i = 0; i < 18; ++i) row += " 1";

  auto message = [](const std::string& text) -> std::string {
    std::istringstream in(text);
    try {
      parse_attribute_table(in, "attrs");
    } catch (const ParseError& e) {
      return e.what();
    }
    return {};
  };
  EXPECT_NE(message("Male Young\n" + row + "\n").find("not found"), std::string::npos);
  EXPECT_NE(message(header + "\na.png 1 1\n").find("fields"), std::string::npos);
  std::string bad = "a.png 0";
  for (int i = 1; i < 18; ++i) bad += " 1";
  EXPECT_NE(message(header + "\n" + bad + "\n").find("+-1"), std::string::npos);
  EXPECT_EQ(message(header + "\n" + row + "\n"), "");
  EXPECT_EQ(message(""), "attrs: missing header row");
}

TEST(Dataset, MissingImageNamesPath) {
  const fs::path dir = scratch("missing");
  write_synthetic_corpus(dir, 3, 1, 16);
  fs::remove(dir / "face_00001.png");
  DatasetManifest m;
  m.image_dir = dir;
  m.attribute_table = dir / "attributes.txt";
  m.hr_size = 16;
  try {
    load_dataset(m);
    FAIL() << "expected LoadError";
  } catch (const LoadError& e) {
    EXPECT_NE(e.path().find("face_00001.png"), std::string::npos) << e.what();
  }
}

TEST(Dataset, SplitsAndPreparesImages) {
  const fs::path dir = scratch("split");
  write_synthetic_corpus(dir, 6, 3, 24);
  DatasetManifest m;
  m.image_dir = dir;
  m.attribute_table = dir / "attributes.txt";
  m.test = 2;
  m.hr_size = 16;
  const Dataset d = load_dataset(m);
  EXPECT_EQ(d.test.size(), 2u);
  EXPECT_EQ(d.train.size(), 4u);
  std::set<std::string> names;
  for (const auto* split : {&d.train, &d.test})
    for (const auto& s : *split) {
      names.insert(s.name);
      EXPECT_EQ(s.hr.height(), 16);
      EXPECT_EQ(s.hr.width(), 16);
      EXPECT_EQ(s.attributes.size(), 18u);
    }
  EXPECT_EQ(names.size(), 6u);
  const Dataset again = load_dataset(m);
  for (std::size_t i = 0; i < d.test.size(); ++i) EXPECT_EQ(d.test[i].name, again.test[i].name);
}

TEST(Dataset, PrepareFaceCropsCentreSquare) {
  imaging::Image wide(10, 30, 3, 0.0f);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 10; ++y)
      for (int x = 10; x < 20; ++x) wide.at(c, y, x) = 1.0f;
  const imaging::Image out = prepare_face(wide, 10);
  ASSERT_EQ(out.height(), 10);
  for (float v : out.data()) EXPECT_NEAR(v, 1.0f, 1e-6f);
}

TEST(SyntheticFaces, DeterministicInSeed) {
  const SyntheticFace a = render_synthetic_face(9, 32);
  const SyntheticFace b = render_synthetic_face(9, 32);
  const SyntheticFace c = render_synthetic_face(10, 32);
  EXPECT_EQ(a.image, b.image);
  EXPECT_EQ(a.attributes, b.attributes);
  EXPECT_NE(a.image, c.image);
  EXPECT_EQ(a.attributes.size(), 18u);
  for (float v : a.attributes) EXPECT_TRUE(v == 0.0f || v == 1.0f);
  for (float v : a.image.data()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(Batches, ShapesAndPermutation) {
  const TrainConfig c = tiny();
  const auto data = faces(5, 16);
  std::vector<const Sample*> picked = {&data[0], &data[3]};
  const Batch b = make_batch(c, picked, 0);
  EXPECT_EQ(b.hr.shape(), (nn::Shape{2, 3, 16, 16}));
  EXPECT_EQ(b.lr.shape(), (nn::Shape{2, 3, 2, 2}));
  EXPECT_EQ(b.labels.shape().n, 2);
  EXPECT_EQ(static_cast<int>(b.labels.shape().sample_size()), 18);

  Trainer t(c);
  EXPECT_EQ(t.steps_per_epoch(5), 3);
  std::vector<std::size_t> all;
  for (int s = 0; s < 3; ++s) {
    const auto idx = t.batch_indices(s, 5);
    all.insert(all.end(), idx.begin(), idx.end());
  }
  std::vector<std::size_t> sorted = all;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> expected(5);
  std::iota(expected.begin(), expected.end(), std::size_t{0});
  EXPECT_EQ(sorted, expected);
  EXPECT_EQ(t.epoch_of(3, 5), 1);
  EXPECT_EQ(t.batch_indices(1, 5), t.batch_indices(1, 5));
}

TEST(Batches, NoiseDependsOnStep) {
  const TrainConfig c = tiny();
  const auto data = faces(1, 16);
  std::vector<const Sample*> picked = {&data[0]};
  const Batch a = make_batch(c, picked, 0);
  const Batch b = make_batch(c, picked, 0);
  const Batch d = make_batch(c, picked, 1);
  EXPECT_TRUE(std::equal(a.lr.values().begin(), a.lr.values().end(), b.lr.values().begin()));
  EXPECT_FALSE(std::equal(a.lr.values().begin(), a.lr.values().end(), d.lr.values().begin()));
}

TEST(Trainer, DeterministicAcrossRuns) {
  const auto data = faces(4, 16);
  Trainer a(tiny());
  Trainer b(tiny());
  for (int s = 0; s < 3; ++s) {
    const StepMetrics ma = a.train_step(data);
    const StepMetrics mb = b.train_step(data);
    EXPECT_EQ(ma.objective, mb.objective);
    EXPECT_EQ(ma.discriminator, mb.discriminator);
    EXPECT_EQ(ma.step, s + 1);
  }
}

TEST(Trainer, ResumeMatchesUninterruptedRun) {
  const auto data = faces(4, 16);
  const fs::path dir = scratch("resume");
  Trainer straight(tiny());
  std::vector<double> expected;
  for (int s = 0; s < 4; ++s) expected.push_back(straight.train_step(data).objective);

  {
    Trainer first(tiny());
    first.train_step(data);
    first.train_step(data);
    first.save(dir);
  }
  Trainer resumed = Trainer::resume(dir);
  EXPECT_EQ(resumed.step(), 2);
  EXPECT_EQ(resumed.train_step(data).objective, expected[2]);
  EXPECT_EQ(resumed.train_step(data).objective, expected[3]);
}

TEST(Trainer, ResumeRejectsOtherArchitecture) {
  Trainer a(tiny());
  TrainConfig other = tiny();
  other.model.k = 20;
  Trainer b(other);
  EXPECT_THROW(b.restore(a.checkpoint()), ParseError);
}

TEST(Trainer, NoDiscriminatorWhenAdversarialOff) {
  Trainer t(tiny(false));
  EXPECT_EQ(t.discriminator(), nullptr);
  const auto data = faces(2, 16);
  const StepMetrics m = t.train_step(data);
  EXPECT_EQ(m.adversarial, 0.0);
  EXPECT_EQ(m.perceptual, 0.0);
  const nn::Checkpoint ckpt = t.checkpoint();
  for (const auto& blob : ckpt.blobs) EXPECT_NE(blob.name.rfind("d.", 0), 0u) << blob.name;
  bool any_g = false;
  for (const auto& blob : ckpt.blobs) any_g |= blob.name.rfind("g.", 0) == 0;
  EXPECT_TRUE(any_g);
}

TEST(Trainer, NonFiniteBatchRaisesDiverged) {
  Trainer t(tiny());
  const auto data = faces(2, 16);
  std::vector<const Sample*> picked = {&data[0], &data[1]};
  Batch b = make_batch(t.config(), picked, 0);
  b.lr.values()[0] = std::numeric_limits<float>::quiet_NaN();
  try {
    t.train_step(b, 0);
    FAIL() << "expected TrainingDiverged";
  } catch (const TrainingDiverged& e) {
    EXPECT_NE(std::string(e.what()).find("diverged"), std::string::npos);
    EXPECT_FALSE(e.snapshot().empty());
  }
}

TEST(Trainer, FitHonoursEpochsAndStepLimit) {
  const auto data = faces(3, 16);
  TrainConfig c = tiny(false);
  c.epochs = 2;
  Trainer t(c);
  std::vector<int> ends;
  std::vector<double> lrs;
  t.fit(data, [&](const StepMetrics& m) { lrs.push_back(m.learning_rate); }, [&](int e) { ends.push_back(e); });
  EXPECT_EQ(t.step(), 4);
  EXPECT_EQ(ends, (std::vector<int>{0, 1}));
  c.max_steps = 1;
  Trainer limited(c);
  limited.fit(data);
  EXPECT_EQ(limited.step(), 1);
}

TEST(Trainer, LearningRateFollowsSchedule) {
  const auto data = faces(2, 16);
  TrainConfig c = tiny(false);
  c.batch_size = 2;
  c.halving_epochs = 2;
  Trainer t(c);
  std::vector<double> lrs;
  for (int s = 0; s < 5; ++s) lrs.push_back(t.train_step(data).learning_rate);
  EXPECT_DOUBLE_EQ(lrs[0], c.learning_rate);
  EXPECT_DOUBLE_EQ(lrs[1], c.learning_rate);
  EXPECT_DOUBLE_EQ(lrs[2], c.learning_rate / 2);
  EXPECT_DOUBLE_EQ(lrs[4], c.learning_rate / 4);
}

TEST(Trainer, MetricsRowHasEveryColumn) {
  std::ostringstream out;
  write_metrics_header(out, tiny());
  StepMetrics m;
  m.step = 3;
  m.learning_rate = 1.5e-4;
  write_metrics_row(out, m);
  std::istringstream in(out.str());
  std::string line, header, row;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') (header.empty() ? header : row) = line;
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), std::count(row.begin(), row.end(), ','));
  EXPECT_EQ(row.rfind("3,", 0), 0u);
}

TEST(Evaluation, SelfComparisonIsPerfect) {
  const auto data = faces(2, 16);
  std::vector<EvalPair> pairs;
  std::vector<imaging::Image> outputs;
  for (const auto& s : data) {
    const imaging::Image hr = imaging::quantize8(s.hr);
    pairs.push_back({s.name, imaging::degrade(hr, imaging::DegradationSpec::make(imaging::DegradationKind::Bic, 0, 16)), hr});
    outputs.push_back(hr);
  }
  const EvalReport r = evaluate_outputs(pairs, outputs, 8, 2);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_TRUE(std::isinf(r.mean_psnr));
  EXPECT_NEAR(r.mean_ssim, 1.0, 1e-9);
  EXPECT_LT(r.mean_bicubic_psnr, 60.0);
  EXPECT_EQ(r.rows[0].name, data[0].name);
}

TEST(Evaluation, SummarizeMeans) {
  EvalReport r;
  r.rows = {{"a", 20, 0.5, 10, 0.2}, {"b", 30, 0.7, 14, 0.4}};
  summarize(r);
  EXPECT_DOUBLE_EQ(r.mean_psnr, 25.0);
  EXPECT_DOUBLE_EQ(r.mean_ssim, 0.6);
  EXPECT_DOUBLE_EQ(r.mean_bicubic_psnr, 12.0);
  EXPECT_NEAR(r.mean_bicubic_ssim, 0.3, 1e-12);
}

TEST(Evaluation, ReportCsv) {
  EvalReport r;
  r.rows = {{"a", 20, 0.5, 10, 0.2}};
  r.degradation = "BicN";
  summarize(r);
  std::ostringstream out;
  write_report_csv(out, r);
  const std::string text = out.str();
  EXPECT_NE(text.find("# channel = Y"), std::string::npos);
  EXPECT_NE(text.find("# border_crop = 0"), std::string::npos);
  EXPECT_NE(text.find("psnr"), std::string::npos);
  EXPECT_NE(text.find("a,"), std::string::npos);
}

TEST(Evaluation, SuperResolveIsQuantizedAndSized) {
  TrainConfig c = tiny(false);
  model::Generator<float> g(c.model);
  const auto data = faces(3, 16);
  std::vector<imaging::Image> lr;
  for (const auto& s : data) lr.push_back(imaging::degrade(s.hr, imaging::DegradationSpec::make(imaging::DegradationKind::Bic, 0, 16)));
  const auto out = super_resolve(g, lr, 2);
  ASSERT_EQ(out.size(), 3u);
  for (const auto& img : out) {
    EXPECT_EQ(img.height(), 16);
    EXPECT_EQ(img, imaging::quantize8(img));
  }
}

TEST(Evaluation, GridLayout) {
  const imaging::Image hr(64, 64, 3, 0.2f);
  const imaging::Image lr(8, 8, 3, 0.4f);
  const imaging::Image grid = comparison_grid(hr, lr, hr, hr);
  EXPECT_EQ(grid.height(), 64);
  EXPECT_EQ(grid.width(), 4 * 64 + 3 * 2);
  EXPECT_FLOAT_EQ(grid.at(0, 10, 64), 1.0f);
  EXPECT_FLOAT_EQ(grid.at(0, 10, 66), 0.4f);
  EXPECT_FLOAT_EQ(grid.at(0, 10, 0), 0.2f);
}
