#include "facn/training/synthetic_faces.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "facn/common/error.hpp"
#include "facn/common/rng.hpp"
#include "facn/imaging/png_io.hpp"

namespace facn::training {

namespace {

enum Attr {
  kMale, kYoung, kNoBeard, kGoatee, kMustache, kSideburns, kSmiling, kEyeglasses, kHat, kBald,
  kBangs, kBigNose, kBigLips, kPointyNose, kNarrowEyes, kBags, kMakeup, kMouthOpen
};

struct Rgb {
  double r, g, b;
};

Rgb mix(const Rgb& a, const Rgb& b, double t) {
  return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

// Coverage of a shape given its signed distance (negative inside), in pixel units.
double coverage(double sd, double px) { return std::clamp(0.5 - sd / px, 0.0, 1.0); }

double ellipse_sd(double x, double y, double cx, double cy, double rx, double ry) {
  const double dx = (x - cx) / rx;
  const double dy = (y - cy) / ry;
  return (std::sqrt(dx * dx + dy * dy) - 1.0) * std::min(rx, ry);
}

double box_sd(double x, double y, double x0, double y0, double x1, double y1) {
  const double dx = std::max(x0 - x, x - x1);
  const double dy = std::max(y0 - y, y - y1);
  return std::max(dx, dy);
}

class Canvas {
 public:
  Canvas(int size) : size_(size), px_(1.0 / size), img_(size, size, 3) {}

  template <typename Shape>
  void paint(const Rgb& colour, double alpha, Shape sd) {
    for (int y = 0; y < size_; ++y)
      for (int x = 0; x < size_; ++x) {
        const double u = (x + 0.5) * px_;
        const double v = (y + 0.5) * px_;
        const double a = alpha * coverage(sd(u, v), px_);
        if (a <= 0) continue;
        img_.at(0, y, x) = static_cast<float>(img_.at(0, y, x) * (1 - a) + colour.r * a);
        img_.at(1, y, x) = static_cast<float>(img_.at(1, y, x) * (1 - a) + colour.g * a);
        img_.at(2, y, x) = static_cast<float>(img_.at(2, y, x) * (1 - a) + colour.b * a);
      }
  }

  template <typename Field>
  void fill(Field f) {
    for (int y = 0; y < size_; ++y)
      for (int x = 0; x < size_; ++x) {
        const Rgb c = f((x + 0.5) * px_, (y + 0.5) * px_);
        img_.at(0, y, x) = static_cast<float>(c.r);
        img_.at(1, y, x) = static_cast<float>(c.g);
        img_.at(2, y, x) = static_cast<float>(c.b);
      }
  }

  double px() const { return px_; }
  imaging::Image take() {
    img_.clamp01();
    return std::move(img_);
  }

 private:
  int size_;
  double px_;
  imaging::Image img_;
};

}  // namespace

SyntheticFace render_synthetic_face(std::uint64_t seed, int size) {
  Rng rng(derive_seed(seed, {0x5eed}));
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  auto chance = [&](double p) { return uni(rng) < p; };
  auto jitter = [&](double s) { return (uni(rng) - 0.5) * 2.0 * s; };

  std::vector<float> a(kAttributeNames.size(), 0.0f);
  a[kMale] = chance(0.45);
  a[kYoung] = chance(0.75);
  const bool male = a[kMale] > 0;
  if (male) {
    a[kGoatee] = chance(0.2);
    a[kMustache] = chance(0.2);
    a[kSideburns] = chance(0.2);
    a[kBald] = chance(0.15);
  }
  a[kNoBeard] = (a[kGoatee] + a[kMustache] + a[kSideburns]) > 0 ? 0.0f : 1.0f;
  a[kSmiling] = chance(0.5);
  a[kMouthOpen] = chance(0.45);
  a[kEyeglasses] = chance(0.15);
  a[kHat] = chance(0.12);
  a[kBangs] = a[kBald] > 0 || a[kHat] > 0 ? 0.0f : static_cast<float>(chance(0.3));
  a[kBigNose] = chance(0.25);
  a[kPointyNose] = a[kBigNose] > 0 ? 0.0f : static_cast<float>(chance(0.3));
  a[kBigLips] = chance(0.25);
  a[kNarrowEyes] = chance(0.15);
  a[kBags] = chance(a[kYoung] > 0 ? 0.1 : 0.5);
  a[kMakeup] = male ? 0.0f : static_cast<float>(chance(0.4));

  const Rgb bg_top{0.3 + 0.6 * uni(rng), 0.3 + 0.6 * uni(rng), 0.3 + 0.6 * uni(rng)};
  const Rgb bg_bottom = mix(bg_top, Rgb{uni(rng), uni(rng), uni(rng)}, 0.6);
  const double tone = uni(rng);
  const Rgb skin = mix(Rgb{0.96, 0.82, 0.70}, Rgb{0.45, 0.30, 0.20}, tone);
  const Rgb hair = mix(Rgb{0.08, 0.06, 0.05}, Rgb{0.80, 0.62, 0.30}, uni(rng) * uni(rng));
  const Rgb dark = mix(skin, Rgb{0.1, 0.05, 0.05}, 0.7);
  const Rgb lips = a[kMakeup] > 0 ? Rgb{0.75, 0.1, 0.2} : mix(skin, Rgb{0.6, 0.25, 0.25}, 0.5);
  const Rgb iris = mix(Rgb{0.15, 0.1, 0.05}, Rgb{0.2, 0.45, 0.7}, uni(rng));

  const double cx = 0.5 + jitter(0.03);
  const double cy = 0.52 + jitter(0.03);
  const double fw = (male ? 0.27 : 0.25) + jitter(0.015);
  const double fh = 0.34 + jitter(0.015);
  const double light = jitter(0.25);

  Canvas cv(size);
  cv.fill([&](double, double v) { return mix(bg_top, bg_bottom, v); });

  // Neck and shoulders.
  cv.paint(mix(skin, dark, 0.15), 1.0, [&](double x, double y) { return box_sd(x, y, cx - 0.1, cy + 0.2, cx + 0.1, 1.1); });
  const Rgb shirt{uni(rng), uni(rng), uni(rng)};
  cv.paint(shirt, 1.0, [&](double x, double y) { return ellipse_sd(x, y, cx, 1.08, 0.45, 0.2); });

  // Hair volume behind the head.
  if (a[kBald] == 0) {
    const double long_hair = male ? 0.0 : 0.18 + jitter(0.05);
    cv.paint(hair, 1.0, [&](double x, double y) {
      return std::min(ellipse_sd(x, y, cx, cy - 0.06, fw + 0.05, fh + 0.02),
                      box_sd(x, y, cx - fw - 0.05, cy - 0.05, cx + fw + 0.05, cy + long_hair));
    });
  }

  // Head with horizontal shading.
  const double jaw = male ? 0.9 : 0.8;
  for (int pass = 0; pass < 2; ++pass) {
    const Rgb shade = pass == 0 ? skin : mix(skin, Rgb{1, 1, 1}, 0.15);
    const double shift = pass == 0 ? 0.0 : light * fw;
    cv.paint(shade, pass == 0 ? 1.0 : 0.5, [&](double x, double y) {
      const double sd = ellipse_sd(x, y, cx + shift * 0.5, cy, fw * (pass == 0 ? 1.0 : 0.6),
                                   fh * (pass == 0 ? 1.0 : 0.7));
      const double chin = y > cy ? ellipse_sd(x, y, cx, cy, fw * jaw, fh) : sd;
      return std::max(sd, chin);
    });
  }

  // Ears.
  for (double side : {-1.0, 1.0})
    cv.paint(mix(skin, dark, 0.1), 1.0,
             [&](double x, double y) { return ellipse_sd(x, y, cx + side * (fw + 0.005), cy + 0.0, 0.03, 0.06); });

  if (a[kSideburns] > 0)
    for (double side : {-1.0, 1.0})
      cv.paint(hair, 0.95, [&](double x, double y) {
        const double inner = cx + side * (fw - 0.03);
        const double outer = cx + side * (fw + 0.01);
        return box_sd(x, y, std::min(inner, outer), cy - 0.12, std::max(inner, outer), cy + 0.12);
      });

  // Fringe or hairline.
  if (a[kBald] == 0 && a[kHat] == 0) {
    const double line = a[kBangs] > 0 ? cy - 0.12 : cy - fh * 0.72;
    cv.paint(hair, 1.0, [&](double x, double y) {
      return std::max(ellipse_sd(x, y, cx, cy - 0.03, fw + 0.01, fh + 0.01), y - line);
    });
  }

  // Eyes.
  const double eye_y = cy - 0.04;
  const double eye_dx = fw * 0.42;
  const double eye_h = a[kNarrowEyes] > 0 ? 0.012 : 0.026;
  for (double side : {-1.0, 1.0}) {
    const double ex = cx + side * eye_dx;
    if (a[kMakeup] > 0)
      cv.paint(Rgb{0.45, 0.25, 0.5}, 0.6, [&](double x, double y) { return ellipse_sd(x, y, ex, eye_y - 0.012, 0.06, 0.03); });
    if (a[kBags] > 0)
      cv.paint(dark, 0.45, [&](double x, double y) { return ellipse_sd(x, y, ex, eye_y + 0.03, 0.045, 0.012); });
    cv.paint(Rgb{0.97, 0.97, 0.97}, 1.0, [&](double x, double y) { return ellipse_sd(x, y, ex, eye_y, 0.045, eye_h); });
    cv.paint(iris, 1.0, [&](double x, double y) {
      return std::max(ellipse_sd(x, y, ex + light * 0.01, eye_y, 0.018, 0.018), ellipse_sd(x, y, ex, eye_y, 0.045, eye_h));
    });
    cv.paint(Rgb{0.02, 0.02, 0.02}, 1.0, [&](double x, double y) { return ellipse_sd(x, y, ex + light * 0.01, eye_y, 0.008, 0.008); });
    // Brow.
    const double brow_y = eye_y - 0.055 - (a[kYoung] > 0 ? 0.0 : 0.005);
    cv.paint(hair, 0.9, [&](double x, double y) { return ellipse_sd(x, y, ex, brow_y, 0.05, male ? 0.012 : 0.008); });
  }
  if (a[kEyeglasses] > 0) {
    const Rgb frame{0.05, 0.05, 0.08};
    for (double side : {-1.0, 1.0})
      cv.paint(frame, 1.0, [&](double x, double y) {
        return std::abs(ellipse_sd(x, y, cx + side * eye_dx, eye_y, 0.07, 0.05)) - 0.006;
      });
    cv.paint(frame, 1.0, [&](double x, double y) { return box_sd(x, y, cx - eye_dx + 0.07, eye_y - 0.006, cx + eye_dx - 0.07, eye_y + 0.002); });
  }

  // Nose.
  const double nose_w = a[kBigNose] > 0 ? 0.05 : 0.032;
  const double nose_len = a[kPointyNose] > 0 ? 0.11 : 0.08;
  cv.paint(mix(skin, dark, 0.35), 0.9, [&](double x, double y) {
    return ellipse_sd(x, y, cx + light * 0.01, eye_y + nose_len, nose_w, a[kPointyNose] > 0 ? 0.018 : 0.025);
  });
  cv.paint(mix(skin, dark, 0.15), 0.7, [&](double x, double y) {
    return box_sd(x, y, cx - 0.006 + light * 0.01, eye_y + 0.02, cx + 0.006 + light * 0.01, eye_y + nose_len);
  });

  // Beard, goatee, moustache.
  const double mouth_y = cy + fh * 0.5;
  if (a[kGoatee] > 0)
    cv.paint(hair, 0.95, [&](double x, double y) { return ellipse_sd(x, y, cx, mouth_y + 0.08, 0.06, 0.06); });
  if (a[kMustache] > 0)
    cv.paint(hair, 0.95, [&](double x, double y) { return ellipse_sd(x, y, cx, mouth_y - 0.035, 0.075, 0.018); });

  // Mouth.
  const double mouth_w = a[kSmiling] > 0 ? 0.085 : 0.065;
  const double lip_h = a[kBigLips] > 0 ? 0.028 : 0.016;
  cv.paint(lips, 1.0, [&](double x, double y) {
    const double curve = a[kSmiling] > 0 ? -3.0 * (x - cx) * (x - cx) : 0.0;
    return ellipse_sd(x, y + curve, cx, mouth_y, mouth_w, lip_h);
  });
  if (a[kMouthOpen] > 0)
    cv.paint(Rgb{0.15, 0.02, 0.04}, 1.0, [&](double x, double y) {
      const double curve = a[kSmiling] > 0 ? -3.0 * (x - cx) * (x - cx) : 0.0;
      return ellipse_sd(x, y + curve, cx, mouth_y, mouth_w * 0.7, lip_h * 0.55);
    });
  else
    cv.paint(dark, 0.8, [&](double x, double y) {
      const double curve = a[kSmiling] > 0 ? -3.0 * (x - cx) * (x - cx) : 0.0;
      return ellipse_sd(x, y + curve, cx, mouth_y, mouth_w * 0.95, 0.003);
    });

  // Age lines.
  if (a[kYoung] == 0)
    for (double side : {-1.0, 1.0})
      cv.paint(dark, 0.35, [&](double x, double y) {
        return std::abs(ellipse_sd(x, y, cx + side * 0.06, mouth_y - 0.02, 0.05, 0.07)) - 0.002 +
               std::max(0.0, cy + 0.02 - y);
      });

  if (a[kHat] > 0) {
    const Rgb hat{uni(rng) * 0.6, uni(rng) * 0.6, uni(rng) * 0.6};
    cv.paint(hat, 1.0, [&](double x, double y) {
      return std::min(ellipse_sd(x, y, cx, cy - fh * 0.7, fw + 0.02, 0.16) + std::max(0.0, y - (cy - fh * 0.6)) * 10,
                      box_sd(x, y, cx - fw - 0.09, cy - fh * 0.68, cx + fw + 0.09, cy - fh * 0.6));
    });
  }

  return {cv.take(), std::move(a)};
}

void write_synthetic_corpus(const std::filesystem::path& dir, int count, std::uint64_t seed, int size) {
  std::filesystem::create_directories(dir);
  std::ostringstream table;
  table << count << "\n";
  for (std::size_t i = 0; i < kAttributeNames.size(); ++i) table << (i ? " " : "") << kAttributeNames[i];
  table << "\n";
  for (int i = 0; i < count; ++i) {
    std::ostringstream name;
    name << "face_" << std::setw(5) << std::setfill('0') << i << ".png";
    const SyntheticFace face = render_synthetic_face(derive_seed(seed, {static_cast<std::uint64_t>(i)}), size);
    imaging::write_png(dir / name.str(), face.image);
    table << name.str();
    for (float v : face.attributes) table << (v > 0 ? "  1" : " -1");
    table << "\n";
  }
  std::ofstream out(dir / "attributes.txt");
  if (!out) throw LoadError((dir / "attributes.txt").string(), "cannot write attribute table");
  out << table.str();
}

}  // namespace facn::training
