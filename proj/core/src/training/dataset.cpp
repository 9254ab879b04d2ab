#include "facn/training/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "facn/common/error.hpp"
#include "facn/common/rng.hpp"
#include "facn/imaging/png_io.hpp"
#include "facn/imaging/resample.hpp"
#include "facn/training/synthetic_faces.hpp"

namespace facn::training {

namespace {

std::vector<std::string> split_fields(std::string line) {
  std::replace(line.begin(), line.end(), ',', ' ');
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string f;
  while (ss >> f) out.push_back(f);
  return out;
}

bool is_count_line(const std::vector<std::string>& f) {
  return f.size() == 1 && !f[0].empty() && std::all_of(f[0].begin(), f[0].end(), ::isdigit);
}

}  // namespace

AttributeTable parse_attribute_table(std::istream& in, const std::string& source) {
  std::string line;
  int line_no = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++line_no;
    auto f = split_fields(line);
    if (f.empty() || is_count_line(f)) continue;
    header = std::move(f);
  }
  if (header.empty()) throw ParseError(source + ": missing header row");
  // Some tables name the file column in the header.
  if (!header.empty() && (header[0] == "filename" || header[0] == "file" || header[0] == "image_id"))
    header.erase(header.begin());

  AttributeTable table;
  std::vector<std::size_t> columns;
  for (auto name : kAttributeNames) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError(source + ": attribute column '" + std::string(name) + "' not found");
    columns.push_back(static_cast<std::size_t>(it - header.begin()));
    table.names.emplace_back(name);
  }

  while (std::getline(in, line)) {
    ++line_no;
    const auto f = split_fields(line);
    if (f.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    if (f.size() != header.size() + 1)
      throw ParseError(where + ": expected " + std::to_string(header.size() + 1) + " fields, got " +
                       std::to_string(f.size()));
    AttributeTable::Row row;
    row.file = f[0];
    for (std::size_t col : columns) {
      const std::string& v = f[col + 1];
      if (v == "1" || v == "+1")
        row.values.push_back(1.0f);
      else if (v == "-1")
        row.values.push_back(0.0f);
      else
        throw ParseError(where + ": attribute value '" + v + "' for " + row.file + " is not +-1");
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

AttributeTable load_attribute_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError(path.string(), "cannot open attribute table");
  return parse_attribute_table(in, path.string());
}

imaging::Image prepare_face(const imaging::Image& img, int size) {
  const int side = std::min(img.height(), img.width());
  imaging::Image crop = img;
  if (img.height() != img.width()) {
    crop = imaging::Image(side, side, img.channels());
    const int y0 = (img.height() - side) / 2;
    const int x0 = (img.width() - side) / 2;
    for (int c = 0; c < img.channels(); ++c)
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) crop.at(c, y, x) = img.at(c, y + y0, x + x0);
  }
  if (side == size) return crop;
  imaging::Image out = imaging::bicubic_resize(crop, size, size, true);
  out.clamp01();
  return out;
}

Dataset load_dataset(const DatasetManifest& manifest) {
  const AttributeTable table = load_attribute_table(manifest.attribute_table);
  std::vector<Sample> samples;
  samples.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    const auto path = manifest.image_dir / row.file;
    if (!std::filesystem::exists(path)) throw LoadError(path.string(), "image listed in the attribute table is missing");
    imaging::Image img = imaging::read_png(path);
    if (img.channels() != 3) throw LoadError(path.string(), "expected an RGB image");
    samples.push_back({row.file, prepare_face(img, manifest.hr_size), row.values});
  }
  // Sort first so the order depends only on the seed, not on the table layout.
  std::sort(samples.begin(), samples.end(), [](const Sample& a, const Sample& b) { return a.name < b.name; });
  Rng rng(derive_seed(manifest.seed, {0xda7a}));
  std::shuffle(samples.begin(), samples.end(), rng);

  const std::size_t n_test = std::min<std::size_t>(static_cast<std::size_t>(manifest.test), samples.size());
  Dataset ds;
  ds.test.assign(std::make_move_iterator(samples.begin()), std::make_move_iterator(samples.begin() + n_test));
  std::size_t n_train = samples.size() - n_test;
  if (manifest.train > 0) n_train = std::min<std::size_t>(n_train, static_cast<std::size_t>(manifest.train));
  ds.train.assign(std::make_move_iterator(samples.begin() + n_test),
                  std::make_move_iterator(samples.begin() + n_test + n_train));
  return ds;
}

}  // namespace facn::training
