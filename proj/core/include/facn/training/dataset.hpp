#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include "facn/imaging/image.hpp"

namespace facn::training {

/// Parsed attribute annotations. Values are already mapped from +-1 to {0,1}.
struct AttributeTable {
  std::vector<std::string> names;  ///< the columns kept, kAttributeNames order
  struct Row {
    std::string file;
    std::vector<float> values;
  };
  std::vector<Row> rows;
};

/// Accepts the CelebA layout (optional leading count line, header of attribute names, then
/// `file v1 .. vN` rows) with whitespace or comma separators. Only the 18 supervised columns
/// are kept, selected by name. Values must be -1 or 1.
AttributeTable parse_attribute_table(std::istream& in, const std::string& source = "attributes");
AttributeTable load_attribute_table(const std::filesystem::path& path);

struct Sample {
  std::string name;
  imaging::Image hr;
  std::vector<float> attributes;
};

struct DatasetManifest {
  std::filesystem::path image_dir;
  std::filesystem::path attribute_table;
  int train = 0;  ///< 0: every image not in the test split
  int test = 0;
  int hr_size = 128;
  std::uint64_t seed = 1;
};

struct Dataset {
  std::vector<Sample> train;
  std::vector<Sample> test;
};

/// Centre square crop followed by an antialiased bicubic resize to size x size.
imaging::Image prepare_face(const imaging::Image& img, int size);

/// Loads every row of the table (missing files throw LoadError naming the file), shuffles with
/// the manifest seed and splits off the test images first.
Dataset load_dataset(const DatasetManifest& manifest);

}  // namespace facn::training
