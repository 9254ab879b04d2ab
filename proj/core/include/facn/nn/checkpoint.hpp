#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace facn::nn {

/// A named float32 array stored as raw little-endian bytes.
struct Blob {
  std::string name;
  std::vector<int> dims;
  std::vector<float> values;
};

/// On-disk layout of a checkpoint directory:
///   manifest.txt       "# ..." comment lines, "key = value" fields, then one
///                      "blob <name> <d0>x<d1>... <file>" line per blob
///   blobs/<name>.f32   raw little-endian float32, row-major
struct Checkpoint {
  std::map<std::string, std::string> fields;
  std::vector<Blob> blobs;

  const Blob* find(const std::string& name) const;
  const std::string& field(const std::string& key) const;
};

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace facn::nn
