#include "facn/nn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "facn/common/error.hpp"

namespace facn::nn {

namespace {

std::string dims_string(const std::vector<int>& dims) {
  std::string s;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(dims[i]);
  }
  return s.empty() ? "1" : s;
}

std::vector<int> parse_dims(const std::string& s) {
  std::vector<int> dims;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, 'x')) dims.push_back(std::stoi(part));
  return dims;
}

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

const Blob* Checkpoint::find(const std::string& name) const {
  for (const auto& b : blobs)
    if (b.name == name) return &b;
  return nullptr;
}

const std::string& Checkpoint::field(const std::string& key) const {
  auto it = fields.find(key);
  if (it == fields.end()) throw ParseError("checkpoint manifest has no field '" + key + "'");
  return it->second;
}

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt) {
  std::filesystem::create_directories(dir / "blobs");
  std::ofstream manifest(dir / "manifest.txt");
  if (!manifest) throw LoadError((dir / "manifest.txt").string(), "cannot write");
  manifest << "# facn checkpoint\n";
  for (const auto& [k, v] : ckpt.fields) manifest << k << " = " << v << "\n";
  for (const auto& blob : ckpt.blobs) {
    const std::string file = "blobs/" + blob.name + ".f32";
    manifest << "blob " << blob.name << " " << dims_string(blob.dims) << " " << file << "\n";
    std::ofstream out(dir / file, std::ios::binary);
    if (!out) throw LoadError((dir / file).string(), "cannot write");
    for (float v : blob.values) {
      const std::uint32_t bits = to_little_endian(std::bit_cast<std::uint32_t>(v));
      out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.txt");
  if (!manifest) throw LoadError((dir / "manifest.txt").string(), "cannot open checkpoint manifest");
  Checkpoint ckpt;
  std::string line;
  while (std::getline(manifest, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("blob ", 0) == 0) {
      std::istringstream ss(line.substr(5));
      Blob blob;
      std::string dims, file;
      if (!(ss >> blob.name >> dims >> file)) throw ParseError("malformed blob line: " + line);
      blob.dims = parse_dims(dims);
      std::size_t count = 1;
      for (int d : blob.dims) count *= static_cast<std::size_t>(d);
      std::ifstream in(dir / file, std::ios::binary);
      if (!in) throw LoadError((dir / file).string(), "missing blob");
      blob.values.resize(count);
      for (float& v : blob.values) {
        std::uint32_t bits = 0;
        if (!in.read(reinterpret_cast<char*>(&bits), sizeof bits))
          throw LoadError((dir / file).string(), "blob is shorter than its manifest entry");
        v = std::bit_cast<float>(to_little_endian(bits));
      }
      ckpt.blobs.push_back(std::move(blob));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("malformed manifest line: " + line);
    ckpt.fields[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return ckpt;
}

}  // namespace facn::nn
