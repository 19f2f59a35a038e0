#include "gliopipe/manifest.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gliopipe/errors.hpp"

namespace gliopipe {

using json = nlohmann::json;

namespace {
std::string fnv_hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}
}  // namespace

std::string string_checksum(const std::string& content) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : content) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return fnv_hex(h);
}

std::string file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot checksum missing file: " + path);
  std::uint64_t h = 1469598103934665603ull;
  char buf[65536];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (!in) break;
  }
  return fnv_hex(h);
}

void atomic_write_text(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot create: " + path);
    out << content;
    if (!out) throw IoError("failed writing: " + path);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot finalize: " + path);
}

void Manifest::add_input(const std::string& path) { inputs[path] = file_checksum(path); }
void Manifest::add_output(const std::string& path) { outputs[path] = file_checksum(path); }

std::string Manifest::to_json() const {
  json payload;
  payload["stage"] = stage;
  payload["config_hash"] = config_hash;
  payload["seed"] = seed;
  payload["inputs"] = inputs;
  payload["outputs"] = outputs;
  payload["version"] = 1;

  json j;
  j["payload"] = payload;
  j["payload_checksum"] = string_checksum(payload.dump());
  j["timestamp"] = std::chrono::duration_cast<std::chrono::seconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                       .count();
  return j.dump(2);
}

void write_manifest(const Manifest& m, const std::string& dir) {
  const std::string d = dir.empty() ? "." : dir;
  std::filesystem::create_directories(d);
  atomic_write_text((std::filesystem::path(d) / "manifest.json").string(), m.to_json());
}

}  // namespace gliopipe
