#pragma once

#include <map>
#include <string>

namespace gliopipe {

/// FNV-1a 64-bit checksum of a file's bytes, hex string.
std::string file_checksum(const std::string& path);

std::string string_checksum(const std::string& content);

/// Writes content via a temp file + rename so readers never see partial data.
void atomic_write_text(const std::string& path, const std::string& content);

/// Stage manifest: a checksummed payload (stage, config hash, seed, input and
/// output checksums) plus a timestamp outside the checksummed part.
struct Manifest {
  std::string stage;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> inputs;   // path -> checksum
  std::map<std::string, std::string> outputs;  // path -> checksum

  void add_input(const std::string& path);
  void add_output(const std::string& path);
  std::string to_json() const;
};

void write_manifest(const Manifest& m, const std::string& dir);

}  // namespace gliopipe
