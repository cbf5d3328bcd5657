#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ear {

// All library failures are reported through these two exception types.
// input_error covers bad user input (files, formats, option values) and maps
// to exit code 2 at the CLI; internal_error covers everything else (code 1).
class input_error : public std::runtime_error {
public:
  explicit input_error(const std::string& msg) : std::runtime_error(msg) {}
};

class internal_error : public std::runtime_error {
public:
  explicit internal_error(const std::string& msg) : std::runtime_error(msg) {}
};

// FNV-1a, used for dataset/vocabulary fingerprints in manifests and
// checkpoints. Not cryptographic, just a stable content id.
std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string to_hex(std::uint64_t value);

std::string read_file(const std::string& path);
// Writes to <path>.tmp and renames so readers never observe partial files.
void write_file_atomic(const std::string& path, const std::string& content);
std::uint64_t hash_file(const std::string& path);

void ensure_dir(const std::string& path);
bool file_exists(const std::string& path);

}  // namespace ear
