#pragma once

#include <cstdint>
#include <string>

#include "model.hpp"

namespace ear {

// Self-describing model container: 8-byte magic "EARCKPT1", a u32
// little-endian JSON header length, the JSON header (config, vocabulary
// hash, tensor names/shapes in order), then the tensor payloads as
// little-endian 64-bit floats, row-major, in header order.
struct Checkpoint {
  ModelConfig config;
  std::uint64_t vocab_hash = 0;
  Parameters params;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

}  // namespace ear
