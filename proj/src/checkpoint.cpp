#include "checkpoint.hpp"

#include <cstring>

#include "common.hpp"
#include "json.hpp"

namespace ear {

namespace {

constexpr char kMagic[8] = {'E', 'A', 'R', 'C', 'K', 'P', 'T', '1'};

void put_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64_le(std::string& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof(bits));
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32_le(const std::string& s, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[off + i])) << (8 * i);
  return v;
}

double get_f64_le(const std::string& s, std::size_t off) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[off + i])) << (8 * i);
  double d;
  std::memcpy(&d, &bits, sizeof(d));
  return d;
}

nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"L", c.L},         {"N", c.N},           {"d_m", c.d_m},
          {"d_k", c.d_k},     {"d_v", c.d_v},       {"d_ff", c.d_ff},
          {"V", c.V},         {"max_len", c.max_len}, {"num_classes", c.num_classes},
          {"attention_dropout", c.attention_dropout}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.L = j.at("L").get<int>();
  c.N = j.at("N").get<int>();
  c.d_m = j.at("d_m").get<int>();
  c.d_k = j.at("d_k").get<int>();
  c.d_v = j.at("d_v").get<int>();
  c.d_ff = j.at("d_ff").get<int>();
  c.V = j.at("V").get<int>();
  c.max_len = j.at("max_len").get<int>();
  c.num_classes = j.at("num_classes").get<int>();
  c.attention_dropout = j.at("attention_dropout").get<double>();
  return c;
}

}  // namespace

void Checkpoint::save(const std::string& path) const {
  params.validate_against(config);

  nlohmann::json header;
  header["config"] = config_to_json(config);
  header["vocab_hash"] = to_hex(vocab_hash);
  nlohmann::json tensor_list = nlohmann::json::array();
  for (const auto& [name, m] : params.tensors) {
    tensor_list.push_back({{"name", name},
                           {"rows", static_cast<int>(m.rows())},
                           {"cols", static_cast<int>(m.cols())}});
  }
  header["tensors"] = tensor_list;
  const std::string header_str = header.dump();

  std::string payload;
  payload.append(kMagic, sizeof(kMagic));
  put_u32_le(payload, static_cast<std::uint32_t>(header_str.size()));
  payload += header_str;
  for (const auto& [name, m] : params.tensors) {
    (void)name;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) put_f64_le(payload, m(i, j));
    }
  }
  write_file_atomic(path, payload);
}

Checkpoint Checkpoint::load(const std::string& path) {
  const std::string payload = read_file(path);
  if (payload.size() < sizeof(kMagic) + 4 ||
      std::memcmp(payload.data(), kMagic, sizeof(kMagic)) != 0) {
    throw input_error(path + ": not a model checkpoint (bad magic)");
  }
  const std::uint32_t header_len = get_u32_le(payload, sizeof(kMagic));
  std::size_t off = sizeof(kMagic) + 4;
  if (payload.size() < off + header_len) throw input_error(path + ": truncated checkpoint header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(payload.substr(off, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw input_error(path + ": corrupt checkpoint header: " + e.what());
  }
  off += header_len;

  Checkpoint ckpt;
  try {
    ckpt.config = config_from_json(header.at("config"));
    ckpt.vocab_hash = std::stoull(header.at("vocab_hash").get<std::string>(), nullptr, 16);
    for (const auto& t : header.at("tensors")) {
      const std::string name = t.at("name").get<std::string>();
      const int rows = t.at("rows").get<int>();
      const int cols = t.at("cols").get<int>();
      if (rows < 1 || cols < 1) throw input_error(path + ": bad tensor shape for " + name);
      const std::size_t count = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
      if (payload.size() < off + count * 8) {
        throw input_error(path + ": truncated tensor data for " + name);
      }
      Mat m(rows, cols);
      for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
          m(i, j) = get_f64_le(payload, off);
          off += 8;
        }
      }
      ckpt.params.tensors[name] = std::move(m);
    }
  } catch (const nlohmann::json::exception& e) {
    throw input_error(path + ": malformed checkpoint header: " + e.what());
  }
  if (off != payload.size()) throw input_error(path + ": trailing bytes after tensor data");
  ckpt.params.validate_against(ckpt.config);
  return ckpt;
}

}  // namespace ear
