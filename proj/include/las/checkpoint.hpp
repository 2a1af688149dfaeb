#pragma once

#include "las/model.hpp"
#include "las/vocab.hpp"

#include "json.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

namespace las {

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// On-disk training state. Tensor data is 32-bit little-endian regardless of
/// the in-memory scalar; save(load(f)) is byte-identical.
struct Checkpoint {
  std::uint32_t version = 1;
  std::vector<std::string> vocab_symbols;
  ModelParams<float> params;
  std::uint64_t step = 0;
  std::string rng_state;  // mt19937_64 stream state, textual
  std::string config_json;
};

namespace detail {

inline void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), 8);
}

inline void write_str(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  if (!in) throw CheckpointError("truncated checkpoint (u32)");
  return v;
}

inline std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  if (!in) throw CheckpointError("truncated checkpoint (u64)");
  return v;
}

inline std::string read_str(std::istream& in) {
  const std::uint32_t n = read_u32(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw CheckpointError("truncated checkpoint (string)");
  return s;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open for write: " + path);
  out.write("LASCKPT1", 8);
  detail::write_u32(out, ckpt.version);
  detail::write_u64(out, ckpt.step);
  detail::write_str(out, ckpt.rng_state);
  detail::write_str(out, ckpt.config_json);
  detail::write_u32(out, static_cast<std::uint32_t>(ckpt.vocab_symbols.size()));
  for (const auto& s : ckpt.vocab_symbols) detail::write_str(out, s);

  std::uint32_t count = 0;
  ckpt.params.for_each_tensor(
      [&](const std::string&, Eigen::MatrixXf&) { ++count; });
  detail::write_u32(out, count);
  ckpt.params.for_each_tensor([&](const std::string& name, Eigen::MatrixXf& m) {
    detail::write_str(out, name);
    detail::write_u32(out, 2);  // rank
    detail::write_u32(out, static_cast<std::uint32_t>(m.rows()));
    detail::write_u32(out, static_cast<std::uint32_t>(m.cols()));
    // Row-major element order on disk.
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const float v = m(r, c);
        out.write(reinterpret_cast<const char*>(&v), 4);
      }
  });
  if (!out) throw CheckpointError("write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "LASCKPT1", 8) != 0)
    throw CheckpointError("bad checkpoint magic: " + path);
  Checkpoint ckpt;
  ckpt.version = detail::read_u32(in);
  ckpt.step = detail::read_u64(in);
  ckpt.rng_state = detail::read_str(in);
  ckpt.config_json = detail::read_str(in);
  const std::uint32_t nsym = detail::read_u32(in);
  for (std::uint32_t i = 0; i < nsym; ++i)
    ckpt.vocab_symbols.push_back(detail::read_str(in));

  nlohmann::json cfg = nlohmann::json::parse(ckpt.config_json);
  ModelConfig mc;
  mc.input_dim = cfg.at("input_dim").get<int>();
  mc.enc_hidden_per_dir = cfg.at("enc_hidden_per_dir").get<int>();
  mc.pyramid_layers = cfg.at("pyramid_layers").get<int>();
  mc.dec_hidden = cfg.at("dec_hidden").get<int>();
  mc.embed_dim = cfg.at("embed_dim").get<int>();
  mc.key_width = cfg.at("key_width").get<int>();
  mc.char_hidden = cfg.at("char_hidden").get<int>();
  ckpt.params = ModelParams<float>::sized(mc, static_cast<int>(nsym),
                                          static_cast<int>(nsym) - 1);

  const std::uint32_t ntensor = detail::read_u32(in);
  std::uint32_t seen = 0;
  ckpt.params.for_each_tensor([&](const std::string& name, Eigen::MatrixXf& m) {
    const std::string got = detail::read_str(in);
    if (got != name)
      throw CheckpointError("tensor order mismatch: expected " + name +
                            ", found " + got);
    if (detail::read_u32(in) != 2) throw CheckpointError("bad tensor rank");
    const std::uint32_t rows = detail::read_u32(in);
    const std::uint32_t cols = detail::read_u32(in);
    if (rows != m.rows() || cols != m.cols())
      throw CheckpointError("tensor shape mismatch for " + name);
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c) {
        float v;
        in.read(reinterpret_cast<char*>(&v), 4);
        if (!in) throw CheckpointError("truncated tensor data: " + name);
        m(r, c) = v;
      }
    ++seen;
  });
  if (seen != ntensor) throw CheckpointError("tensor count mismatch");
  return ckpt;
}

inline std::string serialize_model_config(const ModelConfig& mc) {
  nlohmann::json cfg = {{"input_dim", mc.input_dim},
                        {"enc_hidden_per_dir", mc.enc_hidden_per_dir},
                        {"pyramid_layers", mc.pyramid_layers},
                        {"dec_hidden", mc.dec_hidden},
                        {"embed_dim", mc.embed_dim},
                        {"key_width", mc.key_width},
                        {"char_hidden", mc.char_hidden}};
  return cfg.dump();
}

}  // namespace las
