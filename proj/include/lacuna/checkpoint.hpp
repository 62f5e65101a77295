#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lacuna/error.hpp"
#include "lacuna/model.hpp"
#include "lacuna/vocab.hpp"

namespace lacuna {

inline constexpr char kCheckpointMagic[8] = {'L', 'A', 'C', 'M', 'L', 'M', '0', '1'};

struct TrainingMeta {
  std::string regime;  // e.g. "random-dynamic"
  std::size_t epoch = 0;
  double dev_accuracy = 0.0;
  std::uint64_t seed = 0;
};

/// A trained model bound to the vocabulary it was trained with.
struct Checkpoint {
  Vocabulary vocab;
  BiLstmMlm<float> model;
  TrainingMeta meta;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  std::string_view take(std::size_t n) {
    if (n > data_.size() - pos_) throw Error(ErrorCode::BadCheckpoint, "truncated checkpoint");
    const auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::uint64_t uint(int bytes) {
    const auto raw = take(static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(raw[static_cast<std::size_t>(i)]);
    return v;
  }

  bool done() const { return pos_ == data_.size(); }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

inline std::string encode_vocab(const Vocabulary& vocab) {
  std::string out;
  for (char32_t ch : vocab.characters()) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%s%X", out.empty() ? "" : " ", static_cast<unsigned>(ch));
    out += buf;
  }
  return out;
}

inline Vocabulary decode_vocab(const std::string& text) {
  std::vector<char32_t> chars;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) chars.push_back(static_cast<char32_t>(std::stoul(tok, nullptr, 16)));
  return Vocabulary(std::move(chars));
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Layout: 8-byte magic "LACMLM01"; u64 length + key=value metadata text;
/// u32 tensor count; per tensor u32 name length, name, u32 rank, u64 dims,
/// then row-major float32 values. All integers and floats little-endian.
inline std::string serialize_checkpoint(const Checkpoint& ckpt) {
  const ModelConfig& c = ckpt.model.config();
  std::string meta;
  meta += "format=1\n";
  meta += "vocab_size=" + std::to_string(c.vocab_size) + "\n";
  meta += "embedding_dim=" + std::to_string(c.embedding_dim) + "\n";
  meta += "hidden_dim=" + std::to_string(c.hidden_dim) + "\n";
  meta += "projection_dim=" + std::to_string(c.projection_dim) + "\n";
  meta += "layers=" + std::to_string(c.layers) + "\n";
  meta += "bidirectional=" + std::string(c.bidirectional ? "1" : "0") + "\n";
  meta += "vocab_digest=" + ckpt.vocab.digest() + "\n";
  meta += "vocab=" + detail::encode_vocab(ckpt.vocab) + "\n";
  meta += "regime=" + ckpt.meta.regime + "\n";
  meta += "epoch=" + std::to_string(ckpt.meta.epoch) + "\n";
  meta += "dev_accuracy=" + detail::format_double(ckpt.meta.dev_accuracy) + "\n";
  meta += "seed=" + std::to_string(ckpt.meta.seed) + "\n";

  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put_u64(out, meta.size());
  out += meta;
  const auto& params = ckpt.model.parameters();
  detail::put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& name = params.names[k];
    const auto& m = params.values[k];
    detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    const bool vector = m.cols() == 1;
    detail::put_u32(out, vector ? 1 : 2);
    detail::put_u64(out, static_cast<std::uint64_t>(m.rows()));
    if (!vector) detail::put_u64(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) detail::put_u32(out, std::bit_cast<std::uint32_t>(m(i, j)));
    }
  }
  return out;
}

inline Checkpoint deserialize_checkpoint(std::string_view data) {
  detail::Reader in(data);
  if (in.take(8) != std::string_view(kCheckpointMagic, 8)) throw Error(ErrorCode::BadCheckpoint, "bad checkpoint magic");
  const std::uint64_t meta_len = in.uint(8);
  const std::string meta_text(in.take(meta_len));
  std::map<std::string, std::string> meta;
  std::istringstream lines(meta_text);
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::BadCheckpoint, "bad metadata line: " + line);
    meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const std::string& key) -> const std::string& {
    const auto it = meta.find(key);
    if (it == meta.end()) throw Error(ErrorCode::BadCheckpoint, "checkpoint metadata lacks " + key);
    return it->second;
  };
  auto num = [&](const std::string& key) { return static_cast<std::size_t>(std::stoull(get(key))); };

  Checkpoint ckpt;
  ModelConfig config;
  try {
    if (get("format") != "1") throw Error(ErrorCode::BadCheckpoint, "unsupported checkpoint format " + get("format"));
    config.vocab_size = num("vocab_size");
    config.embedding_dim = num("embedding_dim");
    config.hidden_dim = num("hidden_dim");
    config.projection_dim = num("projection_dim");
    config.layers = num("layers");
    config.bidirectional = get("bidirectional") == "1";
    ckpt.vocab = detail::decode_vocab(get("vocab"));
    ckpt.meta.regime = get("regime");
    ckpt.meta.epoch = num("epoch");
    ckpt.meta.dev_accuracy = std::stod(get("dev_accuracy"));
    ckpt.meta.seed = std::stoull(get("seed"));
  } catch (const std::logic_error& e) {
    throw Error(ErrorCode::BadCheckpoint, std::string("bad checkpoint metadata: ") + e.what());
  }
  if (ckpt.vocab.digest() != get("vocab_digest")) {
    throw Error(ErrorCode::VocabMismatch, "checkpoint vocabulary does not match its digest");
  }
  if (ckpt.vocab.size() != config.vocab_size) throw Error(ErrorCode::BadCheckpoint, "vocab_size disagrees with vocabulary");

  ckpt.model = BiLstmMlm<float>(config);
  auto& params = ckpt.model.parameters();
  if (in.uint(4) != params.size()) throw Error(ErrorCode::BadCheckpoint, "unexpected tensor count");
  for (std::size_t k = 0; k < params.size(); ++k) {
    const std::string name(in.take(static_cast<std::size_t>(in.uint(4))));
    if (name != params.names[k]) throw Error(ErrorCode::BadCheckpoint, "unexpected tensor " + name);
    auto& m = params.values[k];
    const auto rank = in.uint(4);
    const auto rows = static_cast<Eigen::Index>(in.uint(8));
    const auto cols = rank == 2 ? static_cast<Eigen::Index>(in.uint(8)) : 1;
    if ((rank != 1 && rank != 2) || rows != m.rows() || cols != m.cols()) {
      throw Error(ErrorCode::BadCheckpoint, "shape mismatch for " + name);
    }
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = std::bit_cast<float>(static_cast<std::uint32_t>(in.uint(4)));
    }
  }
  if (!in.done()) throw Error(ErrorCode::BadCheckpoint, "trailing bytes after last tensor");
  return ckpt;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  const std::string data = serialize_checkpoint(ckpt);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

/// Loads a checkpoint; if `expected` is given its digest must match the
/// vocabulary stored in the file.
inline Checkpoint load_checkpoint(const std::filesystem::path& path, const Vocabulary* expected = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open checkpoint " + path.string());
  const std::string data{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  Checkpoint ckpt = deserialize_checkpoint(data);
  if (expected && expected->digest() != ckpt.vocab.digest()) {
    throw Error(ErrorCode::VocabMismatch, "checkpoint was trained with a different vocabulary");
  }
  return ckpt;
}

}  // namespace lacuna
