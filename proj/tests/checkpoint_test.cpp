#include <cstring>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "lacuna/checkpoint.hpp"
#include "support/temp_dir.hpp"

namespace lacuna {
namespace {

Checkpoint small_checkpoint() {
  const Vocabulary vocab(std::vector<char32_t>{U'ⲁ', U'ⲃ', U'ⲅ', U' ', U'ϣ', U'.', U'a'});
  ModelConfig config;
  config.vocab_size = vocab.size();
  config.embedding_dim = 6;
  config.hidden_dim = 7;
  config.projection_dim = 5;
  config.layers = 2;
  return Checkpoint{vocab, BiLstmMlm<float>::initialized(config, 77), {"smart-once", 12, 0.3141592653589793, 77}};
}

ErrorCode load_error(std::string_view bytes) {
  try {
    deserialize_checkpoint(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "checkpoint accepted";
  return ErrorCode::Io;
}

TEST(Checkpoint, SaveLoadIsBitwiseExact) {
  testing::TempDir dir;
  const Checkpoint a = small_checkpoint();
  save_checkpoint(dir / "m.ckpt", a);
  const Checkpoint b = load_checkpoint(dir / "m.ckpt");

  const auto& pa = a.model.parameters();
  const auto& pb = b.model.parameters();
  ASSERT_EQ(pa.names, pb.names);
  for (std::size_t k = 0; k < pa.size(); ++k) {
    ASSERT_EQ(pa.values[k].rows(), pb.values[k].rows());
    ASSERT_EQ(pa.values[k].cols(), pb.values[k].cols());
    EXPECT_EQ(std::memcmp(pa.values[k].data(), pb.values[k].data(), sizeof(float) * pa.values[k].size()), 0)
        << pa.names[k];
  }
  EXPECT_EQ(a.vocab, b.vocab);
  EXPECT_EQ(b.meta.regime, "smart-once");
  EXPECT_EQ(b.meta.epoch, 12u);
  EXPECT_EQ(b.meta.dev_accuracy, 0.3141592653589793);
  EXPECT_EQ(b.meta.seed, 77u);
  EXPECT_EQ(b.model.config().layers, 2u);
  EXPECT_TRUE(b.model.config().bidirectional);

  const std::vector<std::vector<TokenId>> seqs = {{3, 4, kMask, 6, 7}, {9, kMask}};
  const auto fa = a.model.forward(PaddedBatch::from(seqs));
  const auto fb = b.model.forward(PaddedBatch::from(seqs));
  EXPECT_EQ(std::memcmp(fa.values.data(), fb.values.data(), sizeof(float) * fa.values.size()), 0);
}

TEST(Checkpoint, ReserializationReproducesBytes) {
  const std::string bytes = serialize_checkpoint(small_checkpoint());
  EXPECT_EQ(serialize_checkpoint(deserialize_checkpoint(bytes)), bytes);
}

TEST(Checkpoint, FirstTensorIsLittleEndianFloat32) {
  Checkpoint c = small_checkpoint();
  c.model.parameters().values[0](0, 0) = 1.0f;
  c.model.parameters().values[0](0, 1) = -2.5f;
  const std::string bytes = serialize_checkpoint(c);
  ASSERT_EQ(bytes.substr(0, 8), "LACMLM01");
  std::uint64_t meta_len = 0;
  for (int i = 7; i >= 0; --i) meta_len = (meta_len << 8) | static_cast<unsigned char>(bytes[8 + i]);
  const std::string name = "embedding.weight";
  std::size_t at = 16 + meta_len;
  EXPECT_EQ(static_cast<unsigned char>(bytes[at]), c.model.parameters().size());  // tensor count, low byte
  at += 4;
  EXPECT_EQ(static_cast<unsigned char>(bytes[at]), name.size());
  at += 4;
  EXPECT_EQ(bytes.substr(at, name.size()), name);
  at += name.size();
  EXPECT_EQ(static_cast<unsigned char>(bytes[at]), 2u);  // rank
  at += 4 + 8 + 8;
  // 1.0f = 0x3F800000, -2.5f = 0xC0200000
  EXPECT_EQ(bytes.substr(at, 8), std::string("\x00\x00\x80\x3F\x00\x00\x20\xC0", 8));
}

TEST(Checkpoint, RejectsCorruptFiles) {
  const std::string bytes = serialize_checkpoint(small_checkpoint());
  EXPECT_EQ(load_error("NOTMAGIC" + bytes.substr(8)), ErrorCode::BadCheckpoint);
  EXPECT_EQ(load_error(bytes.substr(0, bytes.size() - 3)), ErrorCode::BadCheckpoint);
  EXPECT_EQ(load_error(bytes + "x"), ErrorCode::BadCheckpoint);
  EXPECT_EQ(load_error(bytes.substr(0, 12)), ErrorCode::BadCheckpoint);
}

TEST(Checkpoint, DetectsVocabularyTampering) {
  std::string bytes = serialize_checkpoint(small_checkpoint());
  // The vocabulary line lists codepoints in hex; swap the first two.
  const auto at = bytes.find("vocab=2C81 2C83");
  ASSERT_NE(at, std::string::npos);
  bytes.replace(at, 15, "vocab=2C83 2C81");
  EXPECT_EQ(load_error(bytes), ErrorCode::VocabMismatch);
}

TEST(Checkpoint, LoadChecksExpectedVocabulary) {
  testing::TempDir dir;
  const Checkpoint c = small_checkpoint();
  save_checkpoint(dir / "m.ckpt", c);
  EXPECT_NO_THROW(load_checkpoint(dir / "m.ckpt", &c.vocab));
  const Vocabulary other(std::vector<char32_t>{U'x'});
  try {
    load_checkpoint(dir / "m.ckpt", &other);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::VocabMismatch);
  }
  try {
    load_checkpoint(dir / "absent.ckpt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Io);
  }
}

}  // namespace
}  // namespace lacuna
