#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "lacuna/vocab.hpp"
#include "support/synthetic_corpus.hpp"
#include "support/temp_dir.hpp"

namespace lacuna {
namespace {

std::vector<Sentence> parse_all(const std::vector<std::string>& lines) {
  std::vector<Sentence> out;
  for (const auto& l : lines) out.push_back(parse_line(l));
  return out;
}

TEST(Vocab, TwoCharacterCorpus) {
  const Vocabulary v = build_vocab(parse_all({"ab", "ba"}));
  EXPECT_EQ(v.size(), 5u);
  EXPECT_EQ(v.id(U'a'), 3);
  EXPECT_EQ(v.id(U'b'), 4);
  EXPECT_EQ(v.symbol(kPad), "<pad>");
  EXPECT_EQ(v.symbol(kUnk), "<unk>");
  EXPECT_EQ(v.symbol(kMask), "<mask>");
}

TEST(Vocab, UnseenCharacterMapsToUnk) {
  const Vocabulary v = build_vocab(parse_all({"ab"}));
  EXPECT_EQ(v.id(U'z'), kUnk);
  EXPECT_EQ(v.encode(std::string_view("azb")), (std::vector<TokenId>{3, kUnk, 4}));
}

TEST(Vocab, OrderedByFrequencyThenCodepoint) {
  const Vocabulary v = build_vocab(parse_all({"cbbaaa", "d"}));
  EXPECT_EQ(v.characters(), (std::vector<char32_t>{U'a', U'b', U'c', U'd'}));
}

TEST(Vocab, CountsVisibleDamagedAndReconstructedButNotGaps) {
  const Vocabulary v = build_vocab(parse_all({"Ab[..][c]d" + utf8::encode(utf8::kCombiningDotBelow)}));
  EXPECT_EQ(v.symbol_count(), 4u);
  EXPECT_TRUE(v.contains(U'a'));
  EXPECT_TRUE(v.contains(U'c'));
  EXPECT_TRUE(v.contains(U'd'));
  EXPECT_FALSE(v.contains(U'.'));
  EXPECT_FALSE(v.contains(U'A'));
}

TEST(Vocab, EmptySplitIsAnError) {
  try {
    build_vocab({});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyCorpus);
  }
}

TEST(Vocab, SymbolOutOfRangeThrows) {
  const Vocabulary v = build_vocab(parse_all({"ab"}));
  EXPECT_THROW(v.symbol(5), Error);
  EXPECT_THROW(v.symbol(-1), Error);
}

TEST(VocabProperty, EncodeDecodeRoundTripOnTrainingText) {
  testing::SyntheticOptions opt;
  opt.sentences = 800;
  const auto sentences = parse_all(testing::synthetic_lines(opt));
  const Vocabulary v = build_vocab(sentences);
  for (const auto& s : sentences) {
    if (classify(s) != SentenceClass::Complete) continue;
    const std::u32string text = characters(s);
    const auto ids = v.encode(text);
    for (TokenId id : ids) {
      ASSERT_GE(id, kFirstSymbol);
      ASSERT_LT(static_cast<std::size_t>(id), v.size());
    }
    ASSERT_EQ(v.decode(ids), utf8::encode(text));
  }
}

TEST(VocabProperty, IdsAreDenseAndSymbolsAreSingleLowercaseScalars) {
  testing::SyntheticOptions opt;
  opt.sentences = 500;
  const Vocabulary v = build_vocab(parse_all(testing::synthetic_lines(opt)));
  for (TokenId id = kFirstSymbol; static_cast<std::size_t>(id) < v.size(); ++id) {
    const char32_t ch = v.character(id);
    EXPECT_EQ(v.id(ch), id);
    EXPECT_EQ(utf8::to_lower(ch), ch);
    EXPECT_EQ(utf8::decode(v.symbol(id)).size(), 1u);
  }
}

TEST(Vocab, FileRoundTrip) {
  testing::TempDir dir;
  const Vocabulary v = build_vocab(parse_all({"ⲁⲃⲅ ϣ.", "ⲁⲁ"}));
  v.save(dir / "vocab.txt");
  const Vocabulary w = Vocabulary::load(dir / "vocab.txt");
  EXPECT_EQ(v, w);
  EXPECT_EQ(v.digest(), w.digest());
  EXPECT_EQ(testing::read_file(dir / "vocab.txt").rfind("<pad>\n<unk>\n<mask>\nⲁ\n", 0), 0u);
}

TEST(Vocab, ParseRejectsBadFiles) {
  EXPECT_THROW(Vocabulary::parse("<pad>\n<unk>\n"), Error);
  EXPECT_THROW(Vocabulary::parse("x\n<unk>\n<mask>\n"), Error);
  EXPECT_THROW(Vocabulary::parse("<pad>\n<unk>\n<mask>\nab\n"), Error);
  EXPECT_THROW(Vocabulary::parse("<pad>\n<unk>\n<mask>\na\na\n"), Error);
}

}  // namespace
}  // namespace lacuna
