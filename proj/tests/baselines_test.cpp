#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "lacuna/baselines.hpp"
#include "support/synthetic_corpus.hpp"
#include "support/temp_dir.hpp"

namespace lacuna {
namespace {

MaskedSample masked(std::vector<TokenId> targets, std::vector<std::int32_t> positions) {
  MaskedSample s;
  s.target_ids = targets;
  s.input_ids = targets;
  for (auto p : positions) s.input_ids[p] = kMask;
  s.mask_positions = positions;
  return s;
}

std::vector<std::vector<TokenId>> synthetic_train(std::size_t sentences, Vocabulary& vocab_out) {
  testing::SyntheticOptions opt;
  opt.sentences = sentences;
  std::vector<Sentence> parsed;
  for (const auto& line : testing::synthetic_lines(opt)) {
    Sentence s = parse_line(line);
    if (classify(s) == SentenceClass::Complete) parsed.push_back(std::move(s));
  }
  vocab_out = build_vocab(parsed);
  std::vector<std::vector<TokenId>> out;
  for (const auto& s : parsed) out.push_back(vocab_out.encode(characters(s)));
  return out;
}

TEST(RandomBaseline, AccuracyMatchesUniformGuess) {
  constexpr std::size_t kVocab = 20;  // 17 real symbols
  Rng data(1);
  RandomBaseline baseline(kVocab, 2);
  std::size_t hits = 0, total = 0;
  for (int i = 0; i < 2000; ++i) {
    std::vector<TokenId> ids(100);
    for (auto& id : ids) id = kFirstSymbol + static_cast<TokenId>(data.below(kVocab - kFirstSymbol));
    std::vector<std::int32_t> positions(100);
    for (int p = 0; p < 100; ++p) positions[p] = p;
    const auto sample = masked(ids, positions);
    const auto pred = baseline.predict(sample);
    for (std::size_t k = 0; k < pred.size(); ++k) {
      ASSERT_GE(pred[k], kFirstSymbol);
      ASSERT_LT(pred[k], static_cast<TokenId>(kVocab));
      hits += pred[k] == ids[k];
      ++total;
    }
  }
  // 200k guesses: sd of the accuracy is about 0.0005.
  EXPECT_NEAR(static_cast<double>(hits) / static_cast<double>(total), 1.0 / 17.0, 0.005);
}

TEST(RandomBaseline, SingleSymbolIsAlwaysRight) {
  RandomBaseline baseline(4, 9);
  const auto pred = baseline.predict(masked({3, 3, 3}, {0, 2}));
  EXPECT_EQ(pred, (std::vector<TokenId>{3, 3}));
}

TEST(RandomBaseline, DeterministicPerSeed) {
  const auto sample = masked({3, 4, 5, 6, 7, 8}, {0, 1, 2, 3, 4, 5});
  RandomBaseline a(50, 5), b(50, 5), c(50, 6);
  const auto pa = a.predict(sample);
  EXPECT_EQ(pa, b.predict(sample));
  EXPECT_NE(pa, c.predict(sample));
}

TEST(ModeBaseline, PredictsMostCommonSymbol) {
  const Vocabulary v(std::vector<char32_t>{U'b', U'a'});
  const std::vector<std::vector<TokenId>> train = {v.encode(std::u32string_view(U"aaab"))};
  const ModeBaseline mode(train);
  EXPECT_EQ(mode.symbol(), v.id(U'a'));
  EXPECT_EQ(mode.predict(masked({3, 3, 4}, {0, 2})), (std::vector<TokenId>{4, 4}));
}

TEST(ModeBaseline, TiesGoToLowestId) {
  EXPECT_EQ(mode_symbol({{5, 4, 6, 5, 4, 6}}), 4);
}

TEST(ModeBaseline, EmptyTrainingSplitIsAnError) {
  try {
    mode_symbol({});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyCorpus);
  }
}

TEST(ModeBaseline, AccuracyEqualsCountOracle) {
  Vocabulary vocab;
  const auto train = synthetic_train(600, vocab);
  // Oracle: count symbols directly, then count masked targets equal to the winner.
  std::map<TokenId, std::size_t> counts;
  for (const auto& s : train) {
    for (TokenId id : s) ++counts[id];
  }
  const TokenId expected = std::max_element(counts.begin(), counts.end(), [](const auto& a, const auto& b) {
                             return a.second < b.second || (a.second == b.second && a.first > b.first);
                           })->first;
  const ModeBaseline mode(train);
  ASSERT_EQ(mode.symbol(), expected);

  Rng rng(3);
  std::size_t hits = 0, oracle = 0;
  for (const auto& ids : train) {
    const auto s = random_mask(ids, vocab.size(), rng);
    const auto pred = mode.predict(s);
    for (std::size_t k = 0; k < pred.size(); ++k) {
      hits += pred[k] == s.target_ids[s.mask_positions[k]];
      oracle += s.target_ids[s.mask_positions[k]] == expected;
    }
  }
  EXPECT_EQ(hits, oracle);
}

TEST(Trigram, AlternatingTextFillsEveryGap) {
  // a=3, b=4. Training text "abababab"; query "a?a?a?".
  const TrigramTable t({{3, 4, 3, 4, 3, 4, 3, 4}}, 5);
  const auto pred = t.predict(masked({3, 4, 3, 4, 3, 4}, {1, 3, 5}));
  EXPECT_EQ(pred, (std::vector<TokenId>{4, 4, 4}));
}

TEST(Trigram, ChainsPredictionsThroughLongGaps) {
  const TrigramTable t({{3, 4, 3, 4, 3, 4, 3, 4}}, 5);
  // "a????" is filled b, a, b, a from its own predictions.
  EXPECT_EQ(t.predict(masked({3, 3, 3, 3, 3}, {1, 2, 3, 4})), (std::vector<TokenId>{4, 3, 4, 3}));
}

TEST(Trigram, UniformUnigramTieGoesToLowestId) {
  const TrigramTable t({{5, 4, 3}}, 6);
  EXPECT_EQ(t.best({}), 3);
  EXPECT_EQ(t.predict(masked({5, 5}, {0})), (std::vector<TokenId>{3}));
}

TEST(Trigram, BacksOffToShorterContexts) {
  // Counts: ab->c twice, bc->a once; "cb" never occurs as a context.
  const TrigramTable t({{3, 4, 5, 3, 4, 5}}, 8);
  const double k = t.smoothing();
  const double c = static_cast<double>(t.candidates());
  const TokenId ab[] = {3, 4};
  EXPECT_DOUBLE_EQ(t.probability(5, ab), (2 + k) / (2 + k * c));
  const TokenId cb[] = {5, 4};  // unseen pair; bigram context b seen twice, b->c twice
  EXPECT_DOUBLE_EQ(t.probability(5, cb), (2 + k) / (2 + k * c));
  const TokenId g[] = {7};  // unseen symbol: unigram level
  EXPECT_DOUBLE_EQ(t.probability(3, g), (2 + k) / (6 + k * c));
}

TEST(TrigramProperty, ProbabilitiesNormalizePerContext) {
  Vocabulary vocab;
  const auto train = synthetic_train(400, vocab);
  const TrigramTable t(train, vocab.size());
  Rng rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<TokenId> history;
    const auto len = rng.below(3);
    for (std::uint64_t i = 0; i < len; ++i) history.push_back(kFirstSymbol + static_cast<TokenId>(rng.below(vocab.size() - 3)));
    // Also use real contexts from the data half of the time.
    if (trial % 2 == 0) {
      const auto& s = train[rng.below(train.size())];
      if (s.size() >= 2) history = {s[0], s[1]};
    }
    double sum = 0.0;
    for (TokenId ch = kFirstSymbol; static_cast<std::size_t>(ch) < vocab.size(); ++ch) sum += t.probability(ch, history);
    ASSERT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(TrigramProperty, TrigramCountsNeverExceedPrefixCounts) {
  Vocabulary vocab;
  const auto train = synthetic_train(300, vocab);
  const TrigramTable t(train, vocab.size());
  const auto v = static_cast<TokenId>(vocab.size());
  for (TokenId a = kFirstSymbol; a < v; ++a) {
    for (TokenId b = kFirstSymbol; b < v; ++b) {
      ASSERT_LE(t.context_count(a, b), t.count(a, b));
      for (TokenId c = kFirstSymbol; c < v; ++c) ASSERT_LE(t.count(a, b, c), t.count(a, b));
    }
  }
}

TEST(Trigram, SavedTableIsSorted) {
  const Vocabulary v(std::vector<char32_t>{U'a', U'b'});
  const TrigramTable t({{3, 4, 3}}, v.size());
  testing::TempDir dir;
  t.save(dir / "trigram.tsv", v);
  EXPECT_EQ(testing::read_file(dir / "trigram.tsv"), "\ta\t2\n\tb\t1\na\tb\t1\nab\ta\t1\nb\ta\t1\n");
}

}  // namespace
}  // namespace lacuna
