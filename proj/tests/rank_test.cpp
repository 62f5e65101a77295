#include <cmath>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "lacuna/rank.hpp"

namespace lacuna {
namespace {

// Twelve real symbols, so a two-character gap has 144 candidates.
const std::u32string kLetters = U"abcdefghijkl";

Checkpoint toy_model(std::uint64_t seed = 5) {
  ModelConfig config;
  config.vocab_size = kLetters.size() + kFirstSymbol;
  config.embedding_dim = 6;
  config.hidden_dim = 8;
  config.projection_dim = 5;
  config.layers = 2;
  Checkpoint c{Vocabulary(std::vector<char32_t>(kLetters.begin(), kLetters.end())),
               BiLstmMlm<float>::initialized(config, seed), {}};
  // Larger weights than the default init so the distributions are far from flat.
  for (auto& p : c.model.parameters().values) p *= 4.0f;
  return c;
}

std::vector<std::string> all_pairs() {
  std::vector<std::string> out;
  for (char32_t a : kLetters) {
    for (char32_t b : kLetters) out.push_back(utf8::encode(std::u32string{a, b}));
  }
  return out;
}

ErrorCode rank_error(const std::string& text, const std::vector<std::string>& candidates) {
  try {
    rank_candidates({parse_line(text), candidates}, toy_model());
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "query accepted: " << text;
  return ErrorCode::Io;
}

TEST(Rank, ScoreIsSumOfPerPositionLogProbs) {
  const Checkpoint ckpt = toy_model();
  const Sentence context = parse_line("abc[...]gh");
  // Oracle: the per-position distributions of the masked gap, added by hand.
  const GapPrediction pred = predict_distributions(context, ckpt);
  for (const std::string cand : {"def", "lll", "aki", "bca"}) {
    double expected = 0.0;
    const auto chars = utf8::decode(cand);
    for (std::size_t i = 0; i < chars.size(); ++i) {
      expected += static_cast<double>(pred.log_probs(ckpt.vocab.id(chars[i]), static_cast<Eigen::Index>(i)));
    }
    EXPECT_NEAR(score_candidate(context, cand, ckpt), expected, 1e-6) << cand;
  }
}

TEST(Rank, GapDistributionsMatchFullForwardPass) {
  const Checkpoint ckpt = toy_model();
  std::vector<TokenId> input;
  for (char32_t ch : std::u32string(U"abc")) input.push_back(ckpt.vocab.id(ch));
  input.insert(input.end(), 3, kMask);
  for (char32_t ch : std::u32string(U"gh")) input.push_back(ckpt.vocab.id(ch));
  const auto full = ckpt.model.forward(PaddedBatch::from(std::vector<std::vector<TokenId>>{input}));
  const GapPrediction pred = predict_distributions(parse_line("abc[...]gh"), ckpt);
  for (Eigen::Index i = 0; i < 3; ++i) {
    for (Eigen::Index v = 0; v < pred.log_probs.rows(); ++v) {
      const float a = pred.log_probs(v, i), b = full.at(0, 3 + static_cast<std::size_t>(i))(v);
      // Float32 paths that sum in different orders.
      EXPECT_NEAR(a, b, 1e-5f * std::max(1.0f, std::abs(b)));
    }
  }
}

TEST(Rank, SingleCharacterGapMatchesDistributionEntry) {
  const Checkpoint ckpt = toy_model();
  const Sentence context = parse_line("ab[.]de");
  const GapPrediction pred = predict_distributions(context, ckpt);
  for (char32_t ch : kLetters) {
    const std::string cand = utf8::encode(ch);
    EXPECT_EQ(score_candidate(context, cand, ckpt), static_cast<double>(pred.log_probs(ckpt.vocab.id(ch), 0)));
  }
}

TEST(Rank, GreedyFillIsTheBestOfAllCandidates) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Checkpoint ckpt = toy_model(seed);
    const Sentence context = parse_line("kab[..]cd");
    const auto ranked = rank_candidates({context, all_pairs()}, ckpt);
    ASSERT_EQ(ranked.size(), 144u);
    // Brute force: the best of all 144 scores, computed independently.
    double best = -INFINITY;
    for (const auto& cand : all_pairs()) best = std::max(best, score_candidate(context, cand, ckpt));
    EXPECT_EQ(ranked.front().log_prob, best);
    EXPECT_EQ(ranked.front().text, predict_distributions(context, ckpt).gap_fills.at(0));
  }
}

TEST(Rank, SortedDescendingWithDenseRanksAndLexicalTies) {
  const Checkpoint ckpt = toy_model();
  const auto ranked = rank_candidates({parse_line("a[..]b"), all_pairs()}, ckpt);
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    EXPECT_EQ(ranked[i].rank, i + 1);
    if (i == 0) continue;
    ASSERT_GE(ranked[i - 1].log_prob, ranked[i].log_prob);
    if (ranked[i - 1].log_prob == ranked[i].log_prob) EXPECT_LT(ranked[i - 1].text, ranked[i].text);
  }
}

TEST(Rank, TiesAreBrokenLexicographically) {
  // With all-zero output weights every candidate scores the same.
  Checkpoint ckpt = toy_model();
  auto& params = ckpt.model.parameters();
  const std::size_t out = ckpt.model.projection_index() + 2;
  params.values[out].setZero();
  params.values[out + 1].setZero();
  const auto ranked = rank_candidates({parse_line("a[.]b"), {"k", "c", "a", "j"}}, ckpt);
  EXPECT_EQ(ranked[0].text, "a");
  EXPECT_EQ(ranked[1].text, "c");
  EXPECT_EQ(ranked[2].text, "j");
  EXPECT_EQ(ranked[3].text, "k");
  EXPECT_NEAR(ranked[0].log_prob, -std::log(15.0), 1e-6);
}

TEST(Rank, RerunsAreBitIdentical) {
  const Checkpoint ckpt = toy_model();
  const RankQuery q{parse_line("[..]gh"), all_pairs()};
  EXPECT_EQ(rank_candidates(q, ckpt), rank_candidates(q, ckpt));
}

TEST(Rank, CandidatesAreLowercased) {
  const Checkpoint ckpt = toy_model();
  const Sentence context = parse_line("a[..]b");
  EXPECT_EQ(score_candidate(context, "CD", ckpt), score_candidate(context, "cd", ckpt));
}

TEST(Rank, CandidateCharactersNeverBecomeContext) {
  // The second character's score must not depend on the first.
  const Checkpoint ckpt = toy_model();
  const Sentence context = parse_line("a[..]b");
  const double ac = score_candidate(context, "ac", ckpt), bc = score_candidate(context, "bc", ckpt);
  const double ad = score_candidate(context, "ad", ckpt), bd = score_candidate(context, "bd", ckpt);
  EXPECT_NEAR(ac - bc, ad - bd, 1e-6);
}

TEST(Rank, ReconstructedTextIsContext) {
  const Checkpoint ckpt = toy_model();
  const double plain = score_candidate(parse_line("ab[.]d"), "c", ckpt);
  EXPECT_EQ(score_candidate(parse_line("a[b][.]d"), "c", ckpt), plain);
}

TEST(RankErrors, QueryValidation) {
  EXPECT_EQ(rank_error("a[..]b", {"ab", "abc"}), ErrorCode::MixedCandidateLengths);
  EXPECT_EQ(rank_error("a[..]b", {"ab", "ab"}), ErrorCode::DuplicateCandidate);
  EXPECT_EQ(rank_error("a[..]b", {}), ErrorCode::NoCandidates);
  EXPECT_EQ(rank_error("a[..]b", {"ab", "az"}), ErrorCode::UnknownCharacter);
  EXPECT_EQ(rank_error("a[..]b", {"abc", "abd"}), ErrorCode::LengthMismatch);
  EXPECT_EQ(rank_error("abc", {"a"}), ErrorCode::NoGapPresent);
  EXPECT_EQ(rank_error("a[.]b[.]c", {"a"}), ErrorCode::NoGapPresent);
}

TEST(RankErrors, ScoreChecksLength) {
  try {
    score_candidate(parse_line("a[..]b"), "c", toy_model());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LengthMismatch);
  }
}

TEST(SplitCandidates, TrimsAndDropsEmptyItems) {
  EXPECT_EQ(split_candidates(" ab, cd ,,ef"), (std::vector<std::string>{"ab", "cd", "ef"}));
  EXPECT_TRUE(split_candidates("").empty());
}

}  // namespace
}  // namespace lacuna
