#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lacuna/checkpoint.hpp"
#include "lacuna/corpus.hpp"
#include "lacuna/error.hpp"
#include "lacuna/model.hpp"
#include "lacuna/vocab.hpp"

namespace lacuna {

/// Model input for a sentence: blank-lacuna positions become MASK, every
/// other character (visible, damaged or reconstructed) is context.
inline std::vector<TokenId> encode_context(const std::vector<Slot>& slots, const Vocabulary& vocab) {
  std::vector<TokenId> ids;
  ids.reserve(slots.size());
  for (const auto& slot : slots) ids.push_back(slot.kind == SlotKind::Gap ? kMask : vocab.id(slot.ch));
  return ids;
}

/// Highest-scoring real symbol (ids >= 3); ties go to the lowest id.
template <typename Column>
TokenId best_symbol(const Column& log_probs) {
  TokenId best = kFirstSymbol;
  for (Eigen::Index i = kFirstSymbol + 1; i < log_probs.size(); ++i) {
    if (log_probs(i) > log_probs(best)) best = static_cast<TokenId>(i);
  }
  return best;
}

struct ScoredSymbol {
  TokenId id;
  double log_prob;
};

/// The k most likely real symbols, descending, ties by id.
template <typename Column>
std::vector<ScoredSymbol> top_k(const Column& log_probs, std::size_t k) {
  std::vector<ScoredSymbol> all;
  for (Eigen::Index i = kFirstSymbol; i < log_probs.size(); ++i) {
    all.push_back({static_cast<TokenId>(i), static_cast<double>(log_probs(i))});
  }
  const std::size_t n = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(), [](const auto& a, const auto& b) {
    return a.log_prob != b.log_prob ? a.log_prob > b.log_prob : a.id < b.id;
  });
  all.resize(n);
  return all;
}

struct GapPrediction {
  std::vector<Slot> slots;
  std::vector<std::int32_t> positions;  // slot indices of the masked characters
  Matrix<float> log_probs;              // vocab x positions
  std::vector<TokenId> greedy;
  std::vector<std::string> gap_fills;  // greedy string per blank lacuna
  std::string filled_text;             // normalized markup, gaps filled as [..]
};

/// Masks every blank-lacuna position in one pass and returns the model's
/// log distribution at each of them plus the greedy fill.
inline GapPrediction predict_distributions(const Sentence& sentence, const Checkpoint& ckpt) {
  GapPrediction out;
  out.slots = slots(sentence);
  for (std::size_t i = 0; i < out.slots.size(); ++i) {
    if (out.slots[i].kind == SlotKind::Gap) out.positions.push_back(static_cast<std::int32_t>(i));
  }
  if (out.positions.empty()) throw Error(ErrorCode::NoGapPresent, "text contains no blank lacuna to predict");

  const std::vector<std::vector<TokenId>> seqs{encode_context(out.slots, ckpt.vocab)};
  const PaddedBatch batch = PaddedBatch::from(seqs);
  std::vector<std::pair<std::size_t, std::size_t>> where;
  for (std::int32_t p : out.positions) where.emplace_back(0, static_cast<std::size_t>(p));
  out.log_probs = ckpt.model.forward_at(batch, where);
  for (Eigen::Index k = 0; k < out.log_probs.cols(); ++k) out.greedy.push_back(best_symbol(out.log_probs.col(k)));

  std::size_t next = 0;
  for (const auto& seg : sentence.segments) {
    switch (seg.kind) {
      case SegmentKind::BlankLacuna: {
        std::string fill;
        for (std::size_t i = 0; i < seg.length; ++i) fill += ckpt.vocab.symbol(out.greedy[next++]);
        out.filled_text += "[" + fill + "]";
        out.gap_fills.push_back(std::move(fill));
        break;
      }
      case SegmentKind::ReconstructedLacuna: out.filled_text += "[" + seg.text + "]"; break;
      default: out.filled_text += seg.text;
    }
  }
  return out;
}

}  // namespace lacuna
