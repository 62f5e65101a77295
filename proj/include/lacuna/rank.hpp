#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "lacuna/checkpoint.hpp"
#include "lacuna/corpus.hpp"
#include "lacuna/error.hpp"
#include "lacuna/predict.hpp"
#include "lacuna/utf8.hpp"

namespace lacuna {

struct RankQuery {
  Sentence context;  // exactly one blank lacuna
  std::vector<std::string> candidates;
};

struct RankedCandidate {
  std::string text;
  double log_prob = 0.0;  // natural log
  std::size_t rank = 0;   // 1-based

  bool operator==(const RankedCandidate&) const = default;
};

/// Length of the single blank lacuna in `context`.
inline std::size_t single_gap_length(const Sentence& context) {
  std::size_t gaps = 0, length = 0;
  for (const auto& seg : context.segments) {
    if (seg.kind != SegmentKind::BlankLacuna) continue;
    ++gaps;
    length = seg.length;
  }
  if (gaps == 0) throw Error(ErrorCode::NoGapPresent, "ranking needs one blank lacuna in the text");
  if (gaps > 1) {
    throw Error(ErrorCode::NoGapPresent,
                "ranking needs exactly one blank lacuna; fill or bracket-reconstruct the others first");
  }
  return length;
}

inline std::vector<TokenId> encode_candidate(std::string_view candidate, const Vocabulary& vocab) {
  std::vector<TokenId> ids;
  for (char32_t ch : utf8::decode(candidate)) {
    const char32_t lower = utf8::to_lower(ch);
    if (!vocab.contains(lower)) {
      throw Error(ErrorCode::UnknownCharacter, "candidate '" + std::string(candidate) + "' contains '" +
                                                   utf8::encode(ch) + "', which is not in the model vocabulary");
    }
    ids.push_back(vocab.id(lower));
  }
  return ids;
}

namespace detail {

inline double sum_log_probs(const GapPrediction& pred, const std::vector<TokenId>& ids) {
  double total = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    total += static_cast<double>(pred.log_probs(ids[i], static_cast<Eigen::Index>(i)));
  }
  return total;
}

}  // namespace detail

/// Sum of per-position log probabilities of the candidate's characters with
/// the whole gap masked at once. Candidate characters never become context.
inline double score_candidate(const Sentence& context, std::string_view candidate, const Checkpoint& ckpt) {
  const std::size_t gap = single_gap_length(context);
  const auto ids = encode_candidate(candidate, ckpt.vocab);
  if (ids.size() != gap) {
    throw Error(ErrorCode::LengthMismatch, "candidate '" + std::string(candidate) + "' has " +
                                               std::to_string(ids.size()) + " characters but the gap has " +
                                               std::to_string(gap));
  }
  return detail::sum_log_probs(predict_distributions(context, ckpt), ids);
}

/// Scores every candidate from one shared forward pass and sorts by log
/// probability, descending, ties in lexicographic order.
inline std::vector<RankedCandidate> rank_candidates(const RankQuery& query, const Checkpoint& ckpt) {
  if (query.candidates.empty()) throw Error(ErrorCode::NoCandidates, "no candidates to rank");
  const std::size_t gap = single_gap_length(query.context);

  std::set<std::string> seen;
  std::vector<std::vector<TokenId>> encoded;
  std::size_t first_len = 0;
  for (std::size_t i = 0; i < query.candidates.size(); ++i) {
    const auto& c = query.candidates[i];
    if (!seen.insert(c).second) throw Error(ErrorCode::DuplicateCandidate, "candidate '" + c + "' is listed twice");
    const std::size_t len = utf8::length(c);
    if (i == 0) first_len = len;
    if (len != first_len) {
      throw Error(ErrorCode::MixedCandidateLengths,
                  "all candidates must have the same number of characters; probabilities of different-length "
                  "reconstructions are not comparable");
    }
  }
  if (first_len != gap) {
    throw Error(ErrorCode::LengthMismatch, "candidates have " + std::to_string(first_len) +
                                               " characters but the gap has " + std::to_string(gap));
  }
  for (const auto& c : query.candidates) encoded.push_back(encode_candidate(c, ckpt.vocab));

  const GapPrediction pred = predict_distributions(query.context, ckpt);
  std::vector<RankedCandidate> out;
  out.reserve(encoded.size());
  for (std::size_t i = 0; i < encoded.size(); ++i) {
    out.push_back({query.candidates[i], detail::sum_log_probs(pred, encoded[i]), 0});
  }
  std::sort(out.begin(), out.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
    return a.log_prob != b.log_prob ? a.log_prob > b.log_prob : a.text < b.text;
  });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = i + 1;
  return out;
}

/// Splits a comma-separated candidate list, trimming surrounding spaces.
inline std::vector<std::string> split_candidates(std::string_view list) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const auto comma = list.find(',', pos);
    std::string_view item = list.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace lacuna
