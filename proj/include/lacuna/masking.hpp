#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lacuna/corpus.hpp"
#include "lacuna/error.hpp"
#include "lacuna/random.hpp"
#include "lacuna/vocab.hpp"

namespace lacuna {

enum class MaskDistribution { Random, Smart };
enum class Remask { Once, Dynamic };

struct MaskPolicy {
  MaskDistribution distribution = MaskDistribution::Random;
  Remask remask = Remask::Dynamic;
  std::uint64_t seed = 0;

  /// "random-once", "random-dynamic", "smart-once" or "smart-dynamic".
  std::string name() const {
    return std::string(distribution == MaskDistribution::Random ? "random" : "smart") + "-" +
           (remask == Remask::Once ? "once" : "dynamic");
  }
};

inline MaskDistribution parse_distribution(std::string_view s) {
  if (s == "random") return MaskDistribution::Random;
  if (s == "smart") return MaskDistribution::Smart;
  throw Error(ErrorCode::BadFormat, "unknown mask distribution: " + std::string(s));
}

inline Remask parse_remask(std::string_view s) {
  if (s == "once") return Remask::Once;
  if (s == "dynamic") return Remask::Dynamic;
  throw Error(ErrorCode::BadFormat, "unknown remask mode: " + std::string(s));
}

struct MaskedSample {
  std::vector<TokenId> input_ids;
  std::vector<TokenId> target_ids;
  std::vector<std::int32_t> mask_positions;  // ascending
  std::uint64_t epoch_tag = 0;

  bool operator==(const MaskedSample&) const = default;
};

enum class Substitution { Mask, RandomSymbol, Unchanged };

inline constexpr double kSelectRate = 0.15;
inline constexpr double kMaskShare = 0.80;
inline constexpr double kRandomShare = 0.10;

inline Substitution draw_substitution(Rng& rng) {
  const double u = rng.uniform();
  if (u < kMaskShare) return Substitution::Mask;
  if (u < kMaskShare + kRandomShare) return Substitution::RandomSymbol;
  return Substitution::Unchanged;
}

/// Independent 15% selection with the 80/10/10 mask / random / unchanged
/// substitution. At least one position is always selected.
inline MaskedSample random_mask(std::span<const TokenId> ids, std::size_t vocab_size, Rng& rng) {
  if (ids.empty()) throw Error(ErrorCode::EmptySequence, "cannot mask an empty sequence");
  MaskedSample out;
  out.target_ids.assign(ids.begin(), ids.end());
  out.input_ids = out.target_ids;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (rng.uniform() < kSelectRate) out.mask_positions.push_back(static_cast<std::int32_t>(i));
  }
  if (out.mask_positions.empty()) out.mask_positions.push_back(static_cast<std::int32_t>(rng.below(ids.size())));

  const std::size_t symbols = vocab_size > kFirstSymbol ? vocab_size - kFirstSymbol : 0;
  for (std::int32_t pos : out.mask_positions) {
    switch (draw_substitution(rng)) {
      case Substitution::Mask:
        out.input_ids[pos] = kMask;
        break;
      case Substitution::RandomSymbol:
        out.input_ids[pos] = symbols == 0 ? kMask : kFirstSymbol + static_cast<TokenId>(rng.below(symbols));
        break;
      case Substitution::Unchanged:
        break;
    }
  }
  return out;
}

inline constexpr std::size_t kMaxGapsPerSentence = 5;
inline constexpr std::size_t kMaxGapLength = 34;
inline constexpr int kPlacementAttempts = 20;

/// Gap lengths follow the reconstructed-lacuna statistics: 1 (48%), 2 (22%),
/// 3 (12%), otherwise uniform on 4..34.
inline std::size_t draw_gap_length(Rng& rng) {
  const double u = rng.uniform();
  if (u < 0.48) return 1;
  if (u < 0.70) return 2;
  if (u < 0.82) return 3;
  return static_cast<std::size_t>(rng.between(4, static_cast<std::int64_t>(kMaxGapLength)));
}

inline std::size_t draw_gap_count(Rng& rng) {
  return static_cast<std::size_t>(rng.between(1, static_cast<std::int64_t>(kMaxGapsPerSentence)));
}

/// Places gaps of the given lengths in a sequence of length `n`. Starts are
/// uniform; a gap that would overlap an earlier one is redrawn up to 20
/// times and dropped after that. Gaps running past the end are truncated.
/// Touching gaps are allowed. Returns the covered positions, ascending.
inline std::vector<std::int32_t> place_gaps(std::size_t n, std::span<const std::size_t> lengths, Rng& rng) {
  std::vector<char> taken(n, 0);
  for (std::size_t len : lengths) {
    for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
      const std::size_t start = rng.below(n);
      const std::size_t end = std::min(n, start + len);
      if (std::any_of(taken.begin() + start, taken.begin() + end, [](char c) { return c != 0; })) continue;
      std::fill(taken.begin() + start, taken.begin() + end, 1);
      break;
    }
  }
  std::vector<std::int32_t> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (taken[i]) out.push_back(static_cast<std::int32_t>(i));
  }
  return out;
}

/// Lacuna-shaped masking: 1-5 contiguous gaps, every gapped position MASK.
inline MaskedSample smart_mask(std::span<const TokenId> ids, Rng& rng) {
  if (ids.empty()) throw Error(ErrorCode::EmptySequence, "cannot mask an empty sequence");
  std::vector<std::size_t> lengths(draw_gap_count(rng));
  for (auto& len : lengths) len = draw_gap_length(rng);
  MaskedSample out;
  out.target_ids.assign(ids.begin(), ids.end());
  out.input_ids = out.target_ids;
  out.mask_positions = place_gaps(ids.size(), lengths, rng);
  for (std::int32_t pos : out.mask_positions) out.input_ids[pos] = kMask;
  return out;
}

/// Generator for one sentence; depends only on (seed, epoch, index) so that
/// masking is independent of processing order.
inline Rng sentence_rng(std::uint64_t seed, std::uint64_t epoch, std::size_t index) {
  return Rng(derive_seed(seed ^ epoch, index));
}

inline MaskedSample mask_one(std::span<const TokenId> ids, MaskDistribution dist, std::size_t vocab_size, Rng& rng) {
  return dist == MaskDistribution::Random ? random_mask(ids, vocab_size, rng) : smart_mask(ids, rng);
}

/// Masks a whole split for one epoch. Under Once every epoch yields the
/// epoch-0 masks; under Dynamic each epoch gets fresh masks.
inline std::vector<MaskedSample> apply_policy(const std::vector<std::vector<TokenId>>& split, const MaskPolicy& policy,
                                              std::uint64_t epoch, std::size_t vocab_size) {
  const std::uint64_t effective = policy.remask == Remask::Once ? 0 : epoch;
  std::vector<MaskedSample> out;
  out.reserve(split.size());
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i].empty()) continue;
    Rng rng = sentence_rng(policy.seed, effective, i);
    out.push_back(mask_one(split[i], policy.distribution, vocab_size, rng));
    out.back().epoch_tag = effective;
  }
  return out;
}

/// Maximal runs of consecutive mask positions as (start, length).
inline std::vector<std::pair<std::int32_t, std::int32_t>> mask_runs(std::span<const std::int32_t> positions) {
  std::vector<std::pair<std::int32_t, std::int32_t>> runs;
  for (std::int32_t p : positions) {
    if (!runs.empty() && runs.back().first + runs.back().second == p) {
      ++runs.back().second;
    } else {
      runs.emplace_back(p, 1);
    }
  }
  return runs;
}

/// Vocabulary-independent form of a masked evaluation sentence, as stored on
/// disk. `text` holds the true characters; substitutions list the positions
/// whose model input is a character rather than MASK.
struct MaskedItem {
  std::string id;
  std::u32string text;
  std::vector<std::int32_t> mask_positions;
  std::vector<std::pair<std::int32_t, char32_t>> substitutions;

  bool operator==(const MaskedItem&) const = default;
};

inline MaskedItem to_item(std::string id, std::u32string text, const MaskedSample& sample, const Vocabulary& vocab) {
  MaskedItem item{std::move(id), std::move(text), sample.mask_positions, {}};
  for (std::int32_t pos : sample.mask_positions) {
    const TokenId in = sample.input_ids[pos];
    if (in == kMask) continue;
    const char32_t ch = in == sample.target_ids[pos] ? item.text[pos] : vocab.character(in);
    item.substitutions.emplace_back(pos, ch);
  }
  return item;
}

inline MaskedSample to_sample(const MaskedItem& item, const Vocabulary& vocab) {
  MaskedSample s;
  s.target_ids = vocab.encode(item.text);
  s.input_ids = s.target_ids;
  s.mask_positions = item.mask_positions;
  for (std::int32_t pos : item.mask_positions) s.input_ids[pos] = kMask;
  for (const auto& [pos, ch] : item.substitutions) s.input_ids[pos] = vocab.id(ch);
  return s;
}

namespace detail {

inline std::string format_codepoint(char32_t ch) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "U+%04X", static_cast<unsigned>(ch));
  return buf;
}

}  // namespace detail

/// `<id>\t<markup with [..] per mask run>\t<answers>\t<pos:U+XXXX,...>`
inline std::string format_masked_item(const MaskedItem& item) {
  std::string markup, answers;
  std::size_t next = 0;
  for (const auto& [start, len] : mask_runs(item.mask_positions)) {
    markup += utf8::encode(std::u32string_view(item.text).substr(next, start - next));
    markup += "[" + std::string(static_cast<std::size_t>(len), '.') + "]";
    answers += utf8::encode(std::u32string_view(item.text).substr(start, len));
    next = static_cast<std::size_t>(start + len);
  }
  markup += utf8::encode(std::u32string_view(item.text).substr(next));
  std::string subs;
  for (const auto& [pos, ch] : item.substitutions) {
    if (!subs.empty()) subs += ",";
    subs += std::to_string(pos) + ":" + detail::format_codepoint(ch);
  }
  return item.id + "\t" + markup + "\t" + answers + "\t" + subs;
}

inline MaskedItem parse_masked_item(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (true) {
    const auto tab = line.find('\t', pos);
    fields.push_back(line.substr(pos, tab == std::string_view::npos ? std::string_view::npos : tab - pos));
    if (tab == std::string_view::npos) break;
    pos = tab + 1;
  }
  if (fields.size() != 4) throw Error(ErrorCode::BadFormat, "masked set line needs 4 tab-separated fields");
  MaskedItem item;
  item.id = std::string(fields[0]);
  const Sentence s = parse_line(fields[1]);
  if (classify(s) != SentenceClass::HasBlank) throw Error(ErrorCode::BadFormat, "masked set line has no masked run");
  if (std::any_of(s.segments.begin(), s.segments.end(),
                  [](const Segment& seg) { return seg.kind == SegmentKind::ReconstructedLacuna; })) {
    throw Error(ErrorCode::BadFormat, "masked set line contains a reconstruction");
  }
  const std::u32string answers = utf8::decode(fields[2]);
  std::size_t next_answer = 0;
  for (const auto& slot : slots(s)) {
    if (slot.kind == SlotKind::Gap) {
      if (next_answer == answers.size()) throw Error(ErrorCode::BadFormat, "fewer answers than masked positions");
      item.mask_positions.push_back(static_cast<std::int32_t>(item.text.size()));
      item.text.push_back(answers[next_answer++]);
    } else {
      item.text.push_back(slot.ch);
    }
  }
  if (next_answer != answers.size()) throw Error(ErrorCode::BadFormat, "more answers than masked positions");
  std::string_view subs = fields[3];
  while (!subs.empty()) {
    const auto comma = subs.find(',');
    const std::string_view entry = subs.substr(0, comma);
    const auto colon = entry.find(":U+");
    if (colon == std::string_view::npos) throw Error(ErrorCode::BadFormat, "bad substitution entry");
    const auto p = static_cast<std::int32_t>(std::stol(std::string(entry.substr(0, colon))));
    const auto ch = static_cast<char32_t>(std::stoul(std::string(entry.substr(colon + 3)), nullptr, 16));
    if (!std::binary_search(item.mask_positions.begin(), item.mask_positions.end(), p)) {
      throw Error(ErrorCode::BadFormat, "substitution at an unmasked position");
    }
    item.substitutions.emplace_back(p, ch);
    subs = comma == std::string_view::npos ? std::string_view{} : subs.substr(comma + 1);
  }
  return item;
}

inline void save_masked_set(const std::filesystem::path& path, const std::vector<MaskedItem>& items) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  for (const auto& item : items) out << format_masked_item(item) << "\n";
}

inline std::vector<MaskedItem> load_masked_set(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::vector<MaskedItem> items;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      items.push_back(parse_masked_item(line));
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const std::exception& e) {
      throw Error(ErrorCode::BadFormat, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return items;
}

/// Masks complete sentences into a persisted evaluation set.
inline std::vector<MaskedItem> mask_sentences(const std::vector<Sentence>& sentences, MaskDistribution dist,
                                              std::uint64_t seed, const Vocabulary& vocab) {
  std::vector<MaskedItem> items;
  items.reserve(sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    std::u32string text = characters(sentences[i]);
    if (text.empty()) continue;
    Rng rng = sentence_rng(seed, 0, i);
    const MaskedSample sample = mask_one(vocab.encode(text), dist, vocab.size(), rng);
    items.push_back(to_item(sentences[i].id, std::move(text), sample, vocab));
  }
  return items;
}

}  // namespace lacuna
