#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "lacuna/error.hpp"
#include "lacuna/masking.hpp"
#include "lacuna/random.hpp"
#include "lacuna/vocab.hpp"

namespace lacuna {

/// Uniform choice among the real symbols at every masked position.
class RandomBaseline {
 public:
  RandomBaseline(std::size_t vocab_size, std::uint64_t seed) : vocab_size_(vocab_size), rng_(seed) {}

  std::vector<TokenId> predict(const MaskedSample& sample) {
    const std::size_t symbols = vocab_size_ > kFirstSymbol ? vocab_size_ - kFirstSymbol : 0;
    std::vector<TokenId> out;
    out.reserve(sample.mask_positions.size());
    for (std::size_t i = 0; i < sample.mask_positions.size(); ++i) {
      out.push_back(symbols == 0 ? kUnk : kFirstSymbol + static_cast<TokenId>(rng_.below(symbols)));
    }
    return out;
  }

 private:
  std::size_t vocab_size_;
  Rng rng_;
};

/// Most frequent real symbol of the training split (ties: lowest id).
inline TokenId mode_symbol(const std::vector<std::vector<TokenId>>& train) {
  std::unordered_map<TokenId, std::size_t> counts;
  for (const auto& seq : train) {
    for (TokenId id : seq) {
      if (id >= kFirstSymbol) ++counts[id];
    }
  }
  if (counts.empty()) throw Error(ErrorCode::EmptyCorpus, "mode baseline needs a non-empty training split");
  TokenId best = -1;
  std::size_t best_count = 0;
  for (const auto& [id, n] : counts) {
    if (n > best_count || (n == best_count && id < best)) {
      best = id;
      best_count = n;
    }
  }
  return best;
}

class ModeBaseline {
 public:
  explicit ModeBaseline(const std::vector<std::vector<TokenId>>& train) : mode_(mode_symbol(train)) {}

  TokenId symbol() const { return mode_; }

  std::vector<TokenId> predict(const MaskedSample& sample) const {
    return std::vector<TokenId>(sample.mask_positions.size(), mode_);
  }

 private:
  TokenId mode_;
};

/// Character 1/2/3-gram counts with add-k smoothing and backoff to the
/// shorter context when a context was never seen.
class TrigramTable {
 public:
  static constexpr double kDefaultSmoothing = 0.01;

  TrigramTable(const std::vector<std::vector<TokenId>>& train, std::size_t vocab_size, double k = kDefaultSmoothing)
      : vocab_size_(vocab_size), k_(k) {
    for (const auto& seq : train) {
      for (std::size_t i = 0; i < seq.size(); ++i) {
        ++unigram_[seq[i]];
        ++total_;
        if (i >= 1) {
          ++bigram_[key(seq[i - 1], seq[i])];
          ++bigram_context_[seq[i - 1]];
        }
        if (i >= 2) {
          ++trigram_[key(seq[i - 2], seq[i - 1], seq[i])];
          ++trigram_context_[key(seq[i - 2], seq[i - 1])];
        }
      }
    }
  }

  std::size_t vocab_size() const { return vocab_size_; }
  double smoothing() const { return k_; }
  std::size_t candidates() const { return vocab_size_ > kFirstSymbol ? vocab_size_ - kFirstSymbol : 0; }

  std::size_t count(TokenId c) const { return lookup(unigram_, static_cast<std::uint64_t>(c)); }
  std::size_t count(TokenId b, TokenId c) const { return lookup(bigram_, key(b, c)); }
  std::size_t count(TokenId a, TokenId b, TokenId c) const { return lookup(trigram_, key(a, b, c)); }
  std::size_t context_count(TokenId b) const { return lookup(bigram_context_, static_cast<std::uint64_t>(b)); }
  std::size_t context_count(TokenId a, TokenId b) const { return lookup(trigram_context_, key(a, b)); }

  /// p(c | history) over the real symbols. `history` holds up to two
  /// preceding ids, oldest first; fewer are used near the sentence start.
  double probability(TokenId c, std::span<const TokenId> history) const {
    const auto [num, den] = smoothed_counts(c, history);
    return (num + k_) / (den + k_ * static_cast<double>(candidates()));
  }

  TokenId best(std::span<const TokenId> history) const {
    TokenId best = kFirstSymbol;
    double best_num = -1.0;
    for (TokenId c = kFirstSymbol; static_cast<std::size_t>(c) < vocab_size_; ++c) {
      const double num = smoothed_counts(c, history).first;
      if (num > best_num) {
        best = c;
        best_num = num;
      }
    }
    return best;
  }

  /// Left-to-right fill; each prediction becomes context for the next.
  std::vector<TokenId> predict(const MaskedSample& sample) const {
    std::vector<TokenId> work = sample.target_ids;
    std::vector<TokenId> out;
    out.reserve(sample.mask_positions.size());
    for (std::int32_t pos : sample.mask_positions) {
      const auto p = static_cast<std::size_t>(pos);
      const std::size_t from = p >= 2 ? p - 2 : 0;
      const TokenId pred = best(std::span<const TokenId>(work.data() + from, p - from));
      work[p] = pred;
      out.push_back(pred);
    }
    return out;
  }

  /// Sorted `context<TAB>char<TAB>count` lines; the empty context holds
  /// unigram counts.
  void save(const std::filesystem::path& path, const Vocabulary& vocab) const {
    std::vector<std::tuple<std::string, std::string, std::size_t>> rows;
    for (const auto& [id, n] : unigram_) rows.emplace_back("", vocab.symbol(static_cast<TokenId>(id)), n);
    for (const auto& [k, n] : bigram_) {
      rows.emplace_back(vocab.symbol(part(k, 1)), vocab.symbol(part(k, 0)), n);
    }
    for (const auto& [k, n] : trigram_) {
      rows.emplace_back(vocab.symbol(part(k, 2)) + vocab.symbol(part(k, 1)), vocab.symbol(part(k, 0)), n);
    }
    std::sort(rows.begin(), rows.end());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    for (const auto& [ctx, ch, n] : rows) out << ctx << '\t' << ch << '\t' << n << '\n';
  }

 private:
  static constexpr int kBits = 21;

  static std::uint64_t key(TokenId b, TokenId c) {
    return (static_cast<std::uint64_t>(b) << kBits) | static_cast<std::uint64_t>(c);
  }
  static std::uint64_t key(TokenId a, TokenId b, TokenId c) {
    return (static_cast<std::uint64_t>(a) << (2 * kBits)) | key(b, c);
  }
  static TokenId part(std::uint64_t k, int i) {
    return static_cast<TokenId>((k >> (kBits * i)) & ((1u << kBits) - 1));
  }

  static std::size_t lookup(const std::unordered_map<std::uint64_t, std::size_t>& m, std::uint64_t k) {
    const auto it = m.find(k);
    return it == m.end() ? 0 : it->second;
  }

  std::pair<double, double> smoothed_counts(TokenId c, std::span<const TokenId> history) const {
    if (history.size() >= 2) {
      const TokenId a = history[history.size() - 2], b = history[history.size() - 1];
      if (const std::size_t ctx = context_count(a, b); ctx > 0) {
        return {static_cast<double>(count(a, b, c)), static_cast<double>(ctx)};
      }
    }
    if (!history.empty()) {
      const TokenId b = history.back();
      if (const std::size_t ctx = context_count(b); ctx > 0) {
        return {static_cast<double>(count(b, c)), static_cast<double>(ctx)};
      }
    }
    return {static_cast<double>(count(c)), static_cast<double>(total_)};
  }

  std::size_t vocab_size_;
  double k_;
  std::size_t total_ = 0;
  std::unordered_map<std::uint64_t, std::size_t> unigram_;
  std::unordered_map<std::uint64_t, std::size_t> bigram_;
  std::unordered_map<std::uint64_t, std::size_t> trigram_;
  std::unordered_map<std::uint64_t, std::size_t> bigram_context_;
  std::unordered_map<std::uint64_t, std::size_t> trigram_context_;
};

}  // namespace lacuna
