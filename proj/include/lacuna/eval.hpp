#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lacuna/checkpoint.hpp"
#include "lacuna/corpus.hpp"
#include "lacuna/error.hpp"
#include "lacuna/masking.hpp"
#include "lacuna/predict.hpp"

namespace lacuna {

/// Predictions for a batch of samples, one id per mask position.
using BatchPredictor = std::function<std::vector<std::vector<TokenId>>(std::span<const MaskedSample>)>;

template <typename PerSample>
BatchPredictor per_sample(PerSample&& predict) {
  return [predict = std::forward<PerSample>(predict)](std::span<const MaskedSample> batch) mutable {
    std::vector<std::vector<TokenId>> out;
    out.reserve(batch.size());
    for (const auto& s : batch) out.push_back(predict(s));
    return out;
  };
}

/// Greedy argmax at the masked positions, one forward pass per batch.
inline BatchPredictor model_predictor(const Checkpoint& ckpt) {
  return [&ckpt](std::span<const MaskedSample> batch) {
    const PaddedBatch padded = PaddedBatch::from_inputs(batch);
    std::vector<std::pair<std::size_t, std::size_t>> where;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      for (std::int32_t p : batch[b].mask_positions) where.emplace_back(b, static_cast<std::size_t>(p));
    }
    const Matrix<float> lp = ckpt.model.forward_at(padded, where);
    std::vector<std::vector<TokenId>> out(batch.size());
    Eigen::Index col = 0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      for (std::size_t i = 0; i < batch[b].mask_positions.size(); ++i) out[b].push_back(best_symbol(lp.col(col++)));
    }
    return out;
  };
}

inline constexpr std::array<const char*, 6> kBucketLabels = {"1", "2", "3", "4", "5", "6+"};

inline std::size_t bucket_index(std::int32_t run_length) {
  return static_cast<std::size_t>(std::min(run_length, 6) - 1);
}

struct BucketStats {
  std::size_t count = 0;
  std::size_t correct = 0;

  double accuracy() const { return count == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(count); }
};

struct EvalReport {
  std::string test_set_name;
  std::size_t total_masked = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  std::array<BucketStats, 6> buckets{};
  std::string model_id;
  std::uint64_t seed = 0;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["test_set_name"] = test_set_name;
    j["model_id"] = model_id;
    j["seed"] = seed;
    j["total_masked"] = total_masked;
    j["correct"] = correct;
    j["accuracy"] = accuracy;
    auto& b = j["per_length_buckets"];
    b = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < buckets.size(); ++i) {
      b[kBucketLabels[i]] = {{"count", buckets[i].count}, {"accuracy", buckets[i].accuracy()}};
    }
    return j;
  }
};

/// Character-exact accuracy over every masked position, bucketed by the
/// length of the mask run each position belongs to.
inline EvalReport evaluate(const BatchPredictor& predictor, std::span<const MaskedSample> test_set,
                           std::string test_set_name, std::string model_id = {}, std::uint64_t seed = 0,
                           std::size_t batch_size = 64) {
  if (test_set.empty()) throw Error(ErrorCode::EmptyTestSet, "test set '" + test_set_name + "' is empty");
  EvalReport r;
  r.test_set_name = std::move(test_set_name);
  r.model_id = std::move(model_id);
  r.seed = seed;
  for (std::size_t start = 0; start < test_set.size(); start += batch_size) {
    const auto chunk = test_set.subspan(start, std::min(batch_size, test_set.size() - start));
    const auto predictions = predictor(chunk);
    if (predictions.size() != chunk.size()) throw Error(ErrorCode::LengthMismatch, "predictor returned wrong batch size");
    for (std::size_t s = 0; s < chunk.size(); ++s) {
      const auto& sample = chunk[s];
      if (sample.mask_positions.empty()) throw Error(ErrorCode::NoMaskedPositions, "test sample without masked positions");
      if (predictions[s].size() != sample.mask_positions.size()) {
        throw Error(ErrorCode::LengthMismatch, "predictor returned wrong number of characters");
      }
      std::size_t k = 0;
      for (const auto& [start_pos, len] : mask_runs(sample.mask_positions)) {
        auto& bucket = r.buckets[bucket_index(len)];
        for (std::int32_t i = 0; i < len; ++i, ++k) {
          const bool hit = predictions[s][k] == sample.target_ids[static_cast<std::size_t>(start_pos + i)];
          ++bucket.count;
          bucket.correct += hit;
          ++r.total_masked;
          r.correct += hit;
        }
      }
    }
  }
  r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.total_masked);
  return r;
}

/// Gold items: every reconstructed character is masked and its editorial
/// reading becomes the target. Damaged characters stay visible.
inline std::vector<MaskedItem> gold_items(const std::vector<Sentence>& reconstructed) {
  std::vector<MaskedItem> items;
  items.reserve(reconstructed.size());
  for (const auto& s : reconstructed) {
    if (classify(s) == SentenceClass::HasBlank) {
      throw Error(ErrorCode::ContainsBlankLacuna, "sentence " + s.id + " has a blank lacuna and has no gold reading");
    }
    MaskedItem item;
    item.id = s.id;
    for (const auto& slot : slots(s)) {
      if (slot.kind == SlotKind::Reconstructed) item.mask_positions.push_back(static_cast<std::int32_t>(item.text.size()));
      item.text.push_back(slot.ch);
    }
    if (item.mask_positions.empty()) continue;
    items.push_back(std::move(item));
  }
  return items;
}

inline std::vector<MaskedSample> build_gold_test(const std::vector<Sentence>& reconstructed, const Vocabulary& vocab) {
  std::vector<MaskedSample> out;
  for (const auto& item : gold_items(reconstructed)) out.push_back(to_sample(item, vocab));
  return out;
}

/// Rows of reports rendered like a results table: one row per model or
/// baseline, one accuracy column per test set.
inline std::string format_table(const std::vector<std::string>& row_names, const std::vector<std::string>& column_names,
                                const std::vector<std::vector<EvalReport>>& rows) {
  std::size_t first = 10;
  for (const auto& n : row_names) first = std::max(first, n.size());
  std::string out;
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
  };
  out += pad("", first);
  for (const auto& c : column_names) out += "  " + pad(c, std::max<std::size_t>(c.size(), 8));
  out += "\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out += pad(row_names[r], first);
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3f", rows[r][c].accuracy);
      out += "  " + pad(buf, std::max<std::size_t>(column_names[c].size(), 8));
    }
    out += "\n";
  }
  return out;
}

}  // namespace lacuna
