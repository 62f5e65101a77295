#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "lacuna/error.hpp"
#include "lacuna/masking.hpp"
#include "lacuna/model.hpp"
#include "lacuna/random.hpp"

namespace lacuna {

struct TrainConfig {
  double learning_rate = 3e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 50;
  std::size_t early_stop_patience = 5;
  std::uint64_t seed = 1;
  std::uint64_t dev_mask_seed = 20240601;
  double grad_clip_norm = 5.0;
  std::size_t max_length = 0;  // 0: no truncation

  void validate() const {
    if (!(learning_rate > 0)) throw Error(ErrorCode::BadFormat, "learning rate must be positive");
    if (early_stop_patience < 1) throw Error(ErrorCode::BadFormat, "patience must be at least 1");
    if (batch_size < 1) throw Error(ErrorCode::BadFormat, "batch size must be at least 1");
  }
};

/// Adam with decoupled weight decay.
template <typename S>
class AdamW {
 public:
  AdamW(const ParameterSet<S>& like, const TrainConfig& cfg)
      : cfg_(cfg), m_(like.zeros_like()), v_(like.zeros_like()) {}

  void step(ParameterSet<S>& params, const ParameterSet<S>& grad) {
    ++t_;
    const S lr = static_cast<S>(cfg_.learning_rate);
    const S decay = static_cast<S>(1.0 - cfg_.learning_rate * cfg_.weight_decay);
    const S b1 = static_cast<S>(cfg_.beta1), b2 = static_cast<S>(cfg_.beta2);
    const S c1 = static_cast<S>(1.0 - std::pow(cfg_.beta1, static_cast<double>(t_)));
    const S c2 = static_cast<S>(1.0 - std::pow(cfg_.beta2, static_cast<double>(t_)));
    const S eps = static_cast<S>(cfg_.epsilon);
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& p = params.values[k];
      const auto& g = grad.values[k];
      auto& m = m_.values[k];
      auto& v = v_.values[k];
      m = b1 * m + (S(1) - b1) * g;
      v = b2 * v + (S(1) - b2) * g.cwiseProduct(g);
      p *= decay;
      p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    }
  }

  std::uint64_t steps() const { return t_; }

 private:
  TrainConfig cfg_;
  ParameterSet<S> m_;
  ParameterSet<S> v_;
  std::uint64_t t_ = 0;
};

/// Rescales gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
template <typename S>
double clip_gradients(ParameterSet<S>& grad, double max_norm) {
  const double norm = std::sqrt(static_cast<double>(grad.squared_norm()));
  if (max_norm > 0 && norm > max_norm) {
    const S scale = static_cast<S>(max_norm / (norm + 1e-6));
    for (auto& g : grad.values) g *= scale;
  }
  return norm;
}

struct EpochRecord {
  std::size_t epoch = 0;  // 0 is the untrained model
  double train_loss = std::numeric_limits<double>::quiet_NaN();
  double dev_loss = 0.0;
  double dev_accuracy = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  BiLstmMlm<float> best;
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;
  double best_dev_accuracy = 0.0;
};

/// Loss and masked accuracy over a fixed sample set, no gradients.
template <typename S>
LossResult evaluate_loss(const BiLstmMlm<S>& model, std::span<const MaskedSample> samples, std::size_t batch_size) {
  LossResult total;
  double nll = 0.0;
  for (std::size_t i = 0; i < samples.size(); i += batch_size) {
    const auto chunk = samples.subspan(i, std::min(batch_size, samples.size() - i));
    const LossResult r = model.loss(chunk);
    nll += r.loss * static_cast<double>(r.masked);
    total.masked += r.masked;
    total.correct += r.correct;
  }
  total.loss = total.masked == 0 ? 0.0 : nll / static_cast<double>(total.masked);
  return total;
}

/// Batches of similar length: shuffle, sort inside pools of 16 batches,
/// then shuffle the batch order.
inline std::vector<std::vector<std::size_t>> make_batches(const std::vector<MaskedSample>& samples,
                                                          std::size_t batch_size, Rng& rng) {
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  const std::size_t pool = batch_size * 16;
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < order.size(); start += pool) {
    const auto end = order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + pool));
    std::stable_sort(order.begin() + static_cast<std::ptrdiff_t>(start), end, [&](std::size_t a, std::size_t b) {
      return samples[a].input_ids.size() < samples[b].input_ids.size();
    });
    for (auto it = order.begin() + static_cast<std::ptrdiff_t>(start); it < end;) {
      const auto stop = std::min(end, it + static_cast<std::ptrdiff_t>(batch_size));
      batches.emplace_back(it, stop);
      it = stop;
    }
  }
  for (std::size_t i = batches.size(); i > 1; --i) std::swap(batches[i - 1], batches[rng.below(i)]);
  return batches;
}

inline std::vector<std::vector<TokenId>> truncate(std::vector<std::vector<TokenId>> seqs, std::size_t max_length) {
  if (max_length == 0) return seqs;
  for (auto& s : seqs) {
    if (s.size() > max_length) s.resize(max_length);
  }
  return seqs;
}

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains from scratch. The dev split is masked once with a fixed seed and
/// the model with the best dev masked accuracy is returned.
inline TrainResult train(const std::vector<std::vector<TokenId>>& train_split,
                         const std::vector<std::vector<TokenId>>& dev_split, const MaskPolicy& policy,
                         const ModelConfig& model_config, const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  model_config.validate();
  const auto train_seqs = truncate(train_split, cfg.max_length);
  const auto dev_seqs = truncate(dev_split, cfg.max_length);
  const MaskPolicy dev_policy{policy.distribution, Remask::Once, cfg.dev_mask_seed};
  const auto dev = apply_policy(dev_seqs, dev_policy, 0, model_config.vocab_size);

  BiLstmMlm<float> model = BiLstmMlm<float>::initialized(model_config, cfg.seed);
  AdamW<float> optimizer(model.parameters(), cfg);
  ParameterSet<float> grad = model.parameters().zeros_like();

  using clock = std::chrono::steady_clock;
  TrainResult result;
  auto record_dev = [&](EpochRecord& rec) {
    if (dev.empty()) return;
    const LossResult r = evaluate_loss(model, dev, cfg.batch_size);
    rec.dev_loss = r.loss;
    rec.dev_accuracy = r.masked == 0 ? 0.0 : static_cast<double>(r.correct) / static_cast<double>(r.masked);
  };

  {
    const auto t0 = clock::now();
    EpochRecord initial;
    record_dev(initial);
    initial.seconds = std::chrono::duration<double>(clock::now() - t0).count();
    result.log.push_back(initial);
    result.best = model;
    result.best_dev_accuracy = initial.dev_accuracy;
    if (on_epoch) on_epoch(initial);
  }

  std::vector<MaskedSample> once_cache;
  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = clock::now();
    const std::vector<MaskedSample>* samples = nullptr;
    std::vector<MaskedSample> fresh;
    if (policy.remask == Remask::Once) {
      if (once_cache.empty()) once_cache = apply_policy(train_seqs, policy, 0, model_config.vocab_size);
      samples = &once_cache;
    } else {
      fresh = apply_policy(train_seqs, policy, epoch - 1, model_config.vocab_size);
      samples = &fresh;
    }
    Rng order_rng(derive_seed(cfg.seed, epoch));
    const auto batches = make_batches(*samples, cfg.batch_size, order_rng);

    double loss_sum = 0.0;
    std::size_t masked = 0;
    std::vector<MaskedSample> batch;
    for (const auto& indices : batches) {
      batch.clear();
      for (std::size_t i : indices) batch.push_back((*samples)[i]);
      grad.set_zero();
      const LossResult r = model.loss(batch, &grad);
      if (!std::isfinite(r.loss)) {
        throw Error(ErrorCode::DivergedLoss, "non-finite training loss in epoch " + std::to_string(epoch));
      }
      clip_gradients(grad, cfg.grad_clip_norm);
      optimizer.step(model.parameters(), grad);
      loss_sum += r.loss * static_cast<double>(r.masked);
      masked += r.masked;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = masked == 0 ? 0.0 : loss_sum / static_cast<double>(masked);
    record_dev(rec);
    if (!std::isfinite(rec.dev_loss)) throw Error(ErrorCode::DivergedLoss, "non-finite dev loss");
    rec.seconds = std::chrono::duration<double>(clock::now() - t0).count();
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.dev_accuracy > result.best_dev_accuracy || result.best_epoch == 0) {
      result.best = model;
      result.best_epoch = epoch;
      result.best_dev_accuracy = rec.dev_accuracy;
      stale = 0;
    } else if (++stale >= cfg.early_stop_patience) {
      break;
    }
  }
  return result;
}

}  // namespace lacuna
