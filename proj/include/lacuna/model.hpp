#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lacuna/error.hpp"
#include "lacuna/masking.hpp"
#include "lacuna/random.hpp"
#include "lacuna/vocab.hpp"

namespace lacuna {

template <typename S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <typename S>
using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t embedding_dim = 200;
  std::size_t hidden_dim = 300;  // per direction
  std::size_t projection_dim = 150;
  std::size_t layers = 4;
  bool bidirectional = true;

  std::size_t directions() const { return bidirectional ? 2 : 1; }
  std::size_t top_dim() const { return directions() * hidden_dim; }

  void validate() const {
    if (vocab_size < 1 || embedding_dim < 1 || hidden_dim < 1 || projection_dim < 1 || layers < 1) {
      throw Error(ErrorCode::BadFormat, "model dimensions must all be at least 1");
    }
  }

  bool operator==(const ModelConfig&) const = default;
};

/// Right-padded batch of token sequences. Column `t * batch + b` of every
/// activation matrix holds position t of sequence b.
struct PaddedBatch {
  std::vector<TokenId> ids;  // width x batch, position-major
  std::vector<std::size_t> lengths;
  std::size_t width = 0;

  std::size_t batch() const { return lengths.size(); }
  std::size_t column(std::size_t b, std::size_t t) const { return t * batch() + b; }

  static PaddedBatch from(std::span<const std::vector<TokenId>> sequences) {
    PaddedBatch out;
    for (const auto& s : sequences) out.width = std::max(out.width, s.size());
    out.lengths.reserve(sequences.size());
    for (const auto& s : sequences) out.lengths.push_back(s.size());
    out.ids.assign(out.width * sequences.size(), kPad);
    for (std::size_t b = 0; b < sequences.size(); ++b) {
      for (std::size_t t = 0; t < sequences[b].size(); ++t) out.ids[out.column(b, t)] = sequences[b][t];
    }
    return out;
  }

  static PaddedBatch from_inputs(std::span<const MaskedSample> samples) {
    std::vector<std::vector<TokenId>> seqs;
    seqs.reserve(samples.size());
    for (const auto& s : samples) seqs.push_back(s.input_ids);
    return from(seqs);
  }
};

/// Log distributions over the vocabulary, one column per batch position.
/// Columns at padding positions are unspecified.
template <typename S>
struct LogProbs {
  Matrix<S> values;  // vocab x (width * batch)
  std::size_t width = 0;
  std::size_t batch = 0;

  auto at(std::size_t b, std::size_t t) const { return values.col(t * batch + b); }
};

/// Named parameter tensors. Matrices are stored exactly as their named
/// shape (rows x cols); biases are column vectors.
template <typename S>
struct ParameterSet {
  std::vector<std::string> names;
  std::vector<Matrix<S>> values;

  std::size_t size() const { return values.size(); }

  ParameterSet zeros_like() const {
    ParameterSet out;
    out.names = names;
    for (const auto& v : values) out.values.push_back(Matrix<S>::Zero(v.rows(), v.cols()));
    return out;
  }

  void set_zero() {
    for (auto& v : values) v.setZero();
  }

  S squared_norm() const {
    S total = 0;
    for (const auto& v : values) total += v.squaredNorm();
    return total;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& v : values) n += static_cast<std::size_t>(v.size());
    return n;
  }
};

struct LossResult {
  double loss = 0.0;
  std::size_t masked = 0;
  std::size_t correct = 0;  // argmax hits among masked positions
};

/// Character-level masked language model: embedding, stacked bidirectional
/// LSTM, linear projection of the concatenated top states, linear output
/// layer and log-softmax. Templated on the scalar so the same code runs in
/// float for training and in double for gradient checking.
template <typename S>
class BiLstmMlm {
 public:
  BiLstmMlm() = default;

  explicit BiLstmMlm(const ModelConfig& config) : config_(config) {
    config_.validate();
    layout();
  }

  static BiLstmMlm initialized(const ModelConfig& config, std::uint64_t seed) {
    BiLstmMlm m(config);
    Rng rng(seed);
    auto uniform = [&](Matrix<S>& mat, double bound) {
      for (Eigen::Index j = 0; j < mat.cols(); ++j)
        for (Eigen::Index i = 0; i < mat.rows(); ++i) mat(i, j) = static_cast<S>((2.0 * rng.uniform() - 1.0) * bound);
    };
    auto& p = m.params_.values;
    for (Eigen::Index j = 0; j < p[0].cols(); ++j)
      for (Eigen::Index i = 0; i < p[0].rows(); ++i) p[0](i, j) = static_cast<S>(rng.normal());
    const double lstm_bound = 1.0 / std::sqrt(static_cast<double>(config.hidden_dim));
    for (std::size_t k = 1; k < m.projection_index(); ++k) uniform(p[k], lstm_bound);
    const double proj_bound = 1.0 / std::sqrt(static_cast<double>(config.top_dim()));
    uniform(p[m.projection_index()], proj_bound);
    uniform(p[m.projection_index() + 1], proj_bound);
    const double out_bound = 1.0 / std::sqrt(static_cast<double>(config.projection_dim));
    uniform(p[m.projection_index() + 2], out_bound);
    uniform(p[m.projection_index() + 3], out_bound);
    return m;
  }

  const ModelConfig& config() const { return config_; }
  const ParameterSet<S>& parameters() const { return params_; }
  ParameterSet<S>& parameters() { return params_; }

  template <typename T>
  BiLstmMlm<T> cast() const {
    BiLstmMlm<T> out(config_);
    for (std::size_t k = 0; k < params_.size(); ++k) out.parameters().values[k] = params_.values[k].template cast<T>();
    return out;
  }

  /// Full log distributions at every position.
  LogProbs<S> forward(const PaddedBatch& batch) const {
    validate(batch);
    Cache cache;
    run_encoder(batch, cache);
    LogProbs<S> out;
    out.width = batch.width;
    out.batch = batch.batch();
    out.values = head(cache.top);
    return out;
  }

  /// Log distributions at the listed (sequence, position) pairs only.
  Matrix<S> forward_at(const PaddedBatch& batch, std::span<const std::pair<std::size_t, std::size_t>> where) const {
    validate(batch);
    Cache cache;
    run_encoder(batch, cache);
    Matrix<S> selected(cache.top.rows(), static_cast<Eigen::Index>(where.size()));
    for (std::size_t k = 0; k < where.size(); ++k) {
      const auto [b, t] = where[k];
      if (t >= batch.lengths.at(b)) throw Error(ErrorCode::LengthMismatch, "position beyond sequence length");
      selected.col(static_cast<Eigen::Index>(k)) = cache.top.col(static_cast<Eigen::Index>(batch.column(b, t)));
    }
    return head(selected);
  }

  /// Mean negative log-likelihood over the masked positions of the batch.
  /// When `grad` is given it receives d(loss)/d(parameters).
  LossResult loss(std::span<const MaskedSample> samples, ParameterSet<S>* grad = nullptr) const {
    const PaddedBatch batch = PaddedBatch::from_inputs(samples);
    validate(batch);
    std::vector<Eigen::Index> cols;
    std::vector<TokenId> targets;
    for (std::size_t b = 0; b < samples.size(); ++b) {
      const auto& s = samples[b];
      if (s.target_ids.size() != s.input_ids.size()) throw Error(ErrorCode::LengthMismatch, "input/target length differ");
      if (s.mask_positions.empty()) throw Error(ErrorCode::NoMaskedPositions, "sample has no masked positions");
      for (std::int32_t pos : s.mask_positions) {
        if (pos < 0 || static_cast<std::size_t>(pos) >= s.input_ids.size()) {
          throw Error(ErrorCode::LengthMismatch, "mask position beyond sequence length");
        }
        cols.push_back(static_cast<Eigen::Index>(batch.column(b, static_cast<std::size_t>(pos))));
        targets.push_back(s.target_ids[static_cast<std::size_t>(pos)]);
      }
    }
    for (TokenId t : targets) check_id(t);

    Cache cache;
    run_encoder(batch, cache);
    const auto n = static_cast<Eigen::Index>(cols.size());
    Matrix<S> hs(cache.top.rows(), n);
    for (Eigen::Index k = 0; k < n; ++k) hs.col(k) = cache.top.col(cols[static_cast<std::size_t>(k)]);

    const auto& p = params_.values;
    const std::size_t pi = projection_index();
    Matrix<S> q = p[pi] * hs;
    q.colwise() += Vector<S>(p[pi + 1].col(0));
    Matrix<S> logits = p[pi + 2] * q;
    logits.colwise() += Vector<S>(p[pi + 3].col(0));
    log_softmax_inplace(logits);

    LossResult result;
    result.masked = static_cast<std::size_t>(n);
    double total = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      const TokenId target = targets[static_cast<std::size_t>(k)];
      total -= static_cast<double>(logits(target, k));
      Eigen::Index best = 0;
      logits.col(k).maxCoeff(&best);
      result.correct += best == target;
    }
    result.loss = total / static_cast<double>(n);
    if (!grad) return result;

    // Softmax cross-entropy gradient, averaged over masked positions.
    Matrix<S> dlogits = logits.array().exp().matrix();
    for (Eigen::Index k = 0; k < n; ++k) dlogits(targets[static_cast<std::size_t>(k)], k) -= S(1);
    dlogits /= static_cast<S>(n);

    auto& g = grad->values;
    g[pi + 2].noalias() += dlogits * q.transpose();
    g[pi + 3].noalias() += dlogits.rowwise().sum();
    const Matrix<S> dq = p[pi + 2].transpose() * dlogits;
    g[pi].noalias() += dq * hs.transpose();
    g[pi + 1].noalias() += dq.rowwise().sum();
    const Matrix<S> dhs = p[pi].transpose() * dq;

    Matrix<S> dtop = Matrix<S>::Zero(cache.top.rows(), cache.top.cols());
    for (Eigen::Index k = 0; k < n; ++k) dtop.col(cols[static_cast<std::size_t>(k)]) += dhs.col(k);
    backward_encoder(batch, cache, std::move(dtop), *grad);
    return result;
  }

  std::size_t projection_index() const { return 1 + 3 * config_.layers * config_.directions(); }

  std::size_t lstm_index(std::size_t layer, std::size_t dir) const {
    return 1 + 3 * (layer * config_.directions() + dir);
  }

 private:
  struct DirectionCache {
    Matrix<S> input;  // in direction time order
    Matrix<S> gates;  // 4H x TB: i, f, g, o after activation
    Matrix<S> cell;
    Matrix<S> cell_tanh;
    Matrix<S> hidden;
  };

  struct Cache {
    std::vector<std::vector<DirectionCache>> layers;
    Matrix<S> top;
  };

  void layout() {
    const auto& c = config_;
    const auto H = static_cast<Eigen::Index>(c.hidden_dim);
    auto add = [&](std::string name, Eigen::Index rows, Eigen::Index cols) {
      params_.names.push_back(std::move(name));
      params_.values.push_back(Matrix<S>::Zero(rows, cols));
    };
    add("embedding.weight", static_cast<Eigen::Index>(c.vocab_size), static_cast<Eigen::Index>(c.embedding_dim));
    for (std::size_t l = 0; l < c.layers; ++l) {
      const auto in = static_cast<Eigen::Index>(l == 0 ? c.embedding_dim : c.top_dim());
      for (std::size_t d = 0; d < c.directions(); ++d) {
        const std::string prefix = "lstm." + std::to_string(l) + (d == 0 ? ".forward." : ".backward.");
        add(prefix + "weight_ih", 4 * H, in);
        add(prefix + "weight_hh", 4 * H, H);
        add(prefix + "bias", 4 * H, 1);
      }
    }
    add("projection.weight", static_cast<Eigen::Index>(c.projection_dim), static_cast<Eigen::Index>(c.top_dim()));
    add("projection.bias", static_cast<Eigen::Index>(c.projection_dim), 1);
    add("output.weight", static_cast<Eigen::Index>(c.vocab_size), static_cast<Eigen::Index>(c.projection_dim));
    add("output.bias", static_cast<Eigen::Index>(c.vocab_size), 1);
  }

  void check_id(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= config_.vocab_size) {
      throw Error(ErrorCode::IndexOutOfVocab, "token id " + std::to_string(id) + " outside vocabulary");
    }
  }

  void validate(const PaddedBatch& batch) const {
    if (batch.ids.size() != batch.width * batch.batch()) throw Error(ErrorCode::LengthMismatch, "batch shape mismatch");
    for (std::size_t len : batch.lengths) {
      if (len > batch.width) throw Error(ErrorCode::LengthMismatch, "sequence length exceeds padded width");
    }
    for (TokenId id : batch.ids) check_id(id);
  }

  static void log_softmax_inplace(Matrix<S>& logits) {
    for (Eigen::Index k = 0; k < logits.cols(); ++k) {
      auto col = logits.col(k);
      const S mx = col.maxCoeff();
      const S lse = mx + std::log((col.array() - mx).exp().sum());
      col.array() -= lse;
    }
  }

  Matrix<S> head(const Matrix<S>& top) const {
    const auto& p = params_.values;
    const std::size_t pi = projection_index();
    Matrix<S> q = p[pi] * top;
    q.colwise() += Vector<S>(p[pi + 1].col(0));
    Matrix<S> logits = p[pi + 2] * q;
    logits.colwise() += Vector<S>(p[pi + 3].col(0));
    log_softmax_inplace(logits);
    return logits;
  }

  // Column permutation that reverses the real prefix of every sequence.
  // It is its own inverse; padding columns map to themselves.
  static std::vector<Eigen::Index> reversal(const PaddedBatch& batch) {
    std::vector<Eigen::Index> perm(batch.width * batch.batch());
    for (std::size_t b = 0; b < batch.batch(); ++b) {
      const std::size_t len = batch.lengths[b];
      for (std::size_t t = 0; t < batch.width; ++t) {
        const std::size_t src = t < len ? len - 1 - t : t;
        perm[batch.column(b, t)] = static_cast<Eigen::Index>(batch.column(b, src));
      }
    }
    return perm;
  }

  static Matrix<S> permute_columns(const Matrix<S>& m, const std::vector<Eigen::Index>& perm) {
    Matrix<S> out(m.rows(), m.cols());
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.col(c) = m.col(perm[static_cast<std::size_t>(c)]);
    return out;
  }

  void run_lstm(std::size_t layer, std::size_t dir, std::size_t batch_size, DirectionCache& dc) const {
    const auto& w_ih = params_.values[lstm_index(layer, dir)];
    const auto& w_hh = params_.values[lstm_index(layer, dir) + 1];
    const auto& bias = params_.values[lstm_index(layer, dir) + 2];
    const auto H = static_cast<Eigen::Index>(config_.hidden_dim);
    const auto B = static_cast<Eigen::Index>(batch_size);
    const Eigen::Index cols = dc.input.cols();
    const Eigen::Index steps = B == 0 ? 0 : cols / B;

    dc.gates.noalias() = w_ih * dc.input;
    dc.gates.colwise() += Vector<S>(bias.col(0));
    dc.cell.resize(H, cols);
    dc.cell_tanh.resize(H, cols);
    dc.hidden.resize(H, cols);

    for (Eigen::Index t = 0; t < steps; ++t) {
      auto z = dc.gates.middleCols(t * B, B);
      if (t > 0) z.noalias() += w_hh * dc.hidden.middleCols((t - 1) * B, B);
      auto sigmoid = [](auto&& block) { block = (S(1) + (-block.array()).exp()).inverse().matrix(); };
      sigmoid(z.topRows(2 * H));
      z.middleRows(2 * H, H) = z.middleRows(2 * H, H).array().tanh().matrix();
      sigmoid(z.bottomRows(H));
      auto c = dc.cell.middleCols(t * B, B);
      c = z.topRows(H).cwiseProduct(z.middleRows(2 * H, H));
      if (t > 0) c += z.middleRows(H, H).cwiseProduct(dc.cell.middleCols((t - 1) * B, B));
      dc.cell_tanh.middleCols(t * B, B) = c.array().tanh().matrix();
      dc.hidden.middleCols(t * B, B) = z.bottomRows(H).cwiseProduct(dc.cell_tanh.middleCols(t * B, B));
    }
  }

  void run_encoder(const PaddedBatch& batch, Cache& cache) const {
    const auto cols = static_cast<Eigen::Index>(batch.ids.size());
    const auto& emb = params_.values[0];
    Matrix<S> x(emb.cols(), cols);
    for (Eigen::Index c = 0; c < cols; ++c) x.col(c) = emb.row(batch.ids[static_cast<std::size_t>(c)]).transpose();

    const auto perm = reversal(batch);
    const auto H = static_cast<Eigen::Index>(config_.hidden_dim);
    cache.layers.assign(config_.layers, std::vector<DirectionCache>(config_.directions()));
    for (std::size_t l = 0; l < config_.layers; ++l) {
      Matrix<S> next(config_.top_dim(), cols);
      for (std::size_t d = 0; d < config_.directions(); ++d) {
        auto& dc = cache.layers[l][d];
        dc.input = d == 0 ? x : permute_columns(x, perm);
        run_lstm(l, d, batch.batch(), dc);
        next.middleRows(static_cast<Eigen::Index>(d) * H, H) = d == 0 ? dc.hidden : permute_columns(dc.hidden, perm);
      }
      x = std::move(next);
    }
    cache.top = std::move(x);
  }

  // Back-propagates through one direction; returns d(loss)/d(input) in the
  // direction's time order and accumulates parameter gradients.
  Matrix<S> backward_lstm(std::size_t layer, std::size_t dir, std::size_t batch_size, const DirectionCache& dc,
                          const Matrix<S>& dhidden, ParameterSet<S>& grad) const {
    const auto& w_ih = params_.values[lstm_index(layer, dir)];
    const auto& w_hh = params_.values[lstm_index(layer, dir) + 1];
    const auto H = static_cast<Eigen::Index>(config_.hidden_dim);
    const auto B = static_cast<Eigen::Index>(batch_size);
    const Eigen::Index cols = dc.input.cols();
    const Eigen::Index steps = B == 0 ? 0 : cols / B;

    Matrix<S> dz(4 * H, cols);
    Matrix<S> dh_next = Matrix<S>::Zero(H, B);
    Matrix<S> dc_next = Matrix<S>::Zero(H, B);
    for (Eigen::Index t = steps - 1; t >= 0; --t) {
      const auto gates = dc.gates.middleCols(t * B, B);
      const auto i = gates.topRows(H).array();
      const auto f = gates.middleRows(H, H).array();
      const auto g = gates.middleRows(2 * H, H).array();
      const auto o = gates.bottomRows(H).array();
      const auto tc = dc.cell_tanh.middleCols(t * B, B).array();

      const Matrix<S> dh = dhidden.middleCols(t * B, B) + dh_next;
      const Matrix<S> dcell = (dc_next.array() + dh.array() * o * (S(1) - tc * tc)).matrix();
      auto dzt = dz.middleCols(t * B, B);
      dzt.topRows(H) = (dcell.array() * g * i * (S(1) - i)).matrix();
      if (t > 0) {
        const auto c_prev = dc.cell.middleCols((t - 1) * B, B).array();
        dzt.middleRows(H, H) = (dcell.array() * c_prev * f * (S(1) - f)).matrix();
      } else {
        dzt.middleRows(H, H).setZero();
      }
      dzt.middleRows(2 * H, H) = (dcell.array() * i * (S(1) - g * g)).matrix();
      dzt.bottomRows(H) = (dh.array() * tc * o * (S(1) - o)).matrix();
      dc_next = (dcell.array() * f).matrix();
      dh_next.noalias() = w_hh.transpose() * dzt;
    }

    auto& g = grad.values;
    g[lstm_index(layer, dir)].noalias() += dz * dc.input.transpose();
    if (steps > 1) {
      g[lstm_index(layer, dir) + 1].noalias() +=
          dz.rightCols((steps - 1) * B) * dc.hidden.leftCols((steps - 1) * B).transpose();
    }
    g[lstm_index(layer, dir) + 2].noalias() += dz.rowwise().sum();
    return w_ih.transpose() * dz;
  }

  void backward_encoder(const PaddedBatch& batch, const Cache& cache, Matrix<S> dtop, ParameterSet<S>& grad) const {
    const auto perm = reversal(batch);
    const auto H = static_cast<Eigen::Index>(config_.hidden_dim);
    Matrix<S> dx = std::move(dtop);
    for (std::size_t l = config_.layers; l-- > 0;) {
      Matrix<S> dinput;
      for (std::size_t d = 0; d < config_.directions(); ++d) {
        const auto& dc = cache.layers[l][d];
        Matrix<S> dh = dx.middleRows(static_cast<Eigen::Index>(d) * H, H);
        if (d == 1) dh = permute_columns(dh, perm);
        Matrix<S> din = backward_lstm(l, d, batch.batch(), dc, dh, grad);
        if (d == 1) din = permute_columns(din, perm);
        if (d == 0) dinput = std::move(din);
        else dinput += din;
      }
      dx = std::move(dinput);
    }
    auto& demb = grad.values[0];
    for (std::size_t b = 0; b < batch.batch(); ++b) {
      for (std::size_t t = 0; t < batch.lengths[b]; ++t) {
        const auto c = static_cast<Eigen::Index>(batch.column(b, t));
        demb.row(batch.ids[static_cast<std::size_t>(c)]) += dx.col(c).transpose();
      }
    }
  }

  ModelConfig config_;
  ParameterSet<S> params_;
};

}  // namespace lacuna
