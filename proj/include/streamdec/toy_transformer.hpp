#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "streamdec/denoiser.hpp"

namespace streamdec {

// Single bidirectional attention layer over the view (no feed-forward, tied
// output embedding). Weights are fixed at construction from the seed. Rotary
// phases use the view's original position ids, so attention is invariant
// under a uniform shift but sensitive to pruning gaps.
class ToyTransformer final : public Denoiser {
 public:
  ToyTransformer(int embed_dim, const Vocab& vocab, std::uint64_t seed)
      : Denoiser(vocab, seed), dim_(embed_dim) {
    if (embed_dim <= 0 || embed_dim % 2 != 0)
      fail(Errc::OddEmbedDim, "embed_dim must be positive and even, got " +
                                  std::to_string(embed_dim));
    std::mt19937_64 rng(seed);
    auto fill = [&](std::vector<double>& w, size_t n, double scale) {
      w.resize(n);
      for (double& x : w) x = gaussian(rng) * scale;
    };
    fill(embed_, size_t(vocab.size) * dim_, 1.0);
    double proj = 1.0 / std::sqrt(double(dim_));
    fill(wq_, size_t(dim_) * dim_, proj);
    fill(wk_, size_t(dim_) * dim_, proj);
    fill(wv_, size_t(dim_) * dim_, proj);
  }

  std::optional<int> locality_radius() const override { return std::nullopt; }

  // Softmax attention row of one query over every view key.
  std::vector<double> attention_weights(const SequenceView& view, int query_pos) const {
    auto row = view.index_of(query_pos);
    if (!row) fail(Errc::QueryNotInView, "query position " + std::to_string(query_pos));
    Projected pr = project(view);
    return attention_row(pr, *row);
  }

 protected:
  Predictions predict_impl(const SequenceView& view, const std::vector<int>& queries,
                           const PrefixCache*) const override {
    Projected pr = project(view);
    Predictions out;
    out.entries.reserve(queries.size());
    std::vector<double> ctx(dim_);
    std::vector<double> logits(vocab().size);
    for (int q : queries) {
      int row = *view.index_of(q);
      std::vector<double> attn = attention_row(pr, row);

      std::array<double, 3> mass = {0.0, 0.0, 0.0};
      for (int j = 0; j < view.size(); ++j) {
        int pos = view.position_ids[j];
        int region = pos < view.current.begin ? 0 : (pos < view.current.end ? 1 : 2);
        mass[region] += attn[j];
      }

      std::fill(ctx.begin(), ctx.end(), 0.0);
      for (int j = 0; j < view.size(); ++j)
        for (int d = 0; d < dim_; ++d) ctx[d] += attn[j] * pr.v[size_t(j) * dim_ + d];

      for (TokenId t = 0; t < vocab().size; ++t) {
        double dot = 0.0;
        for (int d = 0; d < dim_; ++d) dot += embed_[size_t(t) * dim_ + d] * ctx[d];
        logits[t] = dot * kLogitScale;
      }
      logits[vocab().mask] = -std::numeric_limits<double>::infinity();

      double max_logit = -std::numeric_limits<double>::infinity();
      TokenId best = 0;
      for (TokenId t = 0; t < vocab().size; ++t)
        if (logits[t] > max_logit) {
          max_logit = logits[t];
          best = t;
        }
      double z = 0.0;
      for (TokenId t = 0; t < vocab().size; ++t) {
        if (logits[t] == -std::numeric_limits<double>::infinity()) continue;
        z += std::exp(logits[t] - max_logit);
      }

      PredictionEntry e;
      e.pos = q;
      e.token = best;
      e.confidence = 1.0 / z;
      e.attention = mass;
      out.entries.push_back(e);
    }
    return out;
  }

 private:
  struct Projected {
    std::vector<double> q, k, v;  // rows x dim
    int rows = 0;
  };

  static double gaussian(std::mt19937_64& rng) {
    double u1;
    do {
      u1 = double(rng() >> 11) * 0x1.0p-53;
    } while (u1 <= 0.0);
    double u2 = double(rng() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  void rope(double* x, int pos) const {
    for (int i = 0; i < dim_ / 2; ++i) {
      double theta = double(pos) * std::pow(kRopeBase, -2.0 * i / double(dim_));
      double c = std::cos(theta), s = std::sin(theta);
      double a = x[2 * i], b = x[2 * i + 1];
      x[2 * i] = a * c - b * s;
      x[2 * i + 1] = a * s + b * c;
    }
  }

  Projected project(const SequenceView& view) const {
    Projected pr;
    pr.rows = view.size();
    pr.q.resize(size_t(pr.rows) * dim_);
    pr.k.resize(size_t(pr.rows) * dim_);
    pr.v.resize(size_t(pr.rows) * dim_);
    for (int j = 0; j < pr.rows; ++j) {
      const double* e = &embed_[size_t(view.tokens[j]) * dim_];
      double* qj = &pr.q[size_t(j) * dim_];
      double* kj = &pr.k[size_t(j) * dim_];
      double* vj = &pr.v[size_t(j) * dim_];
      for (int r = 0; r < dim_; ++r) {
        double sq = 0.0, sk = 0.0, sv = 0.0;
        for (int c = 0; c < dim_; ++c) {
          sq += wq_[size_t(r) * dim_ + c] * e[c];
          sk += wk_[size_t(r) * dim_ + c] * e[c];
          sv += wv_[size_t(r) * dim_ + c] * e[c];
        }
        qj[r] = sq;
        kj[r] = sk;
        vj[r] = sv;
      }
      rope(qj, view.position_ids[j]);
      rope(kj, view.position_ids[j]);
    }
    return pr;
  }

  std::vector<double> attention_row(const Projected& pr, int row) const {
    std::vector<double> scores(pr.rows);
    double inv_sqrt_d = 1.0 / std::sqrt(double(dim_));
    double max_s = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < pr.rows; ++j) {
      double dot = 0.0;
      for (int d = 0; d < dim_; ++d)
        dot += pr.q[size_t(row) * dim_ + d] * pr.k[size_t(j) * dim_ + d];
      scores[j] = dot * inv_sqrt_d;
      max_s = std::max(max_s, scores[j]);
    }
    double z = 0.0;
    for (double& s : scores) {
      s = std::exp(s - max_s);
      z += s;
    }
    for (double& s : scores) s /= z;
    return scores;
  }

  static constexpr double kRopeBase = 10000.0;
  static constexpr double kLogitScale = 8.0;

  int dim_;
  std::vector<double> embed_, wq_, wk_, wv_;
};

}  // namespace streamdec
