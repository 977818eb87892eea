#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "streamdec/core.hpp"
#include "streamdec/error.hpp"
#include "streamdec/pruner.hpp"

namespace streamdec {

struct PredictionEntry {
  int pos = 0;
  TokenId token = 0;
  double confidence = 0.0;
  // Attention mass over (prefix, current, suffix) keys, when the model
  // exposes it. Sums to 1 within 1e-6.
  std::optional<std::array<double, 3>> attention;
};

struct Predictions {
  std::vector<PredictionEntry> entries;

  const PredictionEntry* find(int pos) const {
    for (const PredictionEntry& e : entries)
      if (e.pos == pos) return &e;
    return nullptr;
  }
};

// A deterministic masked denoiser. Implementations are immutable after
// construction; prediction is a pure function of (view, queries, seed).
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  Predictions predict(const SequenceView& view, const std::vector<int>& queries,
                      const PrefixCache* cache = nullptr) const {
    for (int q : queries)
      if (!view.index_of(q)) fail(Errc::QueryNotInView, "query position " + std::to_string(q));
    for (TokenId t : view.tokens)
      if (!vocab_.contains(t))
        fail(Errc::VocabMismatch, "view token " + std::to_string(t) + " outside vocab of size " +
                                      std::to_string(vocab_.size));
    return predict_impl(view, queries, cache);
  }

  const Vocab& vocab() const { return vocab_; }
  std::uint64_t seed() const { return seed_; }

  // Declared locality radius: predictions at q depend only on view content
  // within this absolute distance (plus the trailing row). Unbounded when
  // absent.
  virtual std::optional<int> locality_radius() const = 0;

 protected:
  Denoiser(const Vocab& vocab, std::uint64_t seed) : vocab_(vocab), seed_(seed) {}

  virtual Predictions predict_impl(const SequenceView& view, const std::vector<int>& queries,
                                   const PrefixCache* cache) const = 0;

 private:
  Vocab vocab_;
  std::uint64_t seed_;
};

}  // namespace streamdec
