#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "streamdec/denoiser.hpp"

namespace streamdec {

// Deterministic neighborhood predictor with a declared locality radius.
// Confidence is a strictly increasing function of the committed fraction
// among view rows within the radius; the token choice also hashes the
// committed neighbor contents and the trailing row, which is visible from
// any distance.
class LocalMarkovOracle final : public Denoiser {
 public:
  static constexpr double kConfidenceFloor = 0.2;
  static constexpr double kConfidenceCeiling = 0.99;

  LocalMarkovOracle(int radius, const Vocab& vocab, std::uint64_t seed)
      : Denoiser(vocab, seed), radius_(radius) {
    if (radius < 0) fail(Errc::ParamOutOfRange, "radius must be non-negative");
    for (TokenId t = 0; t < vocab.size; ++t)
      if (!vocab.is_reserved(t)) regular_ids_.push_back(t);
  }

  std::optional<int> locality_radius() const override { return radius_; }

 protected:
  Predictions predict_impl(const SequenceView& view, const std::vector<int>& queries,
                           const PrefixCache*) const override {
    const int last_pos = view.position_ids.back();
    const bool last_masked = view.tokens.back() == vocab().mask;

    Predictions out;
    out.entries.reserve(queries.size());
    for (int q : queries) {
      std::uint64_t h = kFnvOffset;
      h = mix(h, seed());
      h = mix(h, std::uint64_t(q));
      h = mix(h, std::uint64_t(last_pos));
      h = mix(h, last_masked ? 1 : 0);

      int committed = 0;
      int total = 0;
      // View rows are position-sorted; walk the radius band around q.
      auto lo = std::lower_bound(view.position_ids.begin(), view.position_ids.end(), q - radius_);
      for (auto it = lo; it != view.position_ids.end() && *it <= q + radius_; ++it) {
        if (*it == q) continue;
        ++total;
        TokenId t = view.tokens[it - view.position_ids.begin()];
        if (t != vocab().mask) {
          ++committed;
          h = mix(h, std::uint64_t(*it));
          h = mix(h, std::uint64_t(std::uint32_t(t)));
        }
      }
      h = mix(h, std::uint64_t(total - committed));

      double frac = total > 0 ? double(committed) / double(total) : 0.0;
      double conf = kConfidenceFloor;
      if (frac >= 1.0) {
        conf = kConfidenceCeiling;
      } else if (frac > 0.0) {
        conf = kConfidenceFloor + (kConfidenceCeiling - kConfidenceFloor) * frac;
      }

      PredictionEntry e;
      e.pos = q;
      e.token = regular_ids_[h % regular_ids_.size()];
      e.confidence = conf;
      out.entries.push_back(e);
    }
    return out;
  }

 private:
  static constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
  static constexpr std::uint64_t kFnvPrime = 1099511628211ull;

  static std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= kFnvPrime;
    }
    return h;
  }

  int radius_;
  std::vector<TokenId> regular_ids_;
};

}  // namespace streamdec
