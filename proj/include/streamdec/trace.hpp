#pragma once

#include <array>
#include <optional>
#include <vector>

#include "streamdec/core.hpp"

namespace streamdec {

struct AcceptedToken {
  int pos = 0;
  TokenId token = 0;
  double conf = 0.0;
};

struct ObservedConfidence {
  int pos = 0;
  double conf = 0.0;
};

// One denoising step of one block. `observed` holds the confidence of every
// still-masked current-block query at this step, accepted or not; `accepted`
// holds the subset that was committed.
struct StepRecord {
  int block = 0;
  int step = 0;
  double tau = 0.0;
  double r_mask = 0.0;
  std::vector<AcceptedToken> accepted;
  bool fallback_used = false;
  std::vector<ObservedConfidence> observed;
  std::optional<std::array<double, 3>> attention_by_region;
};

}  // namespace streamdec
