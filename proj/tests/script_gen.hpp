#pragma once

#include <algorithm>
#include <random>
#include <vector>

#include "streamdec/core.hpp"
#include "streamdec/scripted_oracle.hpp"

// Test-side script builder. It simulates the threshold/fallback dynamics
// independently of the engine, so the scripts it emits are consistent with
// the masked sets the engine will present, and the predicted acceptance
// sets double as an oracle for the engine's trace.
namespace testgen {

struct GeneratedScript {
  streamdec::OracleScript script;
  // Per block, per step: accepted local positions (sorted) and fallback flag.
  std::vector<std::vector<std::vector<int>>> accepted;
  std::vector<std::vector<bool>> fallback;
};

struct ScriptParams {
  int num_blocks = 1;
  int block_size = 4;
  double tau0 = 0.9;
  double alpha = 0.0;
  double high_prob = 0.4;  // chance a position clears the threshold
  bool all_zero = false;   // adversarial flat-zero confidences
  int eos_block = -1;      // when >= 0, plant a confident EOS in this block
};

inline GeneratedScript generate_script(std::mt19937_64& rng, const ScriptParams& p,
                                       const streamdec::Vocab& vocab) {
  GeneratedScript out;
  out.accepted.resize(p.num_blocks);
  out.fallback.resize(p.num_blocks);
  auto uniform = [&](double lo, double hi) {
    return lo + (hi - lo) * (double(rng() % 100000) / 99999.0);
  };
  for (int b = 0; b < p.num_blocks; ++b) {
    std::vector<int> masked(p.block_size);
    for (int i = 0; i < p.block_size; ++i) masked[i] = i;
    int eos_local = p.eos_block == b ? int(rng() % p.block_size) : -1;
    int step = 0;
    while (!masked.empty()) {
      double r = double(masked.size()) / double(p.block_size);
      double tau = p.tau0 * (1.0 - p.alpha * (1.0 - r));
      streamdec::OracleScript::Step st;
      st.block = b;
      st.step = step;
      std::vector<int> accept;
      double best_conf = -1.0;
      int best_local = -1;
      for (int local : masked) {
        double conf;
        if (p.all_zero) {
          conf = 0.0;
        } else if (local == eos_local) {
          conf = uniform(tau, 1.0);
        } else if (uniform(0.0, 1.0) < p.high_prob) {
          conf = uniform(tau, 1.0);
        } else {
          conf = uniform(0.0, tau * 0.999);
        }
        streamdec::TokenId tok =
            local == eos_local
                ? vocab.eos
                : vocab.first_regular() + streamdec::TokenId(rng() % vocab.regular_count());
        st.entries.push_back({local, tok, conf});
        if (conf >= tau) accept.push_back(local);
        if (conf > best_conf) {
          best_conf = conf;
          best_local = local;
        }
      }
      bool fb = accept.empty();
      if (fb) accept.push_back(best_local);
      out.script.steps.push_back(st);
      out.accepted[b].push_back(accept);
      out.fallback[b].push_back(fb);
      std::vector<int> next;
      for (int local : masked)
        if (std::find(accept.begin(), accept.end(), local) == accept.end()) next.push_back(local);
      masked = std::move(next);
      ++step;
    }
  }
  return out;
}

}  // namespace testgen
