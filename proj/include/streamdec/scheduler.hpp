#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "streamdec/core.hpp"
#include "streamdec/denoiser.hpp"
#include "streamdec/error.hpp"
#include "streamdec/metrics.hpp"
#include "streamdec/pruner.hpp"
#include "streamdec/trace.hpp"

namespace streamdec {

// streaming: pruned window view, prefix cache, adaptive threshold, optional
// EOS early exit. The other kinds are ablation baselines: fixed_threshold
// drops the adaptation, prefix_cache drops pruning and thresholding but keeps
// the cache, vanilla recomputes everything on a fixed step budget.
enum class SchedulerKind { Streaming, FixedThreshold, PrefixCache, Vanilla };

inline const char* scheduler_kind_name(SchedulerKind k) {
  switch (k) {
    case SchedulerKind::Streaming:
      return "streaming";
    case SchedulerKind::FixedThreshold:
      return "fixed_threshold";
    case SchedulerKind::PrefixCache:
      return "prefix_cache";
    case SchedulerKind::Vanilla:
      return "vanilla";
  }
  fail(Errc::UnknownKind, "unrecognized scheduler kind");
}

inline SchedulerKind scheduler_kind_from_name(const std::string& name) {
  if (name == "streaming") return SchedulerKind::Streaming;
  if (name == "fixed_threshold") return SchedulerKind::FixedThreshold;
  if (name == "prefix_cache") return SchedulerKind::PrefixCache;
  if (name == "vanilla") return SchedulerKind::Vanilla;
  fail(Errc::UnknownKind, "unrecognized scheduler kind '" + name + "'");
}

struct DecodeConfig {
  int gen_len = 512;
  int block_size = 32;
  int window_blocks = 4;
  double tau0 = 0.9;
  double alpha = 0.3;
  bool early_exit = true;
  bool keep_trailing = true;
  int steps_per_block = 8;  // fixed budget for the vanilla-style kinds
  SchedulerKind kind = SchedulerKind::Streaming;
  std::uint64_t seed = 0;

  void validate() const {
    if (gen_len <= 0) fail(Errc::ConfigInvalid, "gen_len must be positive");
    if (block_size <= 0) fail(Errc::ConfigInvalid, "block_size must be positive");
    if (gen_len % block_size != 0)
      fail(Errc::ConfigInvalid, "block_size must divide gen_len");
    if (window_blocks < 0) fail(Errc::ConfigInvalid, "window_blocks must be non-negative");
    if (!(tau0 > 0.0 && tau0 <= 1.0)) fail(Errc::ConfigInvalid, "tau0 must lie in (0, 1]");
    if (!(alpha >= 0.0 && alpha <= 1.0)) fail(Errc::ConfigInvalid, "alpha must lie in [0, 1]");
    if (kind == SchedulerKind::Vanilla || kind == SchedulerKind::PrefixCache) {
      if (steps_per_block <= 0 || block_size % steps_per_block != 0)
        fail(Errc::ConfigInvalid, "steps_per_block must be positive and divide block_size");
    }
  }
};

// tau = tau0 * (1 - alpha * (1 - r_mask)): starts at tau0 on a fresh block
// and relaxes toward tau0 * (1 - alpha) as the block fills in.
inline double adaptive_threshold(double tau0, double alpha, double r_mask) {
  if (!(tau0 > 0.0 && tau0 <= 1.0)) fail(Errc::ParamOutOfRange, "tau0 must lie in (0, 1]");
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail(Errc::ParamOutOfRange, "alpha must lie in [0, 1]");
  if (!(r_mask >= 0.0 && r_mask <= 1.0))
    fail(Errc::ParamOutOfRange, "r_mask must lie in [0, 1]");
  return tau0 * (1.0 - alpha * (1.0 - r_mask));
}

struct Selection {
  std::vector<AcceptedToken> accepted;
  bool fallback_used = false;
};

// Accept every candidate at or above the threshold; when nothing clears it,
// fall back to the single most confident candidate (ties break to the lowest
// position) so each step commits at least one token.
inline Selection select_positions(const std::vector<AcceptedToken>& candidates, double tau) {
  if (candidates.empty()) fail(Errc::EmptyPredictions, "no candidate positions to select from");
  Selection sel;
  for (const AcceptedToken& c : candidates)
    if (c.conf >= tau) sel.accepted.push_back(c);
  if (sel.accepted.empty()) {
    const AcceptedToken* best = &candidates.front();
    for (const AcceptedToken& c : candidates)
      if (c.conf > best->conf || (c.conf == best->conf && c.pos < best->pos)) best = &c;
    sel.accepted.push_back(*best);
    sel.fallback_used = true;
  }
  std::sort(sel.accepted.begin(), sel.accepted.end(),
            [](const AcceptedToken& a, const AcceptedToken& b) { return a.pos < b.pos; });
  return sel;
}

// An accepted EOS ends the answer only when it cleared the threshold; an EOS
// that arrived through the fallback path is just a low-confidence guess.
inline bool early_exit_triggered(const std::vector<StepRecord>& block_records,
                                 const DecodeConfig& cfg, const Vocab& vocab) {
  if (!cfg.early_exit) return false;
  for (const StepRecord& r : block_records) {
    if (r.fallback_used) continue;
    for (const AcceptedToken& a : r.accepted)
      if (a.token == vocab.eos) return true;
  }
  return false;
}

// Denoise one block to completion, appending per-step records and charging
// the ledger. Query cost is the query span plus the prefix on rebuild steps;
// key cost is the whole view.
inline std::vector<StepRecord> decode_block(SequenceState& state, const BlockPartition& part,
                                            int block, const Denoiser& den,
                                            const DecodeConfig& cfg, PrefixCache& cache,
                                            CostLedger& ledger) {
  cfg.validate();
  if (block < 0 || block >= part.num_blocks)
    fail(Errc::BlockOutOfRange, "block " + std::to_string(block));
  if (state.masked_in(part.ranges[block]) == 0)
    fail(Errc::BlockAlreadyDone, "block " + std::to_string(block) + " has no masked slots");

  const bool streaming = cfg.kind == SchedulerKind::Streaming;
  const bool use_cache = cfg.kind != SchedulerKind::Vanilla;
  const bool greedy_topk =
      cfg.kind == SchedulerKind::Vanilla || cfg.kind == SchedulerKind::PrefixCache;
  const int window = streaming ? cfg.window_blocks : part.num_blocks;
  const bool keep_trailing = streaming && cfg.keep_trailing;
  const double alpha = streaming ? cfg.alpha : 0.0;
  const int per_step = greedy_topk ? part.block_size / cfg.steps_per_block : 0;

  std::vector<StepRecord> records;
  int step = 0;
  while (state.masked_in(part.ranges[block]) > 0) {
    bool rebuilt = use_cache ? cache.update(state, part, block) : false;
    PrunedIndexSet idx = pruned_index_set(part, block, window, state.prompt_len(), keep_trailing);
    SequenceView view = build_view(state, idx, den.vocab());
    double r = masked_ratio(state, part, block);
    Predictions preds = den.predict(view, view.query_span, use_cache ? &cache : nullptr);

    StepRecord rec;
    rec.block = block;
    rec.step = step;
    rec.r_mask = r;

    std::vector<AcceptedToken> cands;
    std::array<double, 3> mass{};
    std::uint64_t mass_n = 0;
    for (const PredictionEntry& e : preds.entries) {
      if (!view.current.contains(e.pos)) continue;
      if (e.attention) {
        for (size_t i = 0; i < 3; ++i) mass[i] += (*e.attention)[i];
        ++mass_n;
      }
      if (state.is_committed(e.pos - state.prompt_len())) continue;
      cands.push_back({e.pos, e.token, e.confidence});
      rec.observed.push_back({e.pos, e.confidence});
    }
    if (mass_n > 0)
      rec.attention_by_region = {mass[0] / double(mass_n), mass[1] / double(mass_n),
                                 mass[2] / double(mass_n)};

    Selection sel;
    if (greedy_topk) {
      rec.tau = 0.0;
      std::sort(cands.begin(), cands.end(), [](const AcceptedToken& a, const AcceptedToken& b) {
        return a.conf != b.conf ? a.conf > b.conf : a.pos < b.pos;
      });
      size_t take = std::min(size_t(per_step), cands.size());
      sel.accepted.assign(cands.begin(), cands.begin() + long(take));
      std::sort(sel.accepted.begin(), sel.accepted.end(),
                [](const AcceptedToken& a, const AcceptedToken& b) { return a.pos < b.pos; });
    } else {
      rec.tau = adaptive_threshold(cfg.tau0, alpha, r);
      sel = select_positions(cands, rec.tau);
    }
    rec.accepted = sel.accepted;
    rec.fallback_used = sel.fallback_used;
    for (const AcceptedToken& a : sel.accepted)
      state.commit(a.pos - state.prompt_len(), a.token);

    std::uint64_t q_cost = std::uint64_t(view.query_span.size()) +
                           ((!use_cache || rebuilt) ? std::uint64_t(idx.prefix.size()) : 0u);
    ledger.record_forward(block, q_cost, std::uint64_t(view.size()), use_cache && !rebuilt);
    records.push_back(std::move(rec));
    ++step;
  }
  return records;
}

struct DecodeResult {
  std::vector<TokenId> tokens;
  std::vector<StepRecord> trace;
  CostLedger ledger;
  std::optional<int> exited_early_at;
};

inline DecodeResult decode_sequence(const std::vector<TokenId>& prompt, const Denoiser& den,
                                    const DecodeConfig& cfg) {
  cfg.validate();
  BlockPartition part = partition_blocks(cfg.gen_len, cfg.block_size);
  SequenceState state = init_sequence(prompt, cfg.gen_len);

  DecodeResult res;
  res.ledger = CostLedger(part.num_blocks);
  PrefixCache cache;
  for (int c = 0; c < part.num_blocks; ++c) {
    std::vector<StepRecord> records = decode_block(state, part, c, den, cfg, cache, res.ledger);
    bool exit_now =
        cfg.kind == SchedulerKind::Streaming && early_exit_triggered(records, cfg, den.vocab());
    for (StepRecord& r : records) res.trace.push_back(std::move(r));
    if (exit_now) {
      res.exited_early_at = c;
      for (int slot = (c + 1) * cfg.block_size; slot < cfg.gen_len; ++slot)
        state.commit(slot, den.vocab().eos);
      break;
    }
  }
  res.tokens = state.generated_tokens(den.vocab());
  return res;
}

inline DecodeResult run_baseline(const std::vector<TokenId>& prompt, const Denoiser& den,
                                 SchedulerKind kind, DecodeConfig cfg) {
  if (kind == SchedulerKind::Streaming)
    fail(Errc::UnknownKind, "streaming is the treatment, not a baseline");
  cfg.kind = kind;
  return decode_sequence(prompt, den, cfg);
}

}  // namespace streamdec
