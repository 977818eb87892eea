#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "streamdec/core.hpp"
#include "streamdec/error.hpp"
#include "streamdec/trace.hpp"

namespace streamdec {

struct ForwardCounters {
  std::uint64_t forward_calls = 0;
  std::uint64_t query_tokens = 0;
  std::uint64_t key_tokens = 0;
  std::uint64_t attention_pairs = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t cache_misses = 0;
};

// Exact denoiser-call accounting: every forward records its query and key
// token counts, and attention pairs are their product.
class CostLedger {
 public:
  CostLedger() = default;
  explicit CostLedger(int num_blocks) : per_block_(size_t(num_blocks)) {}

  void record_forward(int block, std::uint64_t query_tokens, std::uint64_t key_tokens,
                      bool cache_hit) {
    if (block < 0 || size_t(block) >= per_block_.size())
      fail(Errc::BlockOutOfRange, "block " + std::to_string(block));
    if (query_tokens < 1) fail(Errc::InvalidCounts, "a forward call has at least one query");
    if (key_tokens < query_tokens) fail(Errc::InvalidCounts, "key count below query count");
    add(totals_, query_tokens, key_tokens, cache_hit);
    add(per_block_[size_t(block)], query_tokens, key_tokens, cache_hit);
  }

  const ForwardCounters& totals() const { return totals_; }
  const std::vector<ForwardCounters>& per_block() const { return per_block_; }

 private:
  static void add(ForwardCounters& c, std::uint64_t q, std::uint64_t k, bool hit) {
    c.forward_calls += 1;
    c.query_tokens += q;
    c.key_tokens += k;
    c.attention_pairs += q * k;
    if (hit)
      c.cache_hits += 1;
    else
      c.cache_misses += 1;
  }

  ForwardCounters totals_;
  std::vector<ForwardCounters> per_block_;
};

// Cost-model throughput: committed non-EOS tokens per unit of denoiser work.
// Wall clock is reported when measured, never asserted on.
struct ThroughputReport {
  std::uint64_t non_eos_tokens = 0;
  std::uint64_t query_tokens = 0;
  std::uint64_t attention_pairs = 0;
  std::uint64_t forward_calls = 0;
  double proxy_tps_q = 0.0;
  double proxy_tps_a = 0.0;
  std::optional<double> wall_clock_seconds;
};

inline ThroughputReport throughput_proxy(const CostLedger& ledger,
                                         const std::vector<TokenId>& tokens, const Vocab& vocab) {
  if (ledger.totals().forward_calls == 0) fail(Errc::EmptyRun, "no forward calls recorded");
  ThroughputReport rep;
  for (TokenId t : tokens)
    if (t != vocab.eos) ++rep.non_eos_tokens;
  rep.query_tokens = ledger.totals().query_tokens;
  rep.attention_pairs = ledger.totals().attention_pairs;
  rep.forward_calls = ledger.totals().forward_calls;
  rep.proxy_tps_q = double(rep.non_eos_tokens) / double(rep.query_tokens);
  rep.proxy_tps_a = double(rep.non_eos_tokens) / double(rep.attention_pairs);
  return rep;
}

struct SpeedupReport {
  double query_token_speedup = 0.0;
  double attention_pair_speedup = 0.0;
  double per_step_query_reduction = 0.0;
};

inline SpeedupReport speedup(const ThroughputReport& ours, const ThroughputReport& baseline) {
  if (baseline.proxy_tps_q <= 0.0 || baseline.proxy_tps_a <= 0.0)
    fail(Errc::DivideByZero, "baseline proxies must be positive");
  if (ours.forward_calls == 0 || baseline.forward_calls == 0 || ours.query_tokens == 0)
    fail(Errc::DivideByZero, "reports must describe non-empty runs");
  SpeedupReport s;
  s.query_token_speedup = ours.proxy_tps_q / baseline.proxy_tps_q;
  s.attention_pair_speedup = ours.proxy_tps_a / baseline.proxy_tps_a;
  double ours_per_step = double(ours.query_tokens) / double(ours.forward_calls);
  double base_per_step = double(baseline.query_tokens) / double(baseline.forward_calls);
  s.per_step_query_reduction = base_per_step / ours_per_step;
  return s;
}

// Percentile with linear interpolation: for sorted x[0..n-1] and fraction q,
// h = (n-1) q and the value is x[floor(h)] + (h - floor(h)) (x[floor(h)+1] -
// x[floor(h)]).
inline double percentile_linear(std::vector<double> xs, double q) {
  if (xs.empty()) fail(Errc::EmptyTrace, "percentile of nothing");
  std::sort(xs.begin(), xs.end());
  double h = (double(xs.size()) - 1.0) * q;
  size_t lo = size_t(h);
  if (lo + 1 >= xs.size()) return xs.back();
  return xs[lo] + (h - double(lo)) * (xs[lo + 1] - xs[lo]);
}

struct ConfidenceSummaryRow {
  int block = 0;
  int step = 0;
  double mean = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  std::uint64_t n_masked_remaining = 0;
};

// Per (block, step) distribution of observed confidences, accepted and
// rejected alike, pooled over every record in the trace (across runs).
// n_masked_remaining is the pooled sample count.
inline std::vector<ConfidenceSummaryRow> summarize_confidence(
    const std::vector<StepRecord>& trace) {
  if (trace.empty()) fail(Errc::EmptyTrace, "no step records");
  std::map<std::pair<int, int>, std::vector<double>> groups;
  for (const StepRecord& r : trace)
    for (const ObservedConfidence& o : r.observed)
      groups[{r.block, r.step}].push_back(o.conf);
  std::vector<ConfidenceSummaryRow> rows;
  for (auto& [key, confs] : groups) {
    if (confs.empty()) continue;
    ConfidenceSummaryRow row;
    row.block = key.first;
    row.step = key.second;
    double sum = 0.0;
    for (double c : confs) sum += c;
    row.mean = sum / double(confs.size());
    row.q25 = percentile_linear(confs, 0.25);
    row.q75 = percentile_linear(confs, 0.75);
    row.n_masked_remaining = confs.size();
    rows.push_back(row);
  }
  return rows;
}

struct AttentionSummaryRow {
  int block = 0;
  int step = 0;
  double prefix_mass = 0.0;
  double current_mass = 0.0;
  double suffix_mass = 0.0;
};

inline std::vector<AttentionSummaryRow> summarize_attention(const std::vector<StepRecord>& trace) {
  if (trace.empty()) fail(Errc::EmptyTrace, "no step records");
  std::map<std::pair<int, int>, std::pair<std::array<double, 3>, std::uint64_t>> groups;
  for (const StepRecord& r : trace) {
    if (!r.attention_by_region) continue;
    auto& [sum, n] = groups[{r.block, r.step}];
    for (int i = 0; i < 3; ++i) sum[i] += (*r.attention_by_region)[i];
    ++n;
  }
  if (groups.empty())
    fail(Errc::NoAttentionData, "no record carries attention masses (scripted runs have none)");
  std::vector<AttentionSummaryRow> rows;
  for (auto& [key, acc] : groups) {
    AttentionSummaryRow row;
    row.block = key.first;
    row.step = key.second;
    row.prefix_mass = acc.first[0] / double(acc.second);
    row.current_mass = acc.first[1] / double(acc.second);
    row.suffix_mass = acc.first[2] / double(acc.second);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace streamdec
