#pragma once

#include <charconv>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "streamdec/error.hpp"
#include "streamdec/metrics.hpp"
#include "streamdec/trace.hpp"

namespace streamdec {

using Json = nlohmann::ordered_json;

// Shortest decimal form that round-trips the exact double.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline const Json& require_field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key))
    fail(Errc::IoError, std::string("record is missing field '") + key + "'");
  return j.at(key);
}

inline Json step_record_to_json(const StepRecord& r) {
  Json j;
  j["block"] = r.block;
  j["step"] = r.step;
  j["tau"] = r.tau;
  j["r_mask"] = r.r_mask;
  Json accepted = Json::array();
  for (const AcceptedToken& a : r.accepted) {
    Json e;
    e["pos"] = a.pos;
    e["token"] = a.token;
    e["conf"] = a.conf;
    accepted.push_back(std::move(e));
  }
  j["accepted"] = std::move(accepted);
  j["fallback"] = r.fallback_used;
  if (r.attention_by_region) {
    const auto& m = *r.attention_by_region;
    j["attn"] = Json::array({m[0], m[1], m[2]});
  }
  Json observed = Json::array();
  for (const ObservedConfidence& o : r.observed) {
    Json e;
    e["pos"] = o.pos;
    e["conf"] = o.conf;
    observed.push_back(std::move(e));
  }
  j["observed"] = std::move(observed);
  return j;
}

inline StepRecord step_record_from_json(const Json& j) {
  try {
    StepRecord r;
    r.block = require_field(j, "block").get<int>();
    r.step = require_field(j, "step").get<int>();
    r.tau = require_field(j, "tau").get<double>();
    r.r_mask = require_field(j, "r_mask").get<double>();
    for (const Json& e : require_field(j, "accepted")) {
      AcceptedToken a;
      a.pos = require_field(e, "pos").get<int>();
      a.token = require_field(e, "token").get<TokenId>();
      a.conf = require_field(e, "conf").get<double>();
      r.accepted.push_back(a);
    }
    r.fallback_used = require_field(j, "fallback").get<bool>();
    if (j.contains("attn")) {
      const Json& m = j.at("attn");
      if (!m.is_array() || m.size() != 3)
        fail(Errc::IoError, "attn must hold three region masses");
      r.attention_by_region = {{m[0].get<double>(), m[1].get<double>(), m[2].get<double>()}};
    }
    for (const Json& e : require_field(j, "observed")) {
      ObservedConfidence o;
      o.pos = require_field(e, "pos").get<int>();
      o.conf = require_field(e, "conf").get<double>();
      r.observed.push_back(o);
    }
    return r;
  } catch (const Json::exception& e) {
    fail(Errc::IoError, std::string("malformed step record: ") + e.what());
  }
}

inline void write_trace_jsonl(const std::string& path, const std::vector<StepRecord>& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::IoError, "cannot open " + path + " for writing");
  for (const StepRecord& r : trace) out << step_record_to_json(r).dump() << '\n';
  if (!out) fail(Errc::IoError, "failed while writing " + path);
}

inline std::vector<StepRecord> read_trace_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open " + path);
  std::vector<StepRecord> trace;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded())
      fail(Errc::IoError, path + ": line " + std::to_string(line_no) + " is not valid JSON");
    trace.push_back(step_record_from_json(j));
  }
  return trace;
}

inline Json counters_to_json(const ForwardCounters& c) {
  Json j;
  j["forward_calls"] = c.forward_calls;
  j["query_tokens"] = c.query_tokens;
  j["key_tokens"] = c.key_tokens;
  j["attention_pairs"] = c.attention_pairs;
  j["cache_hits"] = c.cache_hits;
  j["cache_misses"] = c.cache_misses;
  return j;
}

inline Json ledger_to_json(const CostLedger& ledger) {
  Json j;
  j["totals"] = counters_to_json(ledger.totals());
  Json blocks = Json::array();
  for (const ForwardCounters& c : ledger.per_block()) blocks.push_back(counters_to_json(c));
  j["per_block"] = std::move(blocks);
  return j;
}

// Timing is deliberately absent here: report files must be byte-identical
// across reruns, so wall-clock numbers live in the manifest instead.
inline Json report_to_json(const ThroughputReport& r) {
  Json j;
  j["non_eos_tokens"] = r.non_eos_tokens;
  j["query_tokens"] = r.query_tokens;
  j["attention_pairs"] = r.attention_pairs;
  j["forward_calls"] = r.forward_calls;
  j["proxy_tps_q"] = r.proxy_tps_q;
  j["proxy_tps_a"] = r.proxy_tps_a;
  return j;
}

inline ThroughputReport report_from_json(const Json& j) {
  try {
    ThroughputReport r;
    r.non_eos_tokens = require_field(j, "non_eos_tokens").get<std::uint64_t>();
    r.query_tokens = require_field(j, "query_tokens").get<std::uint64_t>();
    r.attention_pairs = require_field(j, "attention_pairs").get<std::uint64_t>();
    r.forward_calls = require_field(j, "forward_calls").get<std::uint64_t>();
    r.proxy_tps_q = require_field(j, "proxy_tps_q").get<double>();
    r.proxy_tps_a = require_field(j, "proxy_tps_a").get<double>();
    return r;
  } catch (const Json::exception& e) {
    fail(Errc::IoError, std::string("malformed throughput report: ") + e.what());
  }
}

inline Json speedup_to_json(const SpeedupReport& s) {
  Json j;
  j["query_token_speedup"] = s.query_token_speedup;
  j["attention_pair_speedup"] = s.attention_pair_speedup;
  j["per_step_query_reduction"] = s.per_step_query_reduction;
  return j;
}

inline std::string confidence_csv(const std::vector<ConfidenceSummaryRow>& rows) {
  std::string out = "block,step,mean,q25,q75,n_masked_remaining\n";
  for (const ConfidenceSummaryRow& r : rows) {
    out += std::to_string(r.block) + ',' + std::to_string(r.step) + ',';
    out += format_double(r.mean) + ',' + format_double(r.q25) + ',' + format_double(r.q75);
    out += ',' + std::to_string(r.n_masked_remaining) + '\n';
  }
  return out;
}

inline std::string attention_csv(const std::vector<AttentionSummaryRow>& rows) {
  std::string out = "block,step,prefix_mass,current_mass,suffix_mass\n";
  for (const AttentionSummaryRow& r : rows) {
    out += std::to_string(r.block) + ',' + std::to_string(r.step) + ',';
    out += format_double(r.prefix_mass) + ',' + format_double(r.current_mass) + ',' +
           format_double(r.suffix_mass) + '\n';
  }
  return out;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::IoError, "cannot open " + path + " for writing");
  out << content;
  if (!out) fail(Errc::IoError, "failed while writing " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open " + path);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) fail(Errc::IoError, "failed while reading " + path);
  return content;
}

}  // namespace streamdec
