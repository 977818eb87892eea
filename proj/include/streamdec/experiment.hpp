#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <initializer_list>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "streamdec/error.hpp"
#include "streamdec/local_markov.hpp"
#include "streamdec/metrics.hpp"
#include "streamdec/scheduler.hpp"
#include "streamdec/scripted_oracle.hpp"
#include "streamdec/toy_transformer.hpp"
#include "streamdec/trace_io.hpp"
#include "streamdec/version.hpp"

namespace streamdec {

struct DenoiserSpec {
  std::string kind = "toy_transformer";
  int vocab_size = 512;
  std::uint64_t seed = 7;
  int embed_dim = 16;       // toy_transformer
  int radius = 8;           // local_markov
  std::string script_path;  // scripted
};

struct PromptSpec {
  std::string kind = "synthetic";
  int length = 300;           // synthetic
  std::uint64_t seed = 11;    // synthetic
  std::vector<TokenId> tokens;  // literal
};

struct SweepSpec {
  std::vector<int> window_blocks;
  std::vector<double> alpha;
  std::vector<int> block_size;
  std::vector<int> gen_len;
};

struct ExperimentConfig {
  DecodeConfig decode;
  DenoiserSpec denoiser;
  PromptSpec prompt;
  int repetitions = 1;
  std::optional<SweepSpec> sweep;
};

namespace detail {

inline void check_keys(const Json& j, const char* where,
                       std::initializer_list<const char*> allowed) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed) known = known || item.key() == k;
    if (!known)
      fail(Errc::ConfigInvalid,
           std::string(where) + " has unknown key '" + item.key() + "'");
  }
}

template <typename T>
void read_into(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

template <typename T>
std::vector<T> values_or(const std::vector<T>& values, T base) {
  return values.empty() ? std::vector<T>{base} : values;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const Json& j) {
  try {
    detail::check_keys(j, "config", {"decode", "denoiser", "prompt", "repetitions", "sweep"});
    ExperimentConfig cfg;

    if (j.contains("decode")) {
      const Json& d = j.at("decode");
      detail::check_keys(d, "decode",
                         {"gen_len", "block_size", "window_blocks", "tau0", "alpha", "early_exit",
                          "keep_trailing", "steps_per_block", "kind", "seed"});
      detail::read_into(d, "gen_len", cfg.decode.gen_len);
      detail::read_into(d, "block_size", cfg.decode.block_size);
      detail::read_into(d, "window_blocks", cfg.decode.window_blocks);
      detail::read_into(d, "tau0", cfg.decode.tau0);
      detail::read_into(d, "alpha", cfg.decode.alpha);
      detail::read_into(d, "early_exit", cfg.decode.early_exit);
      detail::read_into(d, "keep_trailing", cfg.decode.keep_trailing);
      detail::read_into(d, "steps_per_block", cfg.decode.steps_per_block);
      if (d.contains("kind"))
        cfg.decode.kind = scheduler_kind_from_name(d.at("kind").get<std::string>());
      detail::read_into(d, "seed", cfg.decode.seed);
    }

    if (j.contains("denoiser")) {
      const Json& d = j.at("denoiser");
      std::string kind = cfg.denoiser.kind;
      detail::read_into(d, "kind", kind);
      if (kind == "toy_transformer")
        detail::check_keys(d, "denoiser", {"kind", "vocab_size", "seed", "embed_dim"});
      else if (kind == "local_markov")
        detail::check_keys(d, "denoiser", {"kind", "vocab_size", "seed", "radius"});
      else if (kind == "scripted")
        detail::check_keys(d, "denoiser", {"kind", "vocab_size", "seed", "script_path"});
      else
        fail(Errc::UnknownKind, "denoiser kind '" + kind + "'");
      cfg.denoiser.kind = kind;
      detail::read_into(d, "vocab_size", cfg.denoiser.vocab_size);
      detail::read_into(d, "seed", cfg.denoiser.seed);
      detail::read_into(d, "embed_dim", cfg.denoiser.embed_dim);
      detail::read_into(d, "radius", cfg.denoiser.radius);
      detail::read_into(d, "script_path", cfg.denoiser.script_path);
    }

    if (j.contains("prompt")) {
      const Json& p = j.at("prompt");
      std::string kind = cfg.prompt.kind;
      detail::read_into(p, "kind", kind);
      if (kind == "synthetic")
        detail::check_keys(p, "prompt", {"kind", "length", "seed"});
      else if (kind == "literal")
        detail::check_keys(p, "prompt", {"kind", "tokens"});
      else
        fail(Errc::UnknownKind, "prompt kind '" + kind + "'");
      cfg.prompt.kind = kind;
      detail::read_into(p, "length", cfg.prompt.length);
      detail::read_into(p, "seed", cfg.prompt.seed);
      detail::read_into(p, "tokens", cfg.prompt.tokens);
    }

    detail::read_into(j, "repetitions", cfg.repetitions);
    if (cfg.repetitions < 1) fail(Errc::ConfigInvalid, "repetitions must be at least 1");

    if (j.contains("sweep")) {
      const Json& s = j.at("sweep");
      detail::check_keys(s, "sweep", {"window_blocks", "alpha", "block_size", "gen_len"});
      SweepSpec sweep;
      detail::read_into(s, "window_blocks", sweep.window_blocks);
      detail::read_into(s, "alpha", sweep.alpha);
      detail::read_into(s, "block_size", sweep.block_size);
      detail::read_into(s, "gen_len", sweep.gen_len);
      cfg.sweep = std::move(sweep);
    }

    cfg.decode.validate();
    if (cfg.prompt.kind == "synthetic" && cfg.prompt.length <= 0)
      fail(Errc::ConfigInvalid, "prompt length must be positive");
    if (cfg.prompt.kind == "literal" && cfg.prompt.tokens.empty())
      fail(Errc::ConfigInvalid, "prompt tokens must not be empty");
    return cfg;
  } catch (const Json::exception& e) {
    fail(Errc::ConfigInvalid, std::string("malformed config: ") + e.what());
  }
}

inline Json experiment_to_json(const ExperimentConfig& cfg) {
  Json j;
  Json d;
  d["gen_len"] = cfg.decode.gen_len;
  d["block_size"] = cfg.decode.block_size;
  d["window_blocks"] = cfg.decode.window_blocks;
  d["tau0"] = cfg.decode.tau0;
  d["alpha"] = cfg.decode.alpha;
  d["early_exit"] = cfg.decode.early_exit;
  d["keep_trailing"] = cfg.decode.keep_trailing;
  d["steps_per_block"] = cfg.decode.steps_per_block;
  d["kind"] = scheduler_kind_name(cfg.decode.kind);
  d["seed"] = cfg.decode.seed;
  j["decode"] = std::move(d);

  Json n;
  n["kind"] = cfg.denoiser.kind;
  n["vocab_size"] = cfg.denoiser.vocab_size;
  n["seed"] = cfg.denoiser.seed;
  if (cfg.denoiser.kind == "toy_transformer") n["embed_dim"] = cfg.denoiser.embed_dim;
  if (cfg.denoiser.kind == "local_markov") n["radius"] = cfg.denoiser.radius;
  if (cfg.denoiser.kind == "scripted") n["script_path"] = cfg.denoiser.script_path;
  j["denoiser"] = std::move(n);

  Json p;
  p["kind"] = cfg.prompt.kind;
  if (cfg.prompt.kind == "synthetic") {
    p["length"] = cfg.prompt.length;
    p["seed"] = cfg.prompt.seed;
  } else {
    p["tokens"] = cfg.prompt.tokens;
  }
  j["prompt"] = std::move(p);

  j["repetitions"] = cfg.repetitions;
  if (cfg.sweep) {
    Json s;
    if (!cfg.sweep->window_blocks.empty()) s["window_blocks"] = cfg.sweep->window_blocks;
    if (!cfg.sweep->alpha.empty()) s["alpha"] = cfg.sweep->alpha;
    if (!cfg.sweep->block_size.empty()) s["block_size"] = cfg.sweep->block_size;
    if (!cfg.sweep->gen_len.empty()) s["gen_len"] = cfg.sweep->gen_len;
    j["sweep"] = std::move(s);
  }
  return j;
}

// A run config may arrive as a bare config file or as a manifest written by
// an earlier run; a manifest embeds the config under "config".
inline ExperimentConfig load_experiment_config(const std::string& path) {
  Json j = Json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded()) fail(Errc::IoError, path + " is not valid JSON");
  if (j.is_object() && j.contains("config")) return parse_experiment_config(j.at("config"));
  return parse_experiment_config(j);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Hash of the key-sorted config dump, so key order in the source file does
// not change the identity of the experiment.
inline std::string config_hash_hex(const ExperimentConfig& cfg) {
  nlohmann::json sorted = nlohmann::json::parse(experiment_to_json(cfg).dump());
  std::uint64_t h = fnv1a64(sorted.dump());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

inline std::unique_ptr<Denoiser> make_denoiser(const DenoiserSpec& spec, int repetition) {
  Vocab vocab(spec.vocab_size);
  std::uint64_t seed = spec.seed + std::uint64_t(repetition);
  if (spec.kind == "toy_transformer")
    return std::make_unique<ToyTransformer>(spec.embed_dim, vocab, seed);
  if (spec.kind == "local_markov")
    return std::make_unique<LocalMarkovOracle>(spec.radius, vocab, seed);
  if (spec.kind == "scripted")
    return std::make_unique<ScriptedOracle>(load_oracle_script(spec.script_path), vocab);
  fail(Errc::UnknownKind, "denoiser kind '" + spec.kind + "'");
}

inline std::vector<TokenId> make_prompt(const PromptSpec& spec, int repetition,
                                        const Vocab& vocab) {
  if (spec.kind == "literal") return spec.tokens;
  std::mt19937_64 rng(spec.seed + std::uint64_t(repetition));
  std::vector<TokenId> prompt(size_t(spec.length));
  for (TokenId& t : prompt)
    t = vocab.first_regular() + TokenId(rng() % std::uint64_t(vocab.regular_count()));
  return prompt;
}

struct RunArtifacts {
  std::filesystem::path dir;
  std::vector<DecodeResult> results;             // one per repetition
  std::vector<std::filesystem::path> sweep_dirs;  // one per sweep point
};

namespace detail {

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(Errc::IoError, "cannot create directory " + dir.string());
}

inline RunArtifacts run_single(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
  ensure_dir(dir);
  RunArtifacts art;
  art.dir = dir;
  Vocab vocab(cfg.denoiser.vocab_size);
  Json results = Json::array();
  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    std::unique_ptr<Denoiser> den = make_denoiser(cfg.denoiser, rep);
    std::vector<TokenId> prompt = make_prompt(cfg.prompt, rep, vocab);
    auto t0 = std::chrono::steady_clock::now();
    DecodeResult res = decode_sequence(prompt, *den, cfg.decode);
    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    ThroughputReport report = throughput_proxy(res.ledger, res.tokens, vocab);
    std::string stem = (dir / ("run_" + std::to_string(rep))).string();
    write_trace_jsonl(stem + ".trace.jsonl", res.trace);
    write_text_file(stem + ".ledger.json", ledger_to_json(res.ledger).dump(2) + "\n");
    write_text_file(stem + ".report.json", report_to_json(report).dump(2) + "\n");

    Json row;
    row["rep"] = rep;
    row["exited_early_at"] = res.exited_early_at ? Json(*res.exited_early_at) : Json(nullptr);
    row["wall_clock_seconds"] = seconds;  // informational only, never compared
    results.push_back(std::move(row));
    art.results.push_back(std::move(res));
  }
  Json manifest;
  manifest["engine_version"] = kEngineVersion;
  manifest["config_hash"] = config_hash_hex(cfg);
  manifest["config"] = experiment_to_json(cfg);
  manifest["results"] = std::move(results);
  write_text_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");
  return art;
}

}  // namespace detail

inline RunArtifacts run_experiment(const ExperimentConfig& cfg,
                                   const std::filesystem::path& dir) {
  if (!cfg.sweep) return detail::run_single(cfg, dir);

  detail::ensure_dir(dir);
  const SweepSpec& s = *cfg.sweep;
  RunArtifacts art;
  art.dir = dir;
  Json points = Json::array();
  for (int gen_len : detail::values_or(s.gen_len, cfg.decode.gen_len))
    for (int block_size : detail::values_or(s.block_size, cfg.decode.block_size))
      for (int window : detail::values_or(s.window_blocks, cfg.decode.window_blocks))
        for (double alpha : detail::values_or(s.alpha, cfg.decode.alpha)) {
          ExperimentConfig point = cfg;
          point.sweep.reset();
          point.decode.gen_len = gen_len;
          point.decode.block_size = block_size;
          point.decode.window_blocks = window;
          point.decode.alpha = alpha;
          point.decode.validate();
          std::string name = "w" + std::to_string(window) + "_a" + format_double(alpha) + "_K" +
                             std::to_string(block_size) + "_L" + std::to_string(gen_len);
          detail::run_single(point, dir / name);
          art.sweep_dirs.push_back(dir / name);
          Json row;
          row["dir"] = name;
          row["gen_len"] = gen_len;
          row["block_size"] = block_size;
          row["window_blocks"] = window;
          row["alpha"] = alpha;
          points.push_back(std::move(row));
        }
  Json manifest;
  manifest["engine_version"] = kEngineVersion;
  manifest["config_hash"] = config_hash_hex(cfg);
  manifest["config"] = experiment_to_json(cfg);
  manifest["points"] = std::move(points);
  write_text_file((dir / "sweep_manifest.json").string(), manifest.dump(2) + "\n");
  return art;
}

struct BundleData {
  Json manifest;
  std::vector<ThroughputReport> reports;
};

inline BundleData load_bundle(const std::filesystem::path& dir) {
  std::filesystem::path mpath = dir / "manifest.json";
  if (!std::filesystem::exists(mpath))
    fail(Errc::EmptyBundle, "no manifest found in " + dir.string());
  Json manifest = Json::parse(read_text_file(mpath.string()), nullptr, false);
  if (manifest.is_discarded()) fail(Errc::IoError, mpath.string() + " is not valid JSON");
  if (!manifest.contains("results") || manifest.at("results").empty())
    fail(Errc::EmptyBundle, dir.string() + " holds no runs");
  BundleData bundle;
  bundle.manifest = std::move(manifest);
  for (size_t i = 0; i < bundle.manifest.at("results").size(); ++i) {
    std::string path = (dir / ("run_" + std::to_string(i) + ".report.json")).string();
    Json rj = Json::parse(read_text_file(path), nullptr, false);
    if (rj.is_discarded()) fail(Errc::IoError, path + " is not valid JSON");
    bundle.reports.push_back(report_from_json(rj));
  }
  return bundle;
}

inline ThroughputReport aggregate_reports(const std::vector<ThroughputReport>& reports) {
  ThroughputReport agg;
  for (const ThroughputReport& r : reports) {
    agg.non_eos_tokens += r.non_eos_tokens;
    agg.query_tokens += r.query_tokens;
    agg.attention_pairs += r.attention_pairs;
    agg.forward_calls += r.forward_calls;
  }
  if (agg.forward_calls == 0 || agg.query_tokens == 0 || agg.attention_pairs == 0)
    fail(Errc::EmptyRun, "bundle recorded no forward work");
  agg.proxy_tps_q = double(agg.non_eos_tokens) / double(agg.query_tokens);
  agg.proxy_tps_a = double(agg.non_eos_tokens) / double(agg.attention_pairs);
  return agg;
}

// Speedups are meaningful only for runs over the same problem: sequence
// shape, denoiser, prompt, and decode seed must all match.
inline SpeedupReport compare_runs(const std::filesystem::path& ours_dir,
                                  const std::filesystem::path& baseline_dir) {
  BundleData ours = load_bundle(ours_dir);
  BundleData base = load_bundle(baseline_dir);
  const Json& ca = ours.manifest.at("config");
  const Json& cb = base.manifest.at("config");
  auto decode_field = [](const Json& c, const char* key) { return c.at("decode").at(key); };
  if (decode_field(ca, "gen_len") != decode_field(cb, "gen_len") ||
      decode_field(ca, "block_size") != decode_field(cb, "block_size") ||
      decode_field(ca, "seed") != decode_field(cb, "seed"))
    fail(Errc::IncomparableBundles, "decode shapes or seeds differ");
  if (ca.at("denoiser") != cb.at("denoiser"))
    fail(Errc::IncomparableBundles, "denoiser specs differ");
  if (ca.at("prompt") != cb.at("prompt"))
    fail(Errc::IncomparableBundles, "prompt specs differ");
  if (ours.reports.size() != base.reports.size())
    fail(Errc::IncomparableBundles, "repetition counts differ");
  return speedup(aggregate_reports(ours.reports), aggregate_reports(base.reports));
}

struct BlockVerdict {
  int block = 0;
  bool monotone_mean = false;
};

struct AnalysisResult {
  std::string csv;
  std::vector<BlockVerdict> verdicts;
};

inline AnalysisResult analyze_traces(const std::filesystem::path& dir,
                                     const std::string& metric) {
  if (metric != "confidence" && metric != "attention")
    fail(Errc::ConfigInvalid, "metric must be 'confidence' or 'attention', got '" + metric + "'");
  BundleData bundle = load_bundle(dir);
  std::vector<StepRecord> pooled;
  for (size_t i = 0; i < bundle.reports.size(); ++i) {
    std::vector<StepRecord> t =
        read_trace_jsonl((dir / ("run_" + std::to_string(i) + ".trace.jsonl")).string());
    pooled.insert(pooled.end(), t.begin(), t.end());
  }
  AnalysisResult out;
  if (metric == "confidence") {
    std::vector<ConfidenceSummaryRow> rows = summarize_confidence(pooled);
    out.csv = confidence_csv(rows);
    int block = -1;
    bool monotone = true;
    double prev_mean = 0.0;
    for (const ConfidenceSummaryRow& r : rows) {
      if (r.block != block) {
        if (block >= 0) out.verdicts.push_back({block, monotone});
        block = r.block;
        monotone = true;
      } else {
        monotone = monotone && r.mean >= prev_mean;
      }
      prev_mean = r.mean;
    }
    if (block >= 0) out.verdicts.push_back({block, monotone});
  } else {
    out.csv = attention_csv(summarize_attention(pooled));
  }
  return out;
}

}  // namespace streamdec
