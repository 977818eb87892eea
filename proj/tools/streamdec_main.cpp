#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include "streamdec/experiment.hpp"
#include "streamdec/version.hpp"

namespace {

namespace fs = std::filesystem;
using streamdec::Errc;

// 2: the request itself is bad. 3: the filesystem let us down.
// 4: the two bundles cannot be compared. 1: anything unexpected.
int exit_code_for(Errc code) {
  switch (code) {
    case Errc::ConfigInvalid:
    case Errc::MalformedScript:
    case Errc::ParamOutOfRange:
    case Errc::UnknownKind:
    case Errc::NoAttentionData:
      return 2;
    case Errc::IoError:
    case Errc::EmptyBundle:
      return 3;
    case Errc::IncomparableBundles:
      return 4;
    default:
      return 1;
  }
}

fs::path resolve_out_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("STREAMDEC_OUT"); env != nullptr && *env != '\0')
    return env;
  streamdec::fail(Errc::ConfigInvalid, "no output directory: pass --out or set STREAMDEC_OUT");
}

int run_command(const std::string& config_path, const std::string& out_flag,
                const std::optional<std::uint64_t>& seed, const std::string& baseline) {
  streamdec::ExperimentConfig cfg = streamdec::load_experiment_config(config_path);
  if (seed) cfg.decode.seed = *seed;
  if (!baseline.empty()) {
    streamdec::SchedulerKind kind = streamdec::scheduler_kind_from_name(baseline);
    if (kind == streamdec::SchedulerKind::Streaming)
      streamdec::fail(Errc::UnknownKind, "streaming is the treatment, not a baseline");
    cfg.decode.kind = kind;
  }
  fs::path out = resolve_out_dir(out_flag);
  streamdec::RunArtifacts art = streamdec::run_experiment(cfg, out);
  if (!art.sweep_dirs.empty()) {
    std::cout << "swept " << art.sweep_dirs.size() << " points under " << out.string() << "\n";
    for (const fs::path& dir : art.sweep_dirs) std::cout << "  " << dir.string() << "\n";
    return 0;
  }
  streamdec::Vocab vocab(cfg.denoiser.vocab_size);
  for (size_t rep = 0; rep < art.results.size(); ++rep) {
    const streamdec::DecodeResult& res = art.results[rep];
    streamdec::ThroughputReport report =
        streamdec::throughput_proxy(res.ledger, res.tokens, vocab);
    std::cout << "rep " << rep << ": forward_calls=" << report.forward_calls
              << " query_tokens=" << report.query_tokens
              << " proxy_tps_q=" << streamdec::format_double(report.proxy_tps_q);
    if (res.exited_early_at) std::cout << " exited_early_at=" << *res.exited_early_at;
    std::cout << "\n";
  }
  std::cout << "bundle: " << out.string() << "\n";
  return 0;
}

int compare_command(const std::string& ours, const std::string& baseline,
                    const std::string& out_file) {
  streamdec::SpeedupReport s = streamdec::compare_runs(ours, baseline);
  std::string body = streamdec::speedup_to_json(s).dump(2) + "\n";
  if (out_file.empty())
    std::cout << body;
  else
    streamdec::write_text_file(out_file, body);
  return 0;
}

int analyze_command(const std::string& dir, const std::string& metric,
                    const std::string& out_file) {
  streamdec::AnalysisResult res = streamdec::analyze_traces(dir, metric);
  if (out_file.empty())
    std::cout << res.csv;
  else
    streamdec::write_text_file(out_file, res.csv);
  for (const streamdec::BlockVerdict& v : res.verdicts)
    std::cerr << "block " << v.block << ": mean confidence "
              << (v.monotone_mean ? "monotone non-decreasing" : "not monotone") << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Block-wise diffusion decoding engine"};
  app.set_version_flag("--version", streamdec::kEngineVersion);
  app.require_subcommand(1);

  std::string config_path;
  std::string out_value;
  std::string baseline;
  std::optional<std::uint64_t> seed;
  CLI::App* run = app.add_subcommand("run", "Decode per a config file and write a run bundle");
  run->add_option("--config", config_path, "Config JSON (or a manifest from an earlier run)")
      ->required();
  run->add_option("--out", out_value, "Output directory (default: $STREAMDEC_OUT)");
  run->add_option("--seed", seed, "Override the decode seed");
  run->add_option("--baseline", baseline,
                  "Run this baseline kind instead of the configured scheduler");

  std::string ours_dir;
  std::string base_dir;
  std::string compare_out;
  CLI::App* compare = app.add_subcommand("compare", "Speedups of one bundle over another");
  compare->add_option("ours", ours_dir, "Bundle to evaluate")->required();
  compare->add_option("baseline", base_dir, "Baseline bundle")->required();
  compare->add_option("--out", compare_out, "Write the comparison JSON here (default: stdout)");

  std::string analyze_dir;
  std::string metric = "confidence";
  std::string analyze_out;
  CLI::App* analyze = app.add_subcommand("analyze", "Summarize a bundle's traces as CSV");
  analyze->add_option("bundle", analyze_dir, "Run bundle directory")->required();
  analyze->add_option("--metric", metric, "confidence or attention");
  analyze->add_option("--out", analyze_out, "Write the CSV here (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) return run_command(config_path, out_value, seed, baseline);
    if (compare->parsed()) return compare_command(ours_dir, base_dir, compare_out);
    return analyze_command(analyze_dir, metric, analyze_out);
  } catch (const streamdec::Error& e) {
    std::cerr << streamdec::errc_name(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
