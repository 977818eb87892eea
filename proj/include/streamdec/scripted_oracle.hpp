#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "streamdec/denoiser.hpp"

namespace streamdec {

// Scripted per-step predictions for the current block, keyed by block-local
// position. Step entries must cover exactly the positions still masked when
// that step runs.
struct OracleScript {
  struct Entry {
    int local_pos = 0;
    TokenId token = 0;
    double conf = 0.0;
  };
  struct Step {
    int block = 0;
    int step = 0;
    std::vector<Entry> entries;
  };
  std::vector<Step> steps;
};

inline OracleScript oracle_script_from_json(const nlohmann::json& j) {
  auto check_keys = [](const nlohmann::json& obj, std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      bool ok = false;
      for (const char* k : allowed) ok = ok || it.key() == k;
      if (!ok) fail(Errc::MalformedScript, "unknown key \"" + it.key() + "\"");
    }
  };
  if (!j.is_object()) fail(Errc::MalformedScript, "top level must be an object");
  check_keys(j, {"steps"});
  if (!j.contains("steps") || !j["steps"].is_array())
    fail(Errc::MalformedScript, "missing \"steps\" array");
  OracleScript script;
  for (const auto& js : j["steps"]) {
    check_keys(js, {"block", "step", "entries"});
    OracleScript::Step step;
    step.block = js.at("block").get<int>();
    step.step = js.at("step").get<int>();
    for (const auto& je : js.at("entries")) {
      check_keys(je, {"local_pos", "token", "conf"});
      step.entries.push_back({je.at("local_pos").get<int>(), je.at("token").get<TokenId>(),
                              je.at("conf").get<double>()});
    }
    script.steps.push_back(std::move(step));
  }
  return script;
}

inline OracleScript load_oracle_script(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::IoError, "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::MalformedScript, std::string("parse failure: ") + e.what());
  }
  return oracle_script_from_json(j);
}

// Replays a script. Which step applies is recovered from the view itself:
// the set of still-masked local positions in the current block must match a
// script step's entry set exactly, so replay stays a pure function of the
// view and repeated identical calls agree.
class ScriptedOracle final : public Denoiser {
 public:
  ScriptedOracle(OracleScript script, const Vocab& vocab) : Denoiser(vocab, 0) {
    std::map<std::pair<int, int>, bool> seen_step;
    for (OracleScript::Step& step : script.steps) {
      if (step.block < 0 || step.step < 0)
        fail(Errc::MalformedScript, "negative block or step index");
      if (step.entries.empty()) fail(Errc::MalformedScript, "step with no entries");
      if (seen_step[{step.block, step.step}])
        fail(Errc::MalformedScript, "duplicate step " + std::to_string(step.step) + " in block " +
                                        std::to_string(step.block));
      seen_step[{step.block, step.step}] = true;

      std::sort(step.entries.begin(), step.entries.end(),
                [](const auto& a, const auto& b) { return a.local_pos < b.local_pos; });
      std::vector<int> key;
      for (const OracleScript::Entry& e : step.entries) {
        if (e.local_pos < 0) fail(Errc::MalformedScript, "negative local position");
        if (!key.empty() && key.back() == e.local_pos)
          fail(Errc::MalformedScript, "duplicate local position " + std::to_string(e.local_pos));
        if (e.conf < 0.0 || e.conf > 1.0)
          fail(Errc::MalformedScript, "confidence outside [0, 1]");
        if (!this->vocab().contains(e.token) || e.token == this->vocab().mask)
          fail(Errc::MalformedScript, "token " + std::to_string(e.token) + " not emittable");
        key.push_back(e.local_pos);
      }
      auto [it, inserted] = by_block_[step.block].emplace(std::move(key), std::move(step.entries));
      if (!inserted)
        fail(Errc::MalformedScript,
             "two steps of block " + std::to_string(step.block) + " share one masked set");
    }
  }

  std::optional<int> locality_radius() const override { return 0; }

 protected:
  Predictions predict_impl(const SequenceView& view, const std::vector<int>& queries,
                           const PrefixCache*) const override {
    std::vector<int> masked_locals;
    for (int pos = view.current.begin; pos < view.current.end; ++pos) {
      auto row = view.index_of(pos);
      if (row && view.tokens[*row] == vocab().mask) masked_locals.push_back(pos - view.current.begin);
    }

    const std::vector<OracleScript::Entry>* step = nullptr;
    if (!masked_locals.empty()) {
      auto bit = by_block_.find(view.current_block);
      if (bit != by_block_.end()) {
        auto sit = bit->second.find(masked_locals);
        if (sit != bit->second.end()) step = &sit->second;
      }
      if (!step)
        fail(Errc::MalformedScript, "no step scripted for the masked set of block " +
                                        std::to_string(view.current_block));
    }

    Predictions out;
    out.entries.reserve(queries.size());
    for (int q : queries) {
      PredictionEntry e;
      e.pos = q;
      e.token = vocab().pad;
      e.confidence = 0.0;
      if (step && view.current.contains(q)) {
        int local = q - view.current.begin;
        auto it = std::lower_bound(step->begin(), step->end(), local,
                                   [](const auto& s, int l) { return s.local_pos < l; });
        if (it != step->end() && it->local_pos == local &&
            view.tokens[*view.index_of(q)] == vocab().mask) {
          e.token = it->token;
          e.confidence = it->conf;
        }
      }
      out.entries.push_back(e);
    }
    return out;
  }

 private:
  std::map<int, std::map<std::vector<int>, std::vector<OracleScript::Entry>>> by_block_;
};

}  // namespace streamdec
