#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "streamdec/core.hpp"
#include "streamdec/error.hpp"

namespace streamdec {

// Index set for the attenuation-pruned attention view of one decoding step:
// the full prefix, the current block, a window of blocks after it, and
// (optionally) the final generation position standing in for the far suffix.
struct PrunedIndexSet {
  int current_block = 0;
  int prompt_len = 0;
  int total_len = 0;
  Interval prefix;
  Interval current;
  std::vector<Interval> window;
  std::optional<int> trailing;

  std::vector<int> positions() const {
    std::vector<int> out;
    out.reserve(size_t(current.end) + window.size() * size_t(current.size()) + 1);
    for (int p = prefix.begin; p < prefix.end; ++p) out.push_back(p);
    for (int p = current.begin; p < current.end; ++p) out.push_back(p);
    for (const Interval& win : window)
      for (int p = win.begin; p < win.end; ++p) out.push_back(p);
    if (trailing) out.push_back(*trailing);
    return out;
  }
};

inline PrunedIndexSet pruned_index_set(const BlockPartition& part, int current_block,
                                       int window_blocks, int prompt_len, bool keep_trailing) {
  if (current_block < 0 || current_block >= part.num_blocks)
    fail(Errc::BlockOutOfRange, "block " + std::to_string(current_block));
  if (window_blocks < 0) fail(Errc::ParamOutOfRange, "window_blocks must be non-negative");
  if (prompt_len < 0) fail(Errc::ParamOutOfRange, "prompt_len must be non-negative");

  PrunedIndexSet idx;
  idx.current_block = current_block;
  idx.prompt_len = prompt_len;
  idx.total_len = prompt_len + part.gen_len;
  idx.current = part.abs_range(current_block, prompt_len);
  idx.prefix = {0, idx.current.begin};
  int last = std::min(current_block + window_blocks, part.num_blocks - 1);
  for (int b = current_block + 1; b <= last; ++b)
    idx.window.push_back(part.abs_range(b, prompt_len));
  if (keep_trailing && last < part.num_blocks - 1) idx.trailing = idx.total_len - 1;
  return idx;
}

// Token view fed to a denoiser. Position ids are the original absolute
// positions, never renumbered, so pruning gaps stay visible to rotary
// position handling.
struct SequenceView {
  std::vector<TokenId> tokens;
  std::vector<int> position_ids;
  std::vector<int> query_span;
  int current_block = 0;
  Interval current;

  int size() const { return int(tokens.size()); }

  // View row holding an absolute position, if present.
  std::optional<int> index_of(int pos) const {
    auto it = std::lower_bound(position_ids.begin(), position_ids.end(), pos);
    if (it == position_ids.end() || *it != pos) return std::nullopt;
    return int(it - position_ids.begin());
  }
};

inline SequenceView build_view(const SequenceState& state, const PrunedIndexSet& idx,
                               const Vocab& vocab) {
  if (idx.prompt_len != state.prompt_len() || idx.total_len != state.total_len())
    fail(Errc::InconsistentIndexSet, "index set was built for a different sequence shape");
  if (idx.current.end > idx.total_len || (idx.trailing && *idx.trailing >= idx.total_len))
    fail(Errc::InconsistentIndexSet, "index set exceeds sequence bounds");

  SequenceView view;
  view.current_block = idx.current_block;
  view.current = idx.current;

  auto push = [&](int pos) {
    view.tokens.push_back(state.token_at(pos, vocab));
    view.position_ids.push_back(pos);
  };
  auto is_masked = [&](int pos) { return !state.is_committed(pos - state.prompt_len()); };

  for (int p = idx.prefix.begin; p < idx.prefix.end; ++p) push(p);
  for (int p = idx.current.begin; p < idx.current.end; ++p) {
    push(p);
    view.query_span.push_back(p);
  }
  for (const Interval& win : idx.window)
    for (int p = win.begin; p < win.end; ++p) {
      push(p);
      if (is_masked(p)) view.query_span.push_back(p);
    }
  if (idx.trailing) {
    push(*idx.trailing);
    if (is_masked(*idx.trailing)) view.query_span.push_back(*idx.trailing);
  }
  return view;
}

// Tracks reuse of the committed-prefix representation. The prefix is rebuilt
// on the first step of each block and reused for the rest of that block.
class PrefixCache {
 public:
  int cached_upto() const { return cached_upto_; }
  int valid_for_block() const { return valid_for_block_; }
  std::uint64_t hits() const { return hits_; }
  std::uint64_t misses() const { return misses_; }

  // Returns true when the prefix representation had to be rebuilt.
  bool update(const SequenceState& state, const BlockPartition& part, int block) {
    if (block < 0 || block >= part.num_blocks)
      fail(Errc::BlockOutOfRange, "block " + std::to_string(block));
    if (block < valid_for_block_)
      fail(Errc::BlockRegression, "cache already advanced past block " + std::to_string(block));
    if (block == valid_for_block_) {
      ++hits_;
      return false;
    }
    ++misses_;
    valid_for_block_ = block;
    cached_upto_ = state.prompt_len() + block * part.block_size;
    return true;
  }

 private:
  int cached_upto_ = 0;
  int valid_for_block_ = -1;
  std::uint64_t hits_ = 0;
  std::uint64_t misses_ = 0;
};

}  // namespace streamdec
