#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "streamdec/error.hpp"

namespace streamdec {

using TokenId = std::int32_t;

// Vocabulary layout: three reserved control ids plus regular tokens.
struct Vocab {
  std::int32_t size = 0;
  TokenId mask = 0;
  TokenId eos = 1;
  TokenId pad = 2;

  explicit Vocab(std::int32_t size_, TokenId mask_ = 0, TokenId eos_ = 1, TokenId pad_ = 2)
      : size(size_), mask(mask_), eos(eos_), pad(pad_) {
    if (mask == eos || mask == pad || eos == pad)
      fail(Errc::InvalidVocab, "reserved ids must be distinct");
    if (mask < 0 || eos < 0 || pad < 0 || mask >= size || eos >= size || pad >= size)
      fail(Errc::InvalidVocab, "reserved ids must lie in [0, size)");
    if (size < 4) fail(Errc::InvalidVocab, "need at least one regular token beyond the reserved ids");
  }

  bool is_reserved(TokenId t) const { return t == mask || t == eos || t == pad; }

  // Smallest non-reserved id.
  TokenId first_regular() const {
    TokenId t = 0;
    while (is_reserved(t)) ++t;
    return t;
  }

  std::int32_t regular_count() const { return size - 3; }

  bool contains(TokenId t) const { return t >= 0 && t < size; }
};

struct Interval {
  int begin = 0;
  int end = 0;

  int size() const { return end - begin; }
  bool contains(int p) const { return p >= begin && p < end; }
  bool operator==(const Interval&) const = default;
};

// Non-overlapping K-sized block ranges tiling the L-token generation buffer.
struct BlockPartition {
  int gen_len = 0;
  int block_size = 0;
  int num_blocks = 0;
  std::vector<Interval> ranges;

  // Block range shifted into absolute positions (prompt occupies [0, p_L)).
  Interval abs_range(int block, int prompt_len) const {
    return {prompt_len + ranges[block].begin, prompt_len + ranges[block].end};
  }
};

inline BlockPartition partition_blocks(int gen_len, int block_size) {
  if (gen_len <= 0 || block_size <= 0)
    fail(Errc::ZeroLength, "gen_len and block_size must be positive");
  if (gen_len % block_size != 0)
    fail(Errc::NonDivisible,
         "gen_len " + std::to_string(gen_len) + " is not a multiple of block_size " +
             std::to_string(block_size));
  BlockPartition p;
  p.gen_len = gen_len;
  p.block_size = block_size;
  p.num_blocks = gen_len / block_size;
  p.ranges.reserve(p.num_blocks);
  for (int n = 0; n < p.num_blocks; ++n)
    p.ranges.push_back({n * block_size, (n + 1) * block_size});
  return p;
}

// Prompt plus an L-slot generation buffer. Slots start masked and may be
// committed exactly once; the absolute position of slot i is prompt_len + i.
class SequenceState {
 public:
  SequenceState(std::vector<TokenId> prompt, int gen_len)
      : prompt_(std::move(prompt)), slots_(gen_len) {
    if (prompt_.empty()) fail(Errc::EmptyPrompt, "prompt must contain at least one token");
    if (gen_len <= 0) fail(Errc::ZeroLength, "gen_len must be positive");
  }

  int prompt_len() const { return int(prompt_.size()); }
  int gen_len() const { return int(slots_.size()); }
  int total_len() const { return prompt_len() + gen_len(); }
  const std::vector<TokenId>& prompt() const { return prompt_; }

  bool is_committed(int slot) const {
    check_slot(slot);
    return slots_[slot].has_value();
  }

  TokenId committed_token(int slot) const {
    check_slot(slot);
    if (!slots_[slot]) fail(Errc::PositionOutOfRange, "slot " + std::to_string(slot) + " is masked");
    return *slots_[slot];
  }

  void commit(int slot, TokenId token) {
    check_slot(slot);
    if (slots_[slot]) fail(Errc::SlotRecommit, "slot " + std::to_string(slot) + " already committed");
    slots_[slot] = token;
  }

  // Token at an absolute position: prompt token, committed token, or the
  // mask placeholder for uncommitted slots.
  TokenId token_at(int abs_pos, const Vocab& vocab) const {
    if (abs_pos < 0 || abs_pos >= total_len())
      fail(Errc::PositionOutOfRange, "position " + std::to_string(abs_pos));
    if (abs_pos < prompt_len()) return prompt_[abs_pos];
    const auto& s = slots_[abs_pos - prompt_len()];
    return s ? *s : vocab.mask;
  }

  int masked_in(Interval gen_range) const {
    int n = 0;
    for (int i = gen_range.begin; i < gen_range.end; ++i)
      if (!slots_[i]) ++n;
    return n;
  }

  std::vector<TokenId> generated_tokens(const Vocab& vocab) const {
    std::vector<TokenId> out(slots_.size());
    for (size_t i = 0; i < slots_.size(); ++i) out[i] = slots_[i] ? *slots_[i] : vocab.mask;
    return out;
  }

 private:
  void check_slot(int slot) const {
    if (slot < 0 || slot >= gen_len())
      fail(Errc::PositionOutOfRange, "slot " + std::to_string(slot));
  }

  std::vector<TokenId> prompt_;
  std::vector<std::optional<TokenId>> slots_;
};

inline SequenceState init_sequence(std::vector<TokenId> prompt, int gen_len) {
  return SequenceState(std::move(prompt), gen_len);
}

inline double masked_ratio(const SequenceState& state, const BlockPartition& part, int block) {
  if (block < 0 || block >= part.num_blocks)
    fail(Errc::BlockOutOfRange, "block " + std::to_string(block));
  return double(state.masked_in(part.ranges[block])) / double(part.block_size);
}

enum class Region { Prefix, Current, Suffix };

inline Region region_of(int abs_pos, const SequenceState& state, const BlockPartition& part,
                        int current_block) {
  if (current_block < 0 || current_block >= part.num_blocks)
    fail(Errc::BlockOutOfRange, "block " + std::to_string(current_block));
  if (abs_pos < 0 || abs_pos >= state.total_len())
    fail(Errc::PositionOutOfRange, "position " + std::to_string(abs_pos));
  Interval cur = part.abs_range(current_block, state.prompt_len());
  if (abs_pos < cur.begin) return Region::Prefix;
  if (abs_pos < cur.end) return Region::Current;
  return Region::Suffix;
}

}  // namespace streamdec
