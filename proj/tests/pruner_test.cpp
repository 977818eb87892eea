#include "streamdec/pruner.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "test_util.hpp"

using namespace streamdec;

namespace {

std::vector<TokenId> prompt_of(int len) { return std::vector<TokenId>(len, 3); }

}  // namespace

TEST(PrunedIndexSet, MidSequenceWorkedExample) {
  // L = 512, K = 32, c = 2, w = 2, p_L = 300, keep_trailing on.
  BlockPartition p = partition_blocks(512, 32);
  PrunedIndexSet idx = pruned_index_set(p, 2, 2, 300, true);
  EXPECT_EQ(idx.prefix, (Interval{0, 364}));
  EXPECT_EQ(idx.current, (Interval{364, 396}));
  ASSERT_EQ(idx.window.size(), 2u);
  EXPECT_EQ(idx.window[0], (Interval{396, 428}));
  EXPECT_EQ(idx.window[1], (Interval{428, 460}));
  ASSERT_TRUE(idx.trailing.has_value());
  EXPECT_EQ(*idx.trailing, 811);
}

TEST(PrunedIndexSet, LastBlockHasNoWindowOrTrailing) {
  BlockPartition p = partition_blocks(512, 32);
  for (int w : {0, 1, 7, 40}) {
    PrunedIndexSet idx = pruned_index_set(p, 15, w, 300, true);
    EXPECT_TRUE(idx.window.empty());
    EXPECT_FALSE(idx.trailing.has_value());
    EXPECT_EQ(idx.current, (Interval{780, 812}));
    EXPECT_EQ(idx.prefix, (Interval{0, 780}));
  }
}

TEST(PrunedIndexSet, WindowReachingTheEndDropsTrailing) {
  BlockPartition p = partition_blocks(512, 32);
  PrunedIndexSet idx = pruned_index_set(p, 13, 5, 300, true);
  ASSERT_EQ(idx.window.size(), 2u);
  EXPECT_EQ(idx.window[0], (Interval{748, 780}));
  EXPECT_EQ(idx.window[1], (Interval{780, 812}));
  EXPECT_FALSE(idx.trailing.has_value());
}

TEST(PrunedIndexSet, ZeroWindowKeepsTrailingOnly) {
  BlockPartition p = partition_blocks(512, 32);
  PrunedIndexSet idx = pruned_index_set(p, 2, 0, 300, true);
  EXPECT_TRUE(idx.window.empty());
  ASSERT_TRUE(idx.trailing.has_value());
  EXPECT_EQ(*idx.trailing, 811);
}

TEST(PrunedIndexSet, KeepTrailingOffDropsTrailing) {
  BlockPartition p = partition_blocks(512, 32);
  PrunedIndexSet idx = pruned_index_set(p, 2, 2, 300, false);
  EXPECT_FALSE(idx.trailing.has_value());
}

TEST(PrunedIndexSet, Errors) {
  BlockPartition p = partition_blocks(512, 32);
  EXPECT_ERRC(pruned_index_set(p, 16, 2, 300, true), Errc::BlockOutOfRange);
  EXPECT_ERRC(pruned_index_set(p, -1, 2, 300, true), Errc::BlockOutOfRange);
  EXPECT_ERRC(pruned_index_set(p, 2, -1, 300, true), Errc::ParamOutOfRange);
}

// Growing the window only adds positions; w = N gives the identity view.
TEST(PrunedIndexSet, CoverageMonotoneInWindowProperty) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 60; ++trial) {
    int k = 1 + int(rng() % 9);
    int n = 1 + int(rng() % 9);
    int pl = 1 + int(rng() % 20);
    int c = int(rng() % n);
    BlockPartition p = partition_blocks(n * k, k);
    std::vector<int> prev;
    for (int w = 0; w <= n; ++w) {
      std::vector<int> pos = pruned_index_set(p, c, w, pl, true).positions();
      EXPECT_TRUE(std::is_sorted(pos.begin(), pos.end()));
      EXPECT_TRUE(std::includes(pos.begin(), pos.end(), prev.begin(), prev.end()));
      prev = std::move(pos);
    }
    std::vector<int> all(pl + n * k);
    for (size_t i = 0; i < all.size(); ++i) all[i] = int(i);
    EXPECT_EQ(prev, all);
  }
}

// With keep_trailing on, the trailing index appears exactly when the window
// stops short of the final generation position, and then sits beyond it.
TEST(PrunedIndexSet, TrailingExclusivityProperty) {
  for (int l : {16, 60, 128, 256}) {
    for (int k = 1; k <= 32; ++k) {
      if (l % k != 0) continue;
      BlockPartition p = partition_blocks(l, k);
      int pl = 7;
      for (int c = 0; c < p.num_blocks; ++c) {
        for (int w = 0; w <= p.num_blocks + 1; ++w) {
          PrunedIndexSet idx = pruned_index_set(p, c, w, pl, true);
          bool reaches_end = idx.window.empty()
                                 ? idx.current.end == pl + l
                                 : idx.window.back().end == pl + l;
          EXPECT_NE(idx.trailing.has_value(), reaches_end);
          if (idx.trailing) {
            EXPECT_EQ(*idx.trailing, pl + l - 1);
            for (const Interval& win : idx.window) EXPECT_GE(*idx.trailing, win.end);
          }
        }
      }
    }
  }
}

TEST(BuildView, FreshFirstBlockWorkedExample) {
  // p_L = 2, L = 12, K = 4, block 0, w = 1, trailing kept.
  Vocab v(16);
  BlockPartition p = partition_blocks(12, 4);
  SequenceState s = init_sequence({10, 11}, 12);
  PrunedIndexSet idx = pruned_index_set(p, 0, 1, 2, true);
  SequenceView view = build_view(s, idx, v);

  std::vector<int> want_pos = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 13};
  EXPECT_EQ(view.position_ids, want_pos);
  std::vector<TokenId> want_tok = {10, 11, 0, 0, 0, 0, 0, 0, 0, 0, 0};
  EXPECT_EQ(view.tokens, want_tok);
  std::vector<int> want_q = {2, 3, 4, 5, 6, 7, 8, 9, 13};
  EXPECT_EQ(view.query_span, want_q);
  EXPECT_EQ(view.current_block, 0);
  EXPECT_EQ(view.current, (Interval{2, 6}));
}

TEST(BuildView, CommittedCurrentSlotsStayInQuerySpan) {
  Vocab v(16);
  BlockPartition p = partition_blocks(12, 4);
  SequenceState s = init_sequence({10, 11}, 12);
  s.commit(0, 5);
  s.commit(2, 6);
  PrunedIndexSet idx = pruned_index_set(p, 0, 1, 2, true);
  SequenceView view = build_view(s, idx, v);
  std::vector<TokenId> want_tok = {10, 11, 5, 0, 6, 0, 0, 0, 0, 0, 0};
  EXPECT_EQ(view.tokens, want_tok);
  // Current positions stay queries after commit; window/trailing masks follow.
  std::vector<int> want_q = {2, 3, 4, 5, 6, 7, 8, 9, 13};
  EXPECT_EQ(view.query_span, want_q);
}

TEST(BuildView, FullyCommittedBufferHasNoMasks) {
  Vocab v(16);
  BlockPartition p = partition_blocks(8, 4);
  SequenceState s = init_sequence({10}, 8);
  for (int i = 0; i < 8; ++i) s.commit(i, 4);
  PrunedIndexSet idx = pruned_index_set(p, 1, 2, 1, true);
  SequenceView view = build_view(s, idx, v);
  for (TokenId t : view.tokens) EXPECT_NE(t, v.mask);
  // Only current positions remain queries.
  std::vector<int> want_q = {5, 6, 7, 8};
  EXPECT_EQ(view.query_span, want_q);
}

TEST(BuildView, PositionIdsRoundTripProperty) {
  Vocab v(32);
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    int k = 1 + int(rng() % 8);
    int n = 1 + int(rng() % 8);
    int pl = 1 + int(rng() % 16);
    int c = int(rng() % n);
    int w = int(rng() % (n + 2));
    BlockPartition p = partition_blocks(n * k, k);
    SequenceState s = init_sequence(prompt_of(pl), n * k);
    for (int i = 0; i < n * k; ++i)
      if (rng() % 3 == 0) s.commit(i, 4 + TokenId(rng() % 28));
    PrunedIndexSet idx = pruned_index_set(p, c, w, pl, true);
    SequenceView view = build_view(s, idx, v);
    EXPECT_EQ(view.position_ids, idx.positions());
    EXPECT_TRUE(std::is_sorted(view.position_ids.begin(), view.position_ids.end()));
    for (size_t i = 1; i < view.position_ids.size(); ++i)
      EXPECT_LT(view.position_ids[i - 1], view.position_ids[i]);
    ASSERT_EQ(view.tokens.size(), view.position_ids.size());
    for (size_t i = 0; i < view.tokens.size(); ++i)
      EXPECT_EQ(view.tokens[i], s.token_at(view.position_ids[i], v));
    // Queries are view members and cover every current position.
    for (int q : view.query_span) EXPECT_TRUE(view.index_of(q).has_value());
    for (int pos = idx.current.begin; pos < idx.current.end; ++pos)
      EXPECT_TRUE(std::binary_search(view.query_span.begin(), view.query_span.end(), pos));
  }
}

TEST(BuildView, RejectsMismatchedState) {
  Vocab v(16);
  BlockPartition p = partition_blocks(12, 4);
  SequenceState other = init_sequence({10, 11}, 8);
  PrunedIndexSet idx = pruned_index_set(p, 0, 1, 2, true);
  EXPECT_ERRC(build_view(other, idx, v), Errc::InconsistentIndexSet);
  SequenceState longer_prompt = init_sequence({10, 11, 12}, 12);
  EXPECT_ERRC(build_view(longer_prompt, idx, v), Errc::InconsistentIndexSet);
}

TEST(PrefixCache, MissThenHitsThenAdvance) {
  BlockPartition p = partition_blocks(12, 4);
  SequenceState s = init_sequence({10, 11}, 12);
  PrefixCache cache;
  EXPECT_TRUE(cache.update(s, p, 0));
  EXPECT_EQ(cache.cached_upto(), 2);
  EXPECT_EQ(cache.valid_for_block(), 0);
  EXPECT_FALSE(cache.update(s, p, 0));
  EXPECT_FALSE(cache.update(s, p, 0));
  EXPECT_TRUE(cache.update(s, p, 1));
  EXPECT_EQ(cache.cached_upto(), 6);
  EXPECT_EQ(cache.hits(), 2u);
  EXPECT_EQ(cache.misses(), 2u);
  EXPECT_ERRC(cache.update(s, p, 0), Errc::BlockRegression);
}

TEST(PrefixCache, OneRebuildPerBlockProperty) {
  std::mt19937_64 rng(29);
  BlockPartition p = partition_blocks(40, 8);
  SequenceState s = init_sequence({1, 2, 3}, 40);
  PrefixCache cache;
  for (int c = 0; c < p.num_blocks; ++c) {
    int steps = 1 + int(rng() % 5);
    for (int t = 0; t < steps; ++t) {
      bool rebuilt = cache.update(s, p, c);
      EXPECT_EQ(rebuilt, t == 0);
      EXPECT_EQ(cache.cached_upto(), 3 + c * 8);
    }
  }
  EXPECT_EQ(cache.misses(), uint64_t(p.num_blocks));
}
