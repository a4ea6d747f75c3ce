#include <gtest/gtest.h>

#include <cmath>

#include "lnforge/placement.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace lnforge {
namespace {

using testing::code_of;

Volume random_ct(Rng& rng, const Dims& d, const Spacing& s) {
  Volume ct(d, s, Unit::hu);
  for (float& v : ct.values()) v = rng.uniform() < 0.97 ? 40.0f : (rng.uniform() < 0.5 ? -800.0f : 600.0f);
  return ct;
}

// Exhaustive version of the heuristic: every ladder radius re-scans its ball,
// exclusion tests every voxel of the ball against the dilated set.
std::vector<PlacementCandidate> brute_candidates(const Volume& ct, const Mask& region, const Mask& existing,
                                                 const PlacementConfig& cfg) {
  const Dims& d = ct.dims();
  const Spacing& s = ct.spacing();
  Mask blocked(d, s);
  const auto dist2 = oracle::edt_squared(existing);
  for (std::size_t n = 0; n < dist2.size(); ++n)
    if (existing.count() > 0 && dist2[n] <= cfg.margin * cfg.margin) blocked.values()[n] = 1;
  std::vector<PlacementCandidate> out;
  for (std::int64_t k = 0; k < d.nz; k += cfg.stride)
    for (std::int64_t j = 0; j < d.ny; j += cfg.stride)
      for (std::int64_t i = 0; i < d.nx; i += cfg.stride) {
        if (!region.at(i, j, k)) continue;
        int best = -1;
        double best_f = 0;
        for (std::size_t r = 0; r < cfg.radius_ladder_mm.size(); ++r) {
          const double rad = cfg.radius_ladder_mm[r];
          const Mask ball = oracle::ball_mask(d, s, i * s.sx, j * s.sy, k * s.sz, rad);
          std::size_t total = 0, soft = 0;
          bool hit = false;
          for (std::size_t n = 0; n < ball.size(); ++n) {
            if (!ball.values()[n]) continue;
            ++total;
            const float v = ct.values()[n];
            if (v >= cfg.hu_lo && v <= cfg.hu_hi) ++soft;
            if (blocked.values()[n]) hit = true;
          }
          const double f = static_cast<double>(soft) / static_cast<double>(total);
          if (f < cfg.min_soft_fraction) break;
          if (!hit) {
            best = static_cast<int>(r);
            best_f = f;
          }
        }
        if (best >= 0) out.push_back({{i, j, k}, 2 * cfg.radius_ladder_mm[static_cast<std::size_t>(best)], best_f});
      }
  return out;
}

TEST(Placement, DilationMatchesBruteForce) {
  Rng rng(1);
  const Mask m = oracle::random_mask(rng, {11, 9, 8}, 0.02);
  const auto d2 = oracle::edt_squared(m);
  for (int margin : {1, 2, 3}) {
    const Mask out = dilate(m, margin);
    for (std::size_t n = 0; n < d2.size(); ++n) ASSERT_EQ(out.values()[n] != 0, d2[n] <= margin * margin);
  }
  EXPECT_EQ(dilate(m, 0), m);
}

TEST(Placement, SoftFractionCountsInBoundsVoxels) {
  Volume ct({5, 5, 5}, {}, Unit::hu, 40.0f);
  ct.at(2, 2, 3) = 900.0f;
  // radius 1 ball: 7 voxels, one out of window
  EXPECT_NEAR(soft_tissue_fraction(ct, {2, 2, 2}, 1.0, -175, 250), 6.0 / 7.0, 1e-15);
  // corner ball: 4 in-bounds voxels
  EXPECT_NEAR(soft_tissue_fraction(ct, {0, 0, 0}, 1.0, -175, 250), 1.0, 1e-15);
  ct.at(0, 0, 0) = -1000.0f;
  EXPECT_NEAR(soft_tissue_fraction(ct, {0, 0, 0}, 1.0, -175, 250), 0.75, 1e-15);
}

TEST(Placement, UniformSoftTissueAdmitsLargestRung) {
  const Dims d{24, 24, 24};
  Volume ct(d, {}, Unit::hu, 40.0f);
  Mask region(d, {});
  region.set({12, 12, 12}, true);
  const auto c = find_candidates(ct, region, Mask(d, {}), PlacementConfig{});
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].center, (Index3{12, 12, 12}));
  EXPECT_EQ(c[0].max_long_axis_mm, 32.0);
  EXPECT_EQ(c[0].soft_tissue_fraction, 1.0);
}

TEST(Placement, MatchesBruteForceWithExistingLesions) {
  Rng rng(2);
  for (const Spacing s : {Spacing{1, 1, 1}, Spacing{0.8, 0.8, 1.5}}) {
    const Dims d{22, 20, 16};
    const Volume ct = random_ct(rng, d, s);
    Mask region(d, s);
    for (std::size_t n = 0; n < region.size(); ++n) region.values()[n] = rng.uniform() < 0.8;
    Mask existing(d, s);
    existing.set({6, 6, 6}, true);
    existing.set({7, 6, 6}, true);
    existing.set({15, 12, 9}, true);
    PlacementConfig cfg;
    cfg.stride = 2;
    cfg.min_soft_fraction = 0.93;
    cfg.radius_ladder_mm = {1.5, 3, 4.5, 6};
    const auto fast = find_candidates(ct, region, existing, cfg);
    const auto slow = brute_candidates(ct, region, existing, cfg);
    ASSERT_EQ(fast.size(), slow.size());
    for (std::size_t n = 0; n < fast.size(); ++n) {
      EXPECT_EQ(fast[n].center, slow[n].center);
      EXPECT_EQ(fast[n].max_long_axis_mm, slow[n].max_long_axis_mm);
      EXPECT_NEAR(fast[n].soft_tissue_fraction, slow[n].soft_tissue_fraction, 1e-15);
    }
  }
}

TEST(Placement, ExclusionIsMonotone) {
  Rng rng(3);
  const Dims d{20, 20, 20};
  const Volume ct = random_ct(rng, d, {});
  Mask region(d, {});
  for (auto& v : region.values()) v = 1;
  PlacementConfig cfg;
  cfg.stride = 3;
  const SoftTissueScan scan = scan_soft_tissue(ct, region, cfg);
  Mask existing(d, {});
  const auto none = apply_exclusion(scan, existing, cfg);
  existing.set({10, 10, 10}, true);
  const auto some = apply_exclusion(scan, existing, cfg);
  EXPECT_LE(some.size(), none.size());
  std::size_t n = 0;
  for (const auto& c : some) {
    while (none[n].center != c.center) ++n;
    EXPECT_LE(c.max_long_axis_mm, none[n].max_long_axis_mm);
  }
}

TEST(Placement, RejectsBadInput) {
  const Dims d{8, 8, 8};
  Volume ct(d, {}, Unit::hu, 40.0f);
  Mask region(d, {});
  PlacementConfig bad;
  bad.radius_ladder_mm = {4, 2};
  EXPECT_EQ(code_of([&] { find_candidates(ct, region, region, bad); }), Errc::invalid_argument);
  bad = {};
  bad.stride = 0;
  EXPECT_EQ(code_of([&] { bad.validate(); }), Errc::invalid_argument);
  EXPECT_EQ(code_of([&] { find_candidates(ct, Mask({8, 8, 7}, {}), region, {}); }), Errc::dims_mismatch);
  EXPECT_EQ(code_of([&] { find_candidates(ct, region, Mask(d, {2, 1, 1}), {}); }), Errc::spacing_mismatch);
}

TEST(Placement, TargetLongAxisIsUniform) {
  Rng rng(4);
  std::vector<double> x;
  for (int n = 0; n < 4000; ++n) x.push_back(sample_target_long_axis(rng));
  for (double v : x) ASSERT_TRUE(v >= 1.7 && v < 30.0);
  EXPECT_LT(oracle::ks_uniform(x, 1.7, 30.0), 1.63 / std::sqrt(4000.0));
}

}  // namespace
}  // namespace lnforge
