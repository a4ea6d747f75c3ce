#include <gtest/gtest.h>

#include <cmath>

#include "lnforge/codec.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace lnforge {
namespace {

using testing::code_of;

// N grids mean + sum_j a_ij u_j with r random directions.
std::vector<Volume> subspace_data(Rng& rng, const Dims& d, std::size_t n, std::size_t r) {
  const std::size_t v = d.count();
  std::vector<std::vector<double>> dirs(r, std::vector<double>(v));
  for (auto& u : dirs)
    for (double& x : u) x = rng.normal() * 0.1;
  std::vector<double> mean(v);
  for (double& x : mean) x = rng.uniform(-0.5, 0.5);
  std::vector<Volume> out;
  for (std::size_t s = 0; s < n; ++s) {
    Volume g(d, {}, Unit::sdf);
    std::vector<double> a(r);
    for (double& x : a) x = rng.normal();
    for (std::size_t p = 0; p < v; ++p) {
      double x = mean[p];
      for (std::size_t j = 0; j < r; ++j) x += a[j] * dirs[j][p];
      g.values()[p] = static_cast<float>(x);
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<std::vector<double>> as_rows(const std::vector<Volume>& vols) {
  std::vector<std::vector<double>> rows;
  for (const auto& v : vols) rows.emplace_back(v.values().begin(), v.values().end());
  return rows;
}

TEST(Codec, ExactOnLowRankData) {
  Rng rng(11);
  const auto data = subspace_data(rng, {6, 5, 4}, 30, 3);
  const LinearCodec c = fit_codec(data, 3, 10.0f);
  ASSERT_EQ(c.latent_dim(), 3u);
  for (const auto& g : data) {
    const auto rec = decode_unclipped(c, encode(c, g));
    for (std::size_t p = 0; p < g.size(); ++p) ASSERT_NEAR(rec[p], g.values()[p], 1e-6);
  }
}

TEST(Codec, SingularValuesMatchDenseSvd) {
  Rng rng(12);
  for (int trial = 0; trial < 3; ++trial) {
    const auto data = subspace_data(rng, {5, 5, 5}, 40, 8);
    const LinearCodec c = fit_codec(data, 5, 10.0f);
    const auto ref = oracle::singular_values(as_rows(data));
    for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(c.singular_values[k] / ref[k], 1.0, 1e-6) << "k=" << k;
  }
}

TEST(Codec, CovarianceRouteWhenSamplesExceedVoxels) {
  Rng rng(13);
  const auto data = subspace_data(rng, {3, 2, 2}, 40, 12);
  const LinearCodec c = fit_codec(data, 4, 10.0f);
  const auto ref = oracle::singular_values(as_rows(data));
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(c.singular_values[k] / ref[k], 1.0, 1e-6);
}

TEST(Codec, BasisRowsAreOrthonormal) {
  Rng rng(14);
  const auto data = subspace_data(rng, {6, 6, 6}, 25, 10);
  const LinearCodec c = fit_codec(data, 6, 10.0f);
  for (std::size_t a = 0; a < 6; ++a)
    for (std::size_t b = 0; b < 6; ++b) {
      double s = 0.0;
      for (std::size_t p = 0; p < c.voxel_count(); ++p)
        s += static_cast<double>(c.row(a)[p]) * static_cast<double>(c.row(b)[p]);
      EXPECT_NEAR(s, a == b ? 1.0 : 0.0, 1e-6);
    }
}

TEST(Codec, RankDeficientDataCompletesBasis) {
  Rng rng(15);
  const auto data = subspace_data(rng, {4, 4, 4}, 10, 2);
  const LinearCodec c = fit_codec(data, 4, 10.0f);
  EXPECT_EQ(c.latent_dim(), 4u);
  EXPECT_LT(c.singular_values[2], 1e-5f * c.singular_values[0]);
  EXPECT_LT(c.singular_values[3], 1e-5f * c.singular_values[0]);
}

TEST(Codec, DecodeClipsToTau) {
  Rng rng(16);
  std::vector<TsdfGrid> grids;
  for (int n = 0; n < 12; ++n) {
    const double r = rng.uniform(2.0, 4.0);
    grids.push_back(mask_to_tsdf(oracle::ball_mask({12, 12, 12}, {}, 5.5, 5.5, 5.5, r)));
  }
  const LinearCodec c = fit_codec(std::span<const TsdfGrid>(grids), 3);
  EXPECT_EQ(c.clip, 0.2f);
  LatentCode z{std::vector<double>(3, 50.0)};
  const TsdfGrid t = decode(c, z);
  for (float v : t.grid.values()) ASSERT_LE(std::abs(v), 0.2f);
  EXPECT_EQ(t.norm_scale, grids.front().norm_scale);
}

TEST(Codec, FileRoundTripDecodesIdentically) {
  Rng rng(17);
  const auto data = subspace_data(rng, {5, 4, 3}, 12, 4);
  const LinearCodec c = fit_codec(data, 3, 1.0f);
  const auto dir = testing::temp_dir("codec");
  save_codec(c, dir / "c.codec");
  const LinearCodec d = load_codec(dir / "c.codec");
  EXPECT_EQ(d.basis, c.basis);
  EXPECT_EQ(d.mean, c.mean);
  EXPECT_EQ(d.singular_values, c.singular_values);
  const LatentCode z = encode(c, data[3]);
  EXPECT_EQ(encode(d, data[3]).values, z.values);
}

TEST(Codec, Errors) {
  Rng rng(18);
  const auto data = subspace_data(rng, {3, 3, 3}, 5, 2);
  EXPECT_EQ(code_of([&] { fit_codec(data, 5, 1.0f); }), Errc::too_few_samples);
  EXPECT_EQ(code_of([&] { fit_codec(data, 0, 1.0f); }), Errc::invalid_argument);
  const LinearCodec c = fit_codec(data, 2, 1.0f);
  EXPECT_EQ(code_of([&] { encode(c, Volume({2, 2, 2}, {}, Unit::sdf)); }), Errc::dims_mismatch);
  EXPECT_EQ(code_of([&] { decode(c, LatentCode{{1.0}}); }), Errc::dims_mismatch);
  EXPECT_EQ(code_of([] { decode_codec("garbage"); }), Errc::malformed_header);
}

}  // namespace
}  // namespace lnforge
