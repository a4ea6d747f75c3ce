#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lnforge/adapter.hpp"
#include "lnforge/codec.hpp"
#include "lnforge/diffusion.hpp"
#include "lnforge/lnv_io.hpp"
#include "lnforge/metrics.hpp"
#include "lnforge/phantom.hpp"
#include "lnforge/placement.hpp"
#include "lnforge/sdf.hpp"
#include "lnforge/synthesis.hpp"
#include "oracles.hpp"
#include "pipeline.hpp"

namespace fs = std::filesystem;
using namespace lnforge;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double rel_err(double a, double b, double floor) { return std::abs(a - b) / std::max(std::abs(a) + std::abs(b), floor); }

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("lnforge_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// ---------------------------------------------------------------------------

Outcome edt_exactness() {
  Rng rng(101);
  Stopwatch sw;
  double worst = 0.0;
  double fast_time = 0.0;
  for (int n = 0; n < 200; ++n) {
    const Mask m = oracle::random_mask(rng, {16, 16, 16}, rng.uniform(0.002, 0.3));
    Stopwatch f;
    const DistanceGrid d = edt_squared(m);
    fast_time += f.seconds();
    const auto ref = oracle::edt_squared(m);
    for (std::size_t v = 0; v < ref.size(); ++v) worst = std::max(worst, std::abs(d.values[v] - ref[v]));
  }
  return {worst == 0.0 && fast_time < 10.0,
          fmt("200 masks, max |edt - brute| = %g, edt time %.3f s (with oracle %.1f s)", worst, fast_time, sw.seconds())};
}

Outcome tsdf_round_trip() {
  Rng rng(102);
  int mismatched = 0;
  float peak = 0.0f;
  for (int n = 0; n < 100; ++n) {
    Mask m = oracle::thick_mask(rng, {8, 8, 8}, rng.uniform(0.2, 0.6));
    if (m.count() == 0) m.values()[0] = m.values()[1] = 1;
    const TsdfGrid t = mask_to_tsdf(m);
    for (float v : t.grid.values()) peak = std::max(peak, std::abs(v));
    if (!(tsdf_to_mask(t) == m)) ++mismatched;
  }
  return {mismatched == 0 && peak <= 0.2f, fmt("100 masks, %d mismatched, max |tsdf| = %.6g", mismatched, peak)};
}

Outcome codec_fidelity() {
  Rng rng(103);
  const Dims d{8, 8, 8};
  const std::size_t nv = d.count();
  std::vector<std::vector<double>> dirs(3, std::vector<double>(nv));
  for (auto& u : dirs)
    for (double& x : u) x = 0.05 * rng.normal();
  std::vector<double> mean(nv);
  for (double& x : mean) x = rng.uniform(-0.1, 0.1);
  std::vector<Volume> data;
  std::vector<std::vector<double>> rows;
  for (int s = 0; s < 60; ++s) {
    const double a[3] = {rng.normal(), rng.normal(), rng.normal()};
    Volume v(d, {}, Unit::sdf);
    for (std::size_t p = 0; p < nv; ++p)
      v.values()[p] = static_cast<float>(mean[p] + a[0] * dirs[0][p] + a[1] * dirs[1][p] + a[2] * dirs[2][p]);
    rows.emplace_back(v.values().begin(), v.values().end());
    data.push_back(std::move(v));
  }
  const LinearCodec c = fit_codec(data, 3, 10.0f);
  double recon = 0.0;
  for (const auto& v : data) {
    const Volume r = decode_volume(c, encode(c, v));
    for (std::size_t p = 0; p < nv; ++p)
      recon = std::max(recon, std::abs(static_cast<double>(r.values()[p]) - v.values()[p]));
  }
  const auto sv = oracle::singular_values(rows);
  double sv_err = 0.0;
  for (std::size_t k = 0; k < 3; ++k) sv_err = std::max(sv_err, std::abs(c.singular_values[k] - sv[k]) / sv[k]);
  return {recon <= 1e-6 && sv_err <= 1e-6,
          fmt("max voxel error %.3g, max relative singular value error %.3g", recon, sv_err)};
}

Outcome diffusion_marginal() {
  const NoiseSchedule s = make_schedule(200, 1e-4, 0.02);
  const int n = 100000;
  const double z0 = 1.5;
  bool ok = true;
  std::string detail;
  for (int t : {1, 100, 200}) {
    Rng rng(static_cast<std::uint64_t>(104 + t));
    double m1 = 0, q1 = 0, m2 = 0, q2 = 0;
    std::vector<double> e(1);
    for (int r = 0; r < n; ++r) {
      LatentCode z{{z0}};
      for (int k = 1; k <= t; ++k) {
        e[0] = rng.normal();
        z = forward_step(z, k, e, s);
      }
      e[0] = rng.normal();
      const double c = forward_sample(LatentCode{{z0}}, t, e, s).values[0];
      m1 += z.values[0];
      q1 += z.values[0] * z.values[0];
      m2 += c;
      q2 += c * c;
    }
    m1 /= n;
    m2 /= n;
    const double v1 = q1 / n - m1 * m1, v2 = q2 / n - m2 * m2;
    const double se_mean = std::sqrt(v1 / n + v2 / n);
    const double se_var = std::sqrt(2.0 * v1 * v1 / (n - 1) + 2.0 * v2 * v2 / (n - 1));
    const double dm = std::abs(m1 - m2) / se_mean, dv = std::abs(v1 - v2) / se_var;
    ok = ok && dm <= 4.0 && dv <= 4.0;
    detail += fmt("%st=%d mean %.2f SE var %.2f SE", detail.empty() ? "" : ", ", t, dm, dv);
  }
  return {ok, detail};
}

Outcome gradient_checks() {
  Rng rng(105);
  DenoiserNet net = make_denoiser(4, 3, {8, 6}, rng);
  for (double& p : net.params) p += 0.1 * rng.normal();
  const NoiseSchedule s = make_schedule(50, 1e-4, 0.02);
  std::vector<DiffusionExample> batch(4);
  std::vector<NoiseDraw> draws;
  for (auto& ex : batch) {
    for (int i = 0; i < 4; ++i) ex.z0.push_back(rng.normal());
    for (int i = 0; i < 3; ++i) ex.cond.push_back(rng.normal());
    draws.push_back(draw_noise(rng, s, 4));
  }
  const LossAndGrad lg = diffusion_loss(net, batch, draws, s);
  double worst_d = 0.0;
  for (std::size_t p = 0; p < net.params.size(); ++p) {
    DenoiserNet a = net, b = net;
    a.params[p] += 1e-6;
    b.params[p] -= 1e-6;
    const double fd = (diffusion_loss(a, batch, draws, s).loss - diffusion_loss(b, batch, draws, s).loss) / 2e-6;
    worst_d = std::max(worst_d, rel_err(fd, lg.grad[p], 1e-7));
  }

  const Dims d{5, 4, 4};
  auto grid = [&](double amp) {
    Volume v(d, {}, Unit::sdf);
    for (float& x : v.values()) x = static_cast<float>(rng.uniform(-amp, amp));
    return TsdfGrid{std::move(v), 0.2f, 1.0};
  };
  // inputs stay inside the truncation band and the residual is small, so the
  // clamp is inactive around the evaluation point
  const TsdfGrid noisy = grid(0.09), target = grid(0.18);
  AdapterNet a = make_adapter(0.2f, rng, 3);
  for (std::size_t p = a.b1(); p < a.w2(); ++p) a.params[p] = 0.1 * rng.normal();
  for (std::size_t p = a.w2(); p < a.param_count(); ++p) a.params[p] = 0.02 * rng.normal();
  double worst_a = 0.0;
  for (AdapterNorm norm : {AdapterNorm::l1, AdapterNorm::l2}) {
    const LossAndGrad ag = adapter_loss(target, noisy, a, norm);
    for (std::size_t p = 0; p < a.param_count(); ++p) {
      AdapterNet up = a, dn = a;
      up.params[p] += 1e-7;
      dn.params[p] -= 1e-7;
      const double fd =
          (adapter_loss(target, noisy, up, norm).loss - adapter_loss(target, noisy, dn, norm).loss) / 2e-7;
      worst_a = std::max(worst_a, rel_err(fd, ag.grad[p], 1e-6));
    }
  }
  return {worst_d <= 1e-3 && worst_a <= 1e-3,
          fmt("denoiser %zu params max rel err %.2g, adapter %zu params (l1, l2) max rel err %.2g",
              net.params.size(), worst_d, a.param_count(), worst_a)};
}

// ---------------------------------------------------------------------------
// Shape models shared by the training, adapter and assembly criteria.

constexpr std::size_t kLatent = 32;
const std::vector<std::size_t> kHidden{128, 128};

TrainConfig shape_train_config(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.steps = 3000;
  cfg.batch_size = 64;
  cfg.learning_rate = 1e-3;
  cfg.seed = seed;
  return cfg;
}

TrainConfig adapter_train_config(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.steps = 300;
  cfg.batch_size = 4;
  cfg.learning_rate = 3e-3;
  cfg.seed = seed;
  return cfg;
}

struct ShapeModels {
  std::vector<TsdfGrid> train;
  std::vector<LatentCode> codes;
  ShapeGenerator gen;
  AdapterNet adapter;
  double init_loss = 0.0;
  double final_loss = 0.0;
  double train_seconds = 0.0;
};

std::vector<TsdfGrid> tsdfs(const std::vector<Mask>& masks) {
  std::vector<TsdfGrid> out;
  for (const auto& m : masks) out.push_back(mask_to_tsdf(m));
  return out;
}

ShapeModels train_shape_models(std::uint64_t seed) {
  ShapeModels s;
  Stopwatch sw;
  s.train = tsdfs(make_toy_family(200, seed, ShapeFamily{}));
  s.gen.codec = fit_codec(s.train, kLatent);
  for (const auto& t : s.train) s.codes.push_back(encode(s.gen.codec, t));

  LatentDiffusionModel& m = s.gen.model;
  m.schedule = make_schedule(200, 1e-4, 0.02);
  m.latent_scale = latent_rms(s.codes);
  std::vector<DiffusionExample> data(s.codes.size());
  for (std::size_t n = 0; n < data.size(); ++n) {
    data[n].z0 = s.codes[n].values;
    for (double& v : data[n].z0) v /= m.latent_scale;
  }
  Rng init(mix_seed(seed, 7));
  const DenoiserNet net0 = make_denoiser(kLatent, 0, kHidden, init);
  m.net = train(net0, data, m.schedule, shape_train_config(seed)).net;

  // fixed evaluation draws: five per training latent
  std::vector<DiffusionExample> eval;
  std::vector<NoiseDraw> draws;
  Rng er(mix_seed(seed, 8));
  for (int r = 0; r < 5; ++r)
    for (const auto& ex : data) {
      eval.push_back(ex);
      draws.push_back(draw_noise(er, m.schedule, kLatent));
    }
  s.init_loss = diffusion_loss(net0, eval, draws, m.schedule).loss;
  s.final_loss = diffusion_loss(m.net, eval, draws, m.schedule).loss;

  const double sigma = latent_noise_sigma(s.codes, 0.25);
  const auto pairs = make_adapter_pairs(s.train, s.gen.codec, sigma, mix_seed(seed, 9));
  Rng ar(mix_seed(seed, 10));
  s.adapter = train_adapter(make_adapter(kDefaultTau, ar), pairs, adapter_train_config(seed)).net;
  s.gen.adapter = s.adapter;
  s.train_seconds = sw.seconds();
  return s;
}

const ShapeModels& shape_models() {
  static const ShapeModels s = train_shape_models(2024);
  return s;
}

Outcome training_sanity() {
  const ShapeModels& s = shape_models();
  const double drop = 1.0 - s.final_loss / s.init_loss;
  Rng rng(106);
  int good = 0;
  for (int n = 0; n < 100; ++n) {
    const Mask m = tsdf_to_mask(generate_shape_tsdf(s.gen, rng));
    if (m.count() > 0 && is_connected6(m)) ++good;
  }
  return {drop >= 0.5 && good >= 90 && s.train_seconds <= 300.0,
          fmt("loss %.4g -> %.4g (drop %.1f%%), %d/100 samples non-empty and connected, trained in %.1f s", s.init_loss,
              s.final_loss, 100.0 * drop, good, s.train_seconds)};
}

Outcome adapter_benefit() {
  const ShapeModels& s = shape_models();
  const auto held = tsdfs(make_toy_family(100, 9090, ShapeFamily{}));
  const double sigma = latent_noise_sigma(s.codes, 0.25);
  const auto pairs = make_adapter_pairs(held, s.gen.codec, sigma, 107);
  const double trained = mean_adapter_loss(pairs, s.adapter);
  const double identity = mean_adapter_loss(pairs, identity_adapter(kDefaultTau));
  return {trained < identity, fmt("held-out L1 %.6g (trained) vs %.6g (identity), sigma %.4g", trained, identity, sigma)};
}

// ---------------------------------------------------------------------------

FeatureSet random_features(Rng& rng, std::size_t n, std::size_t dim, double shift) {
  FeatureSet f;
  f.dim = dim;
  std::vector<double> v(dim);
  for (std::size_t r = 0; r < n; ++r) {
    for (double& x : v) x = rng.normal() * rng.uniform(0.5, 1.5) + shift;
    f.add(v);
  }
  return f;
}

Outcome ipr_exactness() {
  Rng rng(108);
  int mismatches = 0, swap_fail = 0, identity_fail = 0;
  for (int n = 0; n < 50; ++n) {
    const std::size_t dim = 1 + rng.below(8);
    const std::size_t k = 1 + rng.below(5);
    const FeatureSet a = random_features(rng, k + 1 + rng.below(60), dim, 0.0);
    const FeatureSet b = random_features(rng, k + 1 + rng.below(60), dim, rng.uniform(0.0, 2.0));
    if (improved_precision(a, b, k) != oracle::coverage(a, b, k)) ++mismatches;
    if (improved_recall(a, b, k) != oracle::coverage(b, a, k)) ++mismatches;
    if (improved_recall(a, b, k) != improved_precision(b, a, k)) ++swap_fail;
    const IprReport same = evaluate_ipr(a, a, k);
    if (same.ip != 1.0 || same.ir != 1.0) ++identity_fail;
  }
  return {mismatches == 0 && swap_fail == 0 && identity_fail == 0,
          fmt("50 instances: %d oracle mismatches, %d swap violations, %d identical-set failures", mismatches,
              swap_fail, identity_fail)};
}

// ---------------------------------------------------------------------------
// Directional ablation.

// Mask-TSDF code in the shared shape codec. Degenerate masks map to the
// constant grid their truncated distance field tends to.
std::vector<double> shape_feature(const LinearCodec& codec, const Mask& m) {
  if (m.count() == 0 || m.count() == m.size()) {
    Volume v(m.dims(), m.spacing(), Unit::sdf, m.count() == 0 ? codec.clip : -codec.clip);
    return encode(codec, v).values;
  }
  return encode(codec, mask_to_tsdf(m, codec.clip, codec.norm_scale)).values;
}

FeatureSet features(const LinearCodec& codec, const std::vector<Mask>& masks, SetLabel label) {
  FeatureSet f;
  f.dim = codec.latent_dim();
  f.label = label;
  for (const auto& m : masks) f.add(shape_feature(codec, m));
  return f;
}

Dims half_dims(const Dims& d) { return {d.nx / 2, d.ny / 2, d.nz / 2}; }

// 2x2x2 block mean.
std::vector<double> downsample(const TsdfGrid& t) {
  const Dims& d = t.dims();
  const Dims h = half_dims(d);
  std::vector<double> out(h.count(), 0.0);
  for (std::int64_t k = 0; k < 2 * h.nz; ++k)
    for (std::int64_t j = 0; j < 2 * h.ny; ++j)
      for (std::int64_t i = 0; i < 2 * h.nx; ++i) out[h.offset(i / 2, j / 2, k / 2)] += t.grid.at(i, j, k) / 8.0;
  return out;
}

// Trilinear upsampling of a half-resolution grid, cell centres aligned.
TsdfGrid upsample(const std::vector<double>& coarse, const Dims& d, float tau) {
  const Dims h = half_dims(d);
  Volume v(d, {}, Unit::sdf);
  auto axis = [](std::int64_t i, std::int64_t n, std::int64_t& a, std::int64_t& b, double& w) {
    const double x = std::clamp((static_cast<double>(i) + 0.5) / 2.0 - 0.5, 0.0, static_cast<double>(n - 1));
    a = static_cast<std::int64_t>(std::floor(x));
    b = std::min(a + 1, n - 1);
    w = x - static_cast<double>(a);
  };
  for (std::int64_t k = 0; k < d.nz; ++k)
    for (std::int64_t j = 0; j < d.ny; ++j)
      for (std::int64_t i = 0; i < d.nx; ++i) {
        std::int64_t i0, i1, j0, j1, k0, k1;
        double wi, wj, wk;
        axis(i, h.nx, i0, i1, wi);
        axis(j, h.ny, j0, j1, wj);
        axis(k, h.nz, k0, k1, wk);
        auto c = [&](std::int64_t a, std::int64_t b, std::int64_t e) { return coarse[h.offset(a, b, e)]; };
        const double x00 = c(i0, j0, k0) * (1 - wi) + c(i1, j0, k0) * wi;
        const double x10 = c(i0, j1, k0) * (1 - wi) + c(i1, j1, k0) * wi;
        const double x01 = c(i0, j0, k1) * (1 - wi) + c(i1, j0, k1) * wi;
        const double x11 = c(i0, j1, k1) * (1 - wi) + c(i1, j1, k1) * wi;
        const double y0 = x00 * (1 - wj) + x10 * wj, y1 = x01 * (1 - wj) + x11 * wj;
        v.at(i, j, k) = std::clamp(static_cast<float>(y0 * (1 - wk) + y1 * wk), -tau, tau);
      }
  return TsdfGrid{std::move(v), tau, 1.0};
}

// Ancestral sampling with the predicted clean grid clipped to the truncation
// band at every step; without it the voxel model's sampler overflows.
std::vector<double> clipped_voxel_sample(const LatentDiffusionModel& m, Rng& rng, double tau) {
  const NoiseSchedule& s = m.schedule;
  const double c = tau / m.latent_scale;
  std::vector<double> z(m.net.latent_dim);
  for (double& x : z) x = rng.normal();
  for (int t = s.steps(); t >= 1; --t) {
    const auto eps = predict_noise(m.net, z, t, {});
    const double ab = s.alpha_bar(t), abp = t > 1 ? s.alpha_bar(t - 1) : 1.0;
    const double c0 = std::sqrt(abp) * s.beta(t) / (1 - ab), ct = std::sqrt(s.alpha(t)) * (1 - abp) / (1 - ab);
    const double sigma = t > 1 ? std::sqrt(s.beta(t) * (1 - abp) / (1 - ab)) : 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double x0 = std::clamp((z[i] - std::sqrt(1 - ab) * eps[i]) / std::sqrt(ab), -c, c);
      z[i] = c0 * x0 + ct * z[i] + (t > 1 ? sigma * rng.normal() : 0.0);
    }
  }
  for (double& v : z) v *= m.latent_scale;
  return z;
}

struct AblationScores {
  IprReport with_adapter, without_adapter, explicit_voxels;
};

AblationScores ablation_run(std::uint64_t seed) {
  const ShapeModels s = train_shape_models(seed);
  const ShapeFamily fam;
  const auto real_masks = make_toy_family(100, mix_seed(seed, 11), fam);
  const FeatureSet real = features(s.gen.codec, real_masks, SetLabel::real);

  std::vector<Mask> with, without;
  ShapeGenerator plain = s.gen;
  plain.adapter.reset();
  for (int n = 0; n < 100; ++n) {
    // the same latent draw feeds both variants
    Rng a(mix_seed(seed, 1000 + static_cast<std::uint64_t>(n)));
    Rng b(mix_seed(seed, 1000 + static_cast<std::uint64_t>(n)));
    with.push_back(tsdf_to_mask(generate_shape_tsdf(s.gen, a)));
    without.push_back(tsdf_to_mask(generate_shape_tsdf(plain, b)));
  }

  // voxel-space baseline: the same denoiser, budget and schedule, trained
  // directly on half-resolution TSDF grids
  std::vector<LatentCode> voxels;
  for (const auto& t : s.train) voxels.push_back(LatentCode{downsample(t)});
  const LatentDiffusionModel vm =
      train_latent_model(voxels, {}, kHidden, make_schedule(200, 1e-4, 0.02), shape_train_config(seed)).model;
  std::vector<Mask> voxel_masks;
  Rng vr(mix_seed(seed, 12));
  for (int n = 0; n < 100; ++n)
    voxel_masks.push_back(tsdf_to_mask(upsample(clipped_voxel_sample(vm, vr, kDefaultTau), fam.dims, kDefaultTau)));

  const std::size_t k = 3;
  return {evaluate_ipr(real, features(s.gen.codec, with, SetLabel::fake), k),
          evaluate_ipr(real, features(s.gen.codec, without, SetLabel::fake), k),
          evaluate_ipr(real, features(s.gen.codec, voxel_masks, SetLabel::fake), k)};
}

Outcome directional_ablation() {
  double ip[3] = {0, 0, 0}, ir[3] = {0, 0, 0};
  std::string per_seed;
  const std::uint64_t seeds[3] = {11, 22, 33};
  for (std::uint64_t seed : seeds) {
    const AblationScores a = ablation_run(seed);
    const IprReport* r[3] = {&a.with_adapter, &a.without_adapter, &a.explicit_voxels};
    for (int v = 0; v < 3; ++v) {
      ip[v] += r[v]->ip / 3.0;
      ir[v] += r[v]->ir / 3.0;
    }
    std::fprintf(stderr, "  ablation seed %llu: adapter %.3f/%.3f, implicit %.3f/%.3f, voxel %.3f/%.3f\n",
                 static_cast<unsigned long long>(seed), a.with_adapter.ip, a.with_adapter.ir, a.without_adapter.ip,
                 a.without_adapter.ir, a.explicit_voxels.ip, a.explicit_voxels.ir);
  }
  const bool ok = ip[0] >= ip[1] && ir[0] >= ir[1] && ip[1] >= ip[2] && ir[1] >= ir[2];
  return {ok, fmt("mean IP/IR over 3 seeds: implicit+adapter %.3f/%.3f, implicit %.3f/%.3f, voxel baseline %.3f/%.3f",
                  ip[0], ir[0], ip[1], ir[1], ip[2], ir[2])};
}

// ---------------------------------------------------------------------------
// Assembly run for rebalancing and placement checks.

constexpr double kLo = 1.7;
constexpr double kHi = 30.0;

TextureGenerator train_texture_generator() {
  const Dims patch{36, 36, 36};
  Rng rng(109);
  std::vector<Volume> tex;
  std::vector<TsdfGrid> cond_grids;
  for (int n = 0; n < 120; ++n) {
    const TexturePatch p = make_texture_patch(rng, patch, ShapeFamily{}, kLo, kHi, 143.75f, -175.0f, 250.0f);
    tex.push_back(p.texture);
    cond_grids.push_back(mask_to_tsdf(p.mask));
  }
  TextureGenerator g;
  g.cond_codec = fit_codec(cond_grids, kLatent);
  g.texture_codec = fit_codec(tex, kLatent, 1.0f);
  std::vector<LatentCode> codes;
  std::vector<std::vector<double>> conds;
  for (std::size_t n = 0; n < tex.size(); ++n) {
    codes.push_back(encode(g.texture_codec, tex[n]));
    conds.push_back(encode(g.cond_codec, cond_grids[n]).values);
  }
  g.model = train_latent_model(codes, conds, kHidden, make_schedule(200, 1e-4, 0.02), shape_train_config(110)).model;
  return g;
}

struct AssemblyRun {
  fs::path dir;
  std::string error;
  double seconds = 0.0;
};

const AssemblyRun& assembly_run() {
  static const AssemblyRun run = [] {
    AssemblyRun r;
    r.dir = scratch("assembly");
    try {
      const TextureGenerator tex = train_texture_generator();
      fs::create_directories(r.dir / "bg");
      std::vector<Background> bgs;
      Rng rng(111);
      char name[32];
      for (int b = 0; b < 100; ++b) {
        BackgroundPhantom p = make_background(rng, {64, 64, 48}, {1.0, 1.0, 1.0});
        std::snprintf(name, sizeof name, "bg_%03d", b);
        save_volume(p.ct, r.dir / "bg" / (std::string(name) + "_ct.lnv"));
        save_mask(p.region, r.dir / "bg" / (std::string(name) + "_region.lnv"));
        bgs.push_back({name, std::move(p.ct), std::move(p.region), std::string("bg/") + name + "_ct.lnv",
                       std::string("bg/") + name + "_region.lnv"});
      }
      const std::vector<std::size_t> counts(bgs.size(), 5);
      AssemblyConfig cfg;
      cfg.seed = 112;
      cfg.long_axis_lo = kLo;
      cfg.long_axis_hi = kHi;
      Stopwatch sw;
      assemble_dataset(bgs, counts, shape_models().gen, tex, cfg, r.dir);
      r.seconds = sw.seconds();
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    return r;
  }();
  return run;
}

// Everything below reads only files written by the assembly run.

struct CheckedLesion {
  std::string background;
  Index3 center;
  double probe_radius_mm;
  double recorded_fraction;
  double realized_mm;
  std::vector<Index3> voxels;  // volume coordinates
};

std::vector<CheckedLesion> read_lesions(const fs::path& dir, const nlohmann::json& manifest) {
  std::vector<CheckedLesion> out;
  for (const auto& e : manifest.at("entries")) {
    CheckedLesion l;
    l.background = e.at("background").get<std::string>();
    const auto c = e.at("center");
    l.center = {c[0].get<std::int64_t>(), c[1].get<std::int64_t>(), c[2].get<std::int64_t>()};
    l.probe_radius_mm = e.at("max_long_axis_mm").get<double>() / 2.0;
    l.recorded_fraction = e.at("soft_tissue_fraction").get<double>();
    l.realized_mm = e.at("realized_mm").get<double>();
    const LnvFile f = read_lnv(dir / e.at("files").at("lesion").get<std::string>());
    const Index3 corner{static_cast<std::int64_t>(f.extras.at("corner_i")),
                        static_cast<std::int64_t>(f.extras.at("corner_j")),
                        static_cast<std::int64_t>(f.extras.at("corner_k"))};
    const Dims& d = f.volume.dims();
    for (std::int64_t k = 0; k < d.nz; ++k)
      for (std::int64_t j = 0; j < d.ny; ++j)
        for (std::int64_t i = 0; i < d.nx; ++i)
          if (f.volume.at(i, j, k) == 1.0f) l.voxels.push_back({corner.i + i, corner.j + j, corner.k + k});
    out.push_back(std::move(l));
  }
  return out;
}

// Longest voxel-centre distance; the maximum is attained on 6-boundary voxels.
double caliper_mm(const std::vector<Index3>& voxels, const Spacing& s) {
  std::vector<Index3> boundary;
  auto has = [&](const Index3& p) { return std::binary_search(voxels.begin(), voxels.end(), p, [](auto& a, auto& b) {
                                      return std::tie(a.k, a.j, a.i) < std::tie(b.k, b.j, b.i);
                                    }); };
  for (const auto& p : voxels) {
    const Index3 n[6] = {{p.i + 1, p.j, p.k}, {p.i - 1, p.j, p.k}, {p.i, p.j + 1, p.k},
                         {p.i, p.j - 1, p.k}, {p.i, p.j, p.k + 1}, {p.i, p.j, p.k - 1}};
    if (!std::all_of(std::begin(n), std::end(n), has)) boundary.push_back(p);
  }
  double best = 0.0;
  for (std::size_t a = 0; a < boundary.size(); ++a)
    for (std::size_t b = a + 1; b < boundary.size(); ++b) {
      const double x = (boundary[a].i - boundary[b].i) * s.sx, y = (boundary[a].j - boundary[b].j) * s.sy,
                   z = (boundary[a].k - boundary[b].k) * s.sz;
      best = std::max(best, x * x + y * y + z * z);
    }
  return std::sqrt(best);
}

Outcome distribution_rebalancing() {
  const AssemblyRun& run = assembly_run();
  if (!run.error.empty()) return {false, "assembly failed: " + run.error};
  const auto manifest = nlohmann::json::parse(read_file(run.dir / "manifest.json"));
  const auto lesions = read_lesions(run.dir, manifest);
  const Spacing s{1.0, 1.0, 1.0};
  const double delta = 2.0 * s.diagonal();
  std::vector<double> lengths;
  int out_of_range = 0, disagree = 0;
  for (const auto& l : lesions) {
    const double len = caliper_mm(l.voxels, s);
    lengths.push_back(len);
    if (len < kLo - delta || len > kHi + delta) ++out_of_range;
    if (std::abs(len - l.realized_mm) > 1e-9) ++disagree;
  }
  const double ks = oracle::ks_uniform(lengths, kLo, kHi);
  // every realized length is within delta of a uniform target, which moves
  // the empirical CDF by at most delta / (hi - lo)
  const double bound = 1.63 / std::sqrt(500.0) + delta / (kHi - kLo);
  return {lesions.size() == 500 && out_of_range == 0 && disagree == 0 && ks <= bound,
          fmt("%zu lesions, range [%.2f, %.2f] mm, %d outside, %d manifest disagreements, KS %.4f <= %.4f, "
              "assembly %.1f s",
              lesions.size(), *std::min_element(lengths.begin(), lengths.end()),
              *std::max_element(lengths.begin(), lengths.end()), out_of_range, disagree, ks, bound, run.seconds)};
}

Outcome placement_contract() {
  const AssemblyRun& run = assembly_run();
  if (!run.error.empty()) return {false, "assembly failed: " + run.error};
  const auto manifest = nlohmann::json::parse(read_file(run.dir / "manifest.json"));
  const auto& pl = manifest.at("placement");
  const float lo = pl.at("hu_window")[0].get<float>(), hi = pl.at("hu_window")[1].get<float>();
  const double min_frac = pl.at("min_soft_fraction").get<double>();
  const int margin = pl.at("margin").get<int>();
  const double feather = pl.at("feather_mm").get<double>();
  const auto lesions = read_lesions(run.dir, manifest);

  int bad_region = 0, bad_window = 0, bad_fraction = 0, overlap = 0, ball_blocked = 0, stray = 0, bad_hu = 0;
  std::size_t checked = 0;
  for (const auto& b : manifest.at("backgrounds")) {
    const std::string id = b.at("id").get<std::string>();
    const Volume ct = load_volume(run.dir / b.at("ct").get<std::string>());
    const Mask region = load_mask(run.dir / b.at("region").get<std::string>());
    const Volume out = load_volume(run.dir / b.at("volume").get<std::string>());
    const Dims& d = ct.dims();
    const Spacing& s = ct.spacing();
    Mask blocked(d, s);   // earlier lesions grown by the margin
    Mask lesion_union(d, s);
    for (const auto& l : lesions) {
      if (l.background != id) continue;
      ++checked;
      if (!region.at(l.center)) ++bad_region;
      // soft-tissue share of the probe ball, in-bounds voxels only
      std::size_t total = 0, soft = 0;
      bool hit = false;
      const Mask ball = oracle::ball_mask(d, s, l.center.i * s.sx, l.center.j * s.sy, l.center.k * s.sz,
                                          l.probe_radius_mm);
      for (std::size_t n = 0; n < ball.size(); ++n) {
        if (!ball.values()[n]) continue;
        ++total;
        soft += ct.values()[n] >= lo && ct.values()[n] <= hi;
        hit = hit || blocked.values()[n];
      }
      const double frac = static_cast<double>(soft) / static_cast<double>(total);
      if (frac < min_frac) ++bad_window;
      if (std::abs(frac - l.recorded_fraction) > 1e-12) ++bad_fraction;
      if (hit) ++ball_blocked;
      for (const auto& p : l.voxels)
        if (!d.contains(p) || blocked.at(p)) ++overlap;
      for (const auto& p : l.voxels) {
        lesion_union.set(p, true);
        for (std::int64_t dk = -margin; dk <= margin; ++dk)
          for (std::int64_t dj = -margin; dj <= margin; ++dj)
            for (std::int64_t di = -margin; di <= margin; ++di) {
              const Index3 q{p.i + di, p.j + dj, p.k + dk};
              if (di * di + dj * dj + dk * dk <= margin * margin && d.contains(q)) blocked.set(q, true);
            }
      }
    }
    const auto reach = static_cast<std::int64_t>(std::ceil(feather / std::min({s.sx, s.sy, s.sz})));
    for (std::int64_t k = 0; k < d.nz; ++k)
      for (std::int64_t j = 0; j < d.ny; ++j)
        for (std::int64_t i = 0; i < d.nx; ++i) {
          if (lesion_union.at(i, j, k)) {
            if (out.at(i, j, k) < lo || out.at(i, j, k) > hi) ++bad_hu;
            continue;
          }
          if (out.at(i, j, k) == ct.at(i, j, k)) continue;
          bool near = false;
          for (std::int64_t dk = -reach; dk <= reach && !near; ++dk)
            for (std::int64_t dj = -reach; dj <= reach && !near; ++dj)
              for (std::int64_t di = -reach; di <= reach && !near; ++di) {
                const Index3 q{i + di, j + dj, k + dk};
                const double x = di * s.sx, y = dj * s.sy, z = dk * s.sz;
                near = d.contains(q) && lesion_union.at(q) && x * x + y * y + z * z <= feather * feather;
              }
          if (!near) ++stray;
        }
  }
  const bool ok = checked == 500 && !bad_region && !bad_window && !bad_fraction && !overlap && !ball_blocked &&
                  !stray && !bad_hu;
  return {ok, fmt("%zu lesions checked: %d off-region, %d below soft-tissue share, %d fraction mismatches, "
                  "%d overlapping voxels, %d blocked probe balls, %d changes outside feather, %d lesion HU "
                  "outside window",
                  checked, bad_region, bad_window, bad_fraction, overlap, ball_blocked, stray, bad_hu)};
}

// ---------------------------------------------------------------------------

Outcome determinism() {
  const fs::path root = scratch("determinism");
  std::string log_a, log_b;
  const int ra = testing::run_small_pipeline(root / "run_a", 113, log_a);
  const int rb = testing::run_small_pipeline(root / "run_b", 113, log_b);
  if (ra != 0 || rb != 0) return {false, "pipeline failed: " + log_a + log_b};
  int differ = 0;
  std::string which;
  for (const auto& f : testing::pipeline_outputs()) {
    if (read_file(root / "run_a" / f) != read_file(root / "run_b" / f)) {
      ++differ;
      which += " " + f;
    }
  }
  return {differ == 0,
          fmt("%zu outputs compared (manifest, metric reports, checkpoints, volumes), %d differ%s",
              testing::pipeline_outputs().size(), differ, which.c_str())};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"EDT exactness", edt_exactness},
      {"TSDF round-trip", tsdf_round_trip},
      {"codec fidelity", codec_fidelity},
      {"diffusion marginal", diffusion_marginal},
      {"gradient checks", gradient_checks},
      {"training sanity", training_sanity},
      {"adapter benefit", adapter_benefit},
      {"IP/IR exactness", ipr_exactness},
      {"directional ablation", directional_ablation},
      {"distribution rebalancing", distribution_rebalancing},
      {"placement contract", placement_contract},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t n = 0; n < criteria.size(); ++n) {
    Outcome o;
    Stopwatch sw;
    try {
      o = criteria[n].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %2zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", n + 1, criteria[n].first, o.detail.c_str(),
                sw.seconds());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
