#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "lnforge/diffusion.hpp"
#include "lnforge/lnv_io.hpp"
#include "test_util.hpp"

namespace lnforge {
namespace {

using testing::code_of;

TEST(Schedule, LinearBetasAndCumulativeProduct) {
  const NoiseSchedule s = make_schedule(200, 1e-4, 0.02);
  EXPECT_EQ(s.steps(), 200);
  EXPECT_DOUBLE_EQ(s.beta(1), 1e-4);
  EXPECT_DOUBLE_EQ(s.beta(200), 0.02);
  EXPECT_NEAR(s.beta(100), 1e-4 + (0.02 - 1e-4) * 99.0 / 199.0, 1e-15);
  double prod = 1.0;
  for (int t = 1; t <= 200; ++t) {
    prod *= 1.0 - s.beta(t);
    ASSERT_NEAR(s.alpha_bar(t), prod, 1e-14);
    ASSERT_DOUBLE_EQ(s.alpha(t), 1.0 - s.beta(t));
  }
  EXPECT_EQ(code_of([] { make_schedule(1, 1e-4, 0.02); }), Errc::invalid_argument);
  EXPECT_EQ(code_of([] { make_schedule(10, 0.02, 1e-4); }), Errc::invalid_argument);
}

TEST(Forward, ClosedFormValues) {
  const NoiseSchedule s = make_schedule(10, 1e-3, 0.2);
  const LatentCode z0{{1.0, -2.0}};
  const std::vector<double> eps{0.5, 0.25};
  const LatentCode zt = forward_sample(z0, 7, eps, s);
  const double a = s.alpha_bar(7);
  EXPECT_DOUBLE_EQ(zt.values[0], std::sqrt(a) * 1.0 + std::sqrt(1 - a) * 0.5);
  EXPECT_DOUBLE_EQ(zt.values[1], std::sqrt(a) * -2.0 + std::sqrt(1 - a) * 0.25);
  const LatentCode z1 = forward_step(z0, 3, eps, s);
  EXPECT_DOUBLE_EQ(z1.values[0], std::sqrt(1 - s.beta(3)) + std::sqrt(s.beta(3)) * 0.5);
  EXPECT_EQ(code_of([&] { forward_sample(z0, 0, eps, s); }), Errc::out_of_bounds);
  EXPECT_EQ(code_of([&] { forward_sample(z0, 11, eps, s); }), Errc::out_of_bounds);
}

TEST(Forward, MarginalMatchesIteratedChainSmall) {
  const NoiseSchedule s = make_schedule(20, 1e-3, 0.1);
  Rng rng(5);
  const int n = 20000;
  const int t = 20;
  double m1 = 0, v1 = 0, m2 = 0, v2 = 0;
  for (int r = 0; r < n; ++r) {
    LatentCode z{{1.5}};
    for (int k = 1; k <= t; ++k) z = forward_step(z, k, std::vector<double>{rng.normal()}, s);
    const LatentCode c = forward_sample(LatentCode{{1.5}}, t, std::vector<double>{rng.normal()}, s);
    m1 += z.values[0];
    v1 += z.values[0] * z.values[0];
    m2 += c.values[0];
    v2 += c.values[0] * c.values[0];
  }
  m1 /= n;
  m2 /= n;
  v1 = v1 / n - m1 * m1;
  v2 = v2 / n - m2 * m2;
  EXPECT_NEAR(m1, m2, 4 * std::sqrt((v1 + v2) / n));
  EXPECT_NEAR(v1, 1 - s.alpha_bar(t), 4 * v1 * std::sqrt(2.0 / n));
}

TEST(TimeEmbedding, SinesThenCosines) {
  const auto e = time_embedding(37);
  ASSERT_EQ(e.size(), kTimeEmbedDim);
  for (std::size_t k = 0; k < 8; ++k) {
    const double f = std::exp(-std::log(1000.0) * static_cast<double>(k) / 8.0);
    EXPECT_NEAR(e[k], std::sin(37.0 * f), 1e-12);
    EXPECT_NEAR(e[8 + k], std::cos(37.0 * f), 1e-12);
  }
}

double weighted_output(const DenoiserNet& net, std::span<const double> in, std::span<const double> w) {
  ForwardCache cache;
  std::vector<double> out(net.latent_dim);
  denoiser_forward(net, in, cache, out);
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += w[i] * out[i];
  return s;
}

TEST(Denoiser, BackpropMatchesFiniteDifferences) {
  Rng rng(21);
  DenoiserNet net = make_denoiser(3, 2, {6, 5}, rng);
  for (double& p : net.params) p += 0.1 * rng.normal();
  const auto in = denoiser_input(std::vector<double>{0.3, -0.7, 1.1}, 17, std::vector<double>{0.4, -0.2});
  const std::vector<double> w{0.9, -1.3, 0.4};
  ForwardCache cache;
  std::vector<double> out(3), grad(net.params.size(), 0.0);
  denoiser_forward(net, in, cache, out);
  denoiser_backward(net, cache, w, grad);
  const double h = 1e-6;
  for (std::size_t p = 0; p < net.params.size(); ++p) {
    DenoiserNet a = net, b = net;
    a.params[p] += h;
    b.params[p] -= h;
    const double fd = (weighted_output(a, in, w) - weighted_output(b, in, w)) / (2 * h);
    const double denom = std::max(std::abs(fd) + std::abs(grad[p]), 1e-7);
    ASSERT_LE(std::abs(fd - grad[p]) / denom, 1e-3) << "param " << p;
  }
}

TEST(Denoiser, LossGradientMatchesFiniteDifferences) {
  Rng rng(22);
  DenoiserNet net = make_denoiser(4, 0, {7}, rng);
  const NoiseSchedule s = make_schedule(50, 1e-4, 0.02);
  std::vector<DiffusionExample> batch(3);
  std::vector<NoiseDraw> draws;
  for (auto& ex : batch) {
    ex.z0 = {rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    draws.push_back(draw_noise(rng, s, 4));
  }
  const LossAndGrad lg = diffusion_loss(net, batch, draws, s);
  const double h = 1e-6;
  for (std::size_t p = 0; p < net.params.size(); ++p) {
    DenoiserNet a = net, b = net;
    a.params[p] += h;
    b.params[p] -= h;
    const double fd = (diffusion_loss(a, batch, draws, s).loss - diffusion_loss(b, batch, draws, s).loss) / (2 * h);
    const double denom = std::max(std::abs(fd) + std::abs(lg.grad[p]), 1e-7);
    ASSERT_LE(std::abs(fd - lg.grad[p]) / denom, 1e-3) << "param " << p;
  }
}

TEST(Adam, MinimizesQuadratic) {
  std::vector<double> x{3.0, -2.0};
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  AdamState st;
  for (int i = 0; i < 2000; ++i) {
    const std::vector<double> g{2 * (x[0] - 1.0), 2 * (x[1] + 0.5)};
    adam_update(x, g, st, cfg);
  }
  EXPECT_NEAR(x[0], 1.0, 1e-3);
  EXPECT_NEAR(x[1], -0.5, 1e-3);
  EXPECT_EQ(st.step, 2000);
}

TEST(Training, LossDropsAndIsDeterministic) {
  Rng rng(31);
  std::vector<LatentCode> codes;
  for (int n = 0; n < 64; ++n) {
    const double a = rng.uniform(-1, 1);
    codes.push_back(LatentCode{{a, 2 * a, -a, 0.5}});
  }
  TrainConfig cfg;
  cfg.steps = 400;
  cfg.batch_size = 16;
  cfg.seed = 4;
  const NoiseSchedule s = make_schedule(50, 1e-4, 0.05);
  const auto r1 = train_latent_model(codes, {}, {32}, s, cfg);
  const auto r2 = train_latent_model(codes, {}, {32}, s, cfg);
  EXPECT_EQ(r1.model.net.params, r2.model.net.params);
  double first = 0, last = 0;
  for (int i = 0; i < 20; ++i) first += r1.loss_trace[static_cast<std::size_t>(i)];
  for (int i = 380; i < 400; ++i) last += r1.loss_trace[static_cast<std::size_t>(i)];
  EXPECT_LT(last, 0.5 * first);
  EXPECT_NEAR(r1.model.latent_scale, latent_rms(codes), 1e-15);
}

TEST(Training, NonFiniteLossIsReported) {
  Rng rng(1);
  std::vector<DiffusionExample> data{{{std::nan(""), 0.0}, {}}};
  TrainConfig cfg;
  cfg.steps = 2;
  cfg.batch_size = 1;
  EXPECT_EQ(code_of([&] { train(make_denoiser(2, 0, {4}, rng), data, make_schedule(10, 1e-4, 0.02), cfg); }),
            Errc::non_finite_loss);
}

TEST(Sampler, DeterministicUnderSeedAndChecksCondition) {
  Rng init(8);
  const DenoiserNet net = make_denoiser(5, 3, {8}, init);
  const NoiseSchedule s = make_schedule(30, 1e-4, 0.02);
  Rng a(99), b(99);
  const std::vector<double> cond{0.1, 0.2, 0.3};
  EXPECT_EQ(reverse_sample(net, s, a, cond).values, reverse_sample(net, s, b, cond).values);
  Rng c(99);
  EXPECT_EQ(code_of([&] { reverse_sample(net, s, c, {}); }), Errc::dims_mismatch);
}

TEST(Sampler, DivergenceIsReported) {
  Rng init(8);
  DenoiserNet net = make_denoiser(2, 0, {4}, init);
  for (double& p : net.params) p = 1e300;
  Rng rng(1);
  EXPECT_EQ(code_of([&] { reverse_sample(net, make_schedule(10, 1e-4, 0.02), rng); }), Errc::sampler_diverged);
}

TEST(Checkpoint, RoundTripPreservesSampling) {
  Rng init(3);
  LatentDiffusionModel m;
  m.net = make_denoiser(4, 2, {6, 6}, init);
  m.schedule = make_schedule(25, 1e-4, 0.02);
  m.latent_scale = 0.37;
  m.cond_scale = 1.9;
  const auto dir = testing::temp_dir("ddpm");
  save_ddpm(m, dir / "m.ddpm");
  const LatentDiffusionModel l = load_ddpm(dir / "m.ddpm");
  // parameters are stored in f32
  for (std::size_t p = 0; p < m.net.params.size(); ++p)
    ASSERT_EQ(l.net.params[p], static_cast<double>(static_cast<float>(m.net.params[p])));
  EXPECT_EQ(l.schedule.steps(), 25);
  EXPECT_EQ(l.latent_scale, m.latent_scale);
  EXPECT_EQ(l.cond_scale, m.cond_scale);
  save_ddpm(l, dir / "l.ddpm");
  EXPECT_EQ(read_file(dir / "m.ddpm"), read_file(dir / "l.ddpm"));
}

}  // namespace
}  // namespace lnforge
