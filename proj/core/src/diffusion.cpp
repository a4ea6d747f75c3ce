#include <cmath>
#include <sstream>

#include "lnforge/diffusion.hpp"
#include "lnforge/error.hpp"
#include "lnforge/parallel.hpp"

namespace lnforge {

NoiseDraw draw_noise(Rng& rng, const NoiseSchedule& s, std::size_t dim) {
  NoiseDraw d;
  d.t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(s.steps())));
  d.eps.resize(dim);
  for (double& e : d.eps) e = rng.normal();
  return d;
}

namespace {

// Loss of one example; adds scale * d(loss)/d(params) into grad.
double item_loss(const DenoiserNet& net, const DiffusionExample& ex, const NoiseDraw& draw, const NoiseSchedule& s,
                 double scale, std::span<double> grad) {
  if (ex.z0.size() != net.latent_dim) fail(Errc::dims_mismatch, "z0", "latent size differs from network");
  if (ex.cond.size() != net.cond_dim) fail(Errc::dims_mismatch, "cond", "condition size differs from network");
  const LatentCode zt = forward_sample(LatentCode{ex.z0}, draw.t, draw.eps, s);
  ForwardCache cache;
  std::vector<double> pred(net.latent_dim);
  denoiser_forward(net, denoiser_input(zt.values, draw.t, ex.cond, net.embed_dim), cache, pred);
  double loss = 0.0;
  std::vector<double> g(net.latent_dim);
  for (std::size_t i = 0; i < net.latent_dim; ++i) {
    const double r = pred[i] - draw.eps[i];
    loss += r * r;
    g[i] = 2.0 * r * scale;
  }
  denoiser_backward(net, cache, g, grad);
  return loss;
}

}  // namespace

LossAndGrad diffusion_loss(const DenoiserNet& net, std::span<const DiffusionExample> batch,
                           std::span<const NoiseDraw> draws, const NoiseSchedule& s) {
  if (batch.empty()) fail(Errc::invalid_argument, "batch", "empty batch");
  if (draws.size() != batch.size()) fail(Errc::dims_mismatch, "draws", "one noise draw per example required");
  const double scale = 1.0 / static_cast<double>(batch.size());
  LossAndGrad out;
  out.grad.assign(net.params.size(), 0.0);
  std::vector<double> losses(batch.size());
  if (thread_count() <= 1) {
    for (std::size_t b = 0; b < batch.size(); ++b) losses[b] = item_loss(net, batch[b], draws[b], s, scale, out.grad);
  } else {
    // per-item buffers reduced in index order keep the result thread-count independent
    std::vector<std::vector<double>> grads(batch.size());
    parallel_for(batch.size(), [&](std::size_t b) {
      grads[b].assign(net.params.size(), 0.0);
      losses[b] = item_loss(net, batch[b], draws[b], s, scale, grads[b]);
    });
    for (const auto& g : grads)
      for (std::size_t p = 0; p < g.size(); ++p) out.grad[p] += g[p];
  }
  for (double l : losses) out.loss += l;
  out.loss *= scale;
  return out;
}

LossAndGrad diffusion_loss(const DenoiserNet& net, std::span<const DiffusionExample> batch, const NoiseSchedule& s,
                           Rng& rng) {
  std::vector<NoiseDraw> draws;
  draws.reserve(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) draws.push_back(draw_noise(rng, s, net.latent_dim));
  return diffusion_loss(net, batch, draws, s);
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) fail(Errc::config, "learning_rate", "must be > 0");
  if (steps < 1) fail(Errc::config, "steps", "must be >= 1");
  if (batch_size < 1) fail(Errc::config, "batch_size", "must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) fail(Errc::config, "beta1", "must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) fail(Errc::config, "beta2", "must be in [0, 1)");
  if (!(epsilon > 0.0)) fail(Errc::config, "epsilon", "must be > 0");
  if (!(lambda >= 0.0)) fail(Errc::config, "lambda", "must be >= 0");
}

void adam_update(std::span<double> params, std::span<const double> grad, AdamState& state, const TrainConfig& cfg) {
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
    state.step = 0;
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < params.size(); ++p) {
    state.m[p] = cfg.beta1 * state.m[p] + (1.0 - cfg.beta1) * grad[p];
    state.v[p] = cfg.beta2 * state.v[p] + (1.0 - cfg.beta2) * grad[p] * grad[p];
    const double mhat = state.m[p] / c1;
    const double vhat = state.v[p] / c2;
    params[p] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
  }
}

TrainResult train(DenoiserNet net, std::span<const DiffusionExample> data, const NoiseSchedule& s,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) fail(Errc::invalid_argument, "data", "no training examples");
  Rng rng(cfg.seed);
  AdamState adam;
  TrainResult result;
  result.loss_trace.reserve(static_cast<std::size_t>(cfg.steps));
  std::vector<DiffusionExample> batch(cfg.batch_size);
  std::vector<NoiseDraw> draws(cfg.batch_size);
  for (int step = 0; step < cfg.steps; ++step) {
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      batch[b] = data[rng.below(data.size())];
      draws[b] = draw_noise(rng, s, net.latent_dim);
    }
    const LossAndGrad lg = diffusion_loss(net, batch, draws, s);
    if (!std::isfinite(lg.loss))
      fail(Errc::non_finite_loss, "loss", "diffusion loss became non-finite at step " + std::to_string(step));
    adam_update(net.params, lg.grad, adam, cfg);
    result.loss_trace.push_back(lg.loss);
  }
  result.net = std::move(net);
  return result;
}

LatentCode reverse_sample(const DenoiserNet& net, const NoiseSchedule& s, Rng& rng, std::span<const double> cond) {
  if (cond.size() != net.cond_dim) fail(Errc::dims_mismatch, "cond", "condition size differs from network");
  const std::size_t d = net.latent_dim;
  std::vector<double> z(d);
  for (double& x : z) x = rng.normal();
  ForwardCache cache;
  std::vector<double> eps(d);
  for (int t = s.steps(); t >= 1; --t) {
    denoiser_forward(net, denoiser_input(z, t, cond, net.embed_dim), cache, eps);
    const double coef = s.beta(t) / std::sqrt(1.0 - s.alpha_bar(t));
    const double inv_sqrt_alpha = 1.0 / std::sqrt(s.alpha(t));
    const double sigma = t > 1 ? std::sqrt(s.beta(t)) : 0.0;
    double norm2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      z[i] = inv_sqrt_alpha * (z[i] - coef * eps[i]);
      if (t > 1) z[i] += sigma * rng.normal();
      norm2 += z[i] * z[i];
    }
    if (!std::isfinite(norm2)) {
      std::ostringstream msg;
      msg << "non-finite sampler state at step " << t << " (norm " << std::sqrt(norm2) << ")";
      fail(Errc::sampler_diverged, "z", msg.str());
    }
  }
  return LatentCode{std::move(z)};
}

double latent_rms(std::span<const LatentCode> codes) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& c : codes) {
    for (double v : c.values) s += v * v;
    n += c.dim();
  }
  if (n == 0 || s == 0.0) return 1.0;
  return std::sqrt(s / static_cast<double>(n));
}

LatentTrainResult train_latent_model(std::span<const LatentCode> codes, std::span<const std::vector<double>> conds,
                                     const std::vector<std::size_t>& hidden, const NoiseSchedule& s,
                                     const TrainConfig& cfg) {
  if (codes.empty()) fail(Errc::too_few_samples, "codes", "no training latents");
  if (!conds.empty() && conds.size() != codes.size())
    fail(Errc::dims_mismatch, "cond", "one condition per latent required");
  const std::size_t cond_dim = conds.empty() ? 0 : conds.front().size();

  LatentDiffusionModel model;
  model.schedule = s;
  model.latent_scale = latent_rms(codes);
  if (cond_dim > 0) {
    std::vector<LatentCode> wrapped;
    wrapped.reserve(conds.size());
    for (const auto& c : conds) wrapped.push_back(LatentCode{c});
    model.cond_scale = latent_rms(wrapped);
  }

  std::vector<DiffusionExample> data(codes.size());
  for (std::size_t n = 0; n < codes.size(); ++n) {
    data[n].z0 = codes[n].values;
    for (double& v : data[n].z0) v /= model.latent_scale;
    if (cond_dim > 0) {
      if (conds[n].size() != cond_dim) fail(Errc::dims_mismatch, "cond", "condition sizes differ");
      data[n].cond = conds[n];
      for (double& v : data[n].cond) v /= model.cond_scale;
    }
  }
  Rng init = Rng::derive(cfg.seed, 0x1417);
  TrainResult r = train(make_denoiser(codes.front().dim(), cond_dim, hidden, init), data, s, cfg);
  model.net = std::move(r.net);
  return {std::move(model), std::move(r.loss_trace)};
}

LatentCode sample_latent(const LatentDiffusionModel& model, Rng& rng, std::span<const double> cond) {
  std::vector<double> c(cond.begin(), cond.end());
  for (double& v : c) v /= model.cond_scale;
  LatentCode z = reverse_sample(model.net, model.schedule, rng, c);
  for (double& v : z.values) v *= model.latent_scale;
  return z;
}

}  // namespace lnforge
