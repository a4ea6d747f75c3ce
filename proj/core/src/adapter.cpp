#include "lnforge/adapter.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "lnforge/error.hpp"
#include "lnforge/lnv_io.hpp"
#include "lnforge/parallel.hpp"

namespace lnforge {

using nlohmann::json;
using nlohmann::ordered_json;

AdapterNet make_adapter(float tau, Rng& rng, int channels) {
  AdapterNet a = identity_adapter(tau, channels);
  const double sd = 1.0 / std::sqrt(static_cast<double>(AdapterNet::kTaps));
  for (std::size_t p = a.w1(); p < a.b1(); ++p) a.params[p] = sd * rng.normal();
  return a;
}

AdapterNet identity_adapter(float tau, int channels) {
  if (!(tau > 0.0f)) fail(Errc::invalid_argument, "tau", "tau must be positive");
  if (channels < 1) fail(Errc::invalid_argument, "channels", "need at least one channel");
  AdapterNet a;
  a.channels = channels;
  a.tau = tau;
  a.params.assign(a.param_count(), 0.0);
  return a;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Clamped 27-neighbourhood of every voxel, x-fastest tap order.
std::vector<std::uint32_t> neighbour_table(const Dims& d) {
  std::vector<std::uint32_t> table(d.count() * AdapterNet::kTaps);
  std::size_t n = 0;
  for (std::int64_t k = 0; k < d.nz; ++k)
    for (std::int64_t j = 0; j < d.ny; ++j)
      for (std::int64_t i = 0; i < d.nx; ++i)
        for (int dk = -1; dk <= 1; ++dk)
          for (int dj = -1; dj <= 1; ++dj)
            for (int di = -1; di <= 1; ++di) {
              const auto ii = std::clamp<std::int64_t>(i + di, 0, d.nx - 1);
              const auto jj = std::clamp<std::int64_t>(j + dj, 0, d.ny - 1);
              const auto kk = std::clamp<std::int64_t>(k + dk, 0, d.nz - 1);
              table[n++] = static_cast<std::uint32_t>(d.offset(ii, jj, kk));
            }
  return table;
}

struct Activations {
  std::vector<std::uint32_t> nbr;
  std::vector<double> x;    // input / tau
  std::vector<double> pre;  // channels x V
  std::vector<double> h;    // channels x V
  std::vector<double> y;    // pre-clamp output
};

Activations forward(const AdapterNet& a, const TsdfGrid& t) {
  const std::size_t vox = t.dims().count();
  const auto ch = static_cast<std::size_t>(a.channels);
  Activations act;
  act.nbr = neighbour_table(t.dims());
  act.x.resize(vox);
  const double tau = a.tau;
  for (std::size_t v = 0; v < vox; ++v) act.x[v] = t.grid.values()[v] / tau;
  act.pre.assign(ch * vox, 0.0);
  act.h.assign(ch * vox, 0.0);
  const double* w1 = a.params.data() + a.w1();
  const double* b1 = a.params.data() + a.b1();
  for (std::size_t c = 0; c < ch; ++c) {
    const double* wc = w1 + c * AdapterNet::kTaps;
    for (std::size_t v = 0; v < vox; ++v) {
      const std::uint32_t* nb = act.nbr.data() + v * AdapterNet::kTaps;
      double s = b1[c];
      for (int o = 0; o < AdapterNet::kTaps; ++o) s += wc[o] * act.x[nb[o]];
      act.pre[c * vox + v] = s;
      act.h[c * vox + v] = s * sigmoid(s);
    }
  }
  const double* w2 = a.params.data() + a.w2();
  const double b2 = a.params[a.b2()];
  act.y.assign(vox, 0.0);
  for (std::size_t v = 0; v < vox; ++v) {
    const std::uint32_t* nb = act.nbr.data() + v * AdapterNet::kTaps;
    double r = b2;
    for (std::size_t c = 0; c < ch; ++c) {
      const double* wc = w2 + c * AdapterNet::kTaps;
      const double* hc = act.h.data() + c * vox;
      for (int o = 0; o < AdapterNet::kTaps; ++o) r += wc[o] * hc[nb[o]];
    }
    act.y[v] = static_cast<double>(t.grid.values()[v]) + tau * r;
  }
  return act;
}

}  // namespace

TsdfGrid apply_adapter(const AdapterNet& a, const TsdfGrid& t) {
  const Activations act = forward(a, t);
  Volume out(t.dims(), t.spacing(), Unit::sdf);
  for (std::size_t v = 0; v < act.y.size(); ++v)
    out.values()[v] = std::clamp(static_cast<float>(act.y[v]), -a.tau, a.tau);
  return TsdfGrid{std::move(out), a.tau, t.norm_scale};
}

LossAndGrad adapter_loss(const TsdfGrid& target, const TsdfGrid& noisy, const AdapterNet& a, AdapterNorm norm) {
  if (target.dims() != noisy.dims()) fail(Errc::dims_mismatch, "noisy", "target and noisy grids differ in dims");
  const Activations act = forward(a, noisy);
  const std::size_t vox = act.y.size();
  const auto ch = static_cast<std::size_t>(a.channels);
  const double tau = a.tau;
  const double inv_n = 1.0 / static_cast<double>(vox);

  LossAndGrad out;
  out.grad.assign(a.params.size(), 0.0);
  std::vector<double> dr(vox, 0.0);  // d loss / d residual
  for (std::size_t v = 0; v < vox; ++v) {
    const double y = act.y[v];
    const double clamped = std::clamp(y, -tau, tau);
    const double diff = clamped - static_cast<double>(target.grid.values()[v]);
    double dout;
    if (norm == AdapterNorm::l1) {
      out.loss += std::abs(diff);
      dout = diff > 0 ? inv_n : (diff < 0 ? -inv_n : 0.0);
    } else {
      out.loss += diff * diff;
      dout = 2.0 * diff * inv_n;
    }
    const bool inside = y > -tau && y < tau;
    dr[v] = inside ? dout * tau : 0.0;
  }
  out.loss *= inv_n;

  const double* w2 = a.params.data() + a.w2();
  double* gw1 = out.grad.data() + a.w1();
  double* gb1 = out.grad.data() + a.b1();
  double* gw2 = out.grad.data() + a.w2();
  double& gb2 = out.grad[a.b2()];
  std::vector<double> dh(ch * vox, 0.0);
  for (std::size_t v = 0; v < vox; ++v) {
    const double d = dr[v];
    if (d == 0.0) continue;
    gb2 += d;
    const std::uint32_t* nb = act.nbr.data() + v * AdapterNet::kTaps;
    for (std::size_t c = 0; c < ch; ++c) {
      const double* hc = act.h.data() + c * vox;
      const double* wc = w2 + c * AdapterNet::kTaps;
      double* gwc = gw2 + c * AdapterNet::kTaps;
      double* dhc = dh.data() + c * vox;
      for (int o = 0; o < AdapterNet::kTaps; ++o) {
        gwc[o] += d * hc[nb[o]];
        dhc[nb[o]] += d * wc[o];
      }
    }
  }
  for (std::size_t c = 0; c < ch; ++c) {
    double* gwc = gw1 + c * AdapterNet::kTaps;
    for (std::size_t v = 0; v < vox; ++v) {
      const double z = act.pre[c * vox + v];
      const double s = sigmoid(z);
      const double dz = dh[c * vox + v] * s * (1.0 + z * (1.0 - s));
      if (dz == 0.0) continue;
      gb1[c] += dz;
      const std::uint32_t* nb = act.nbr.data() + v * AdapterNet::kTaps;
      for (int o = 0; o < AdapterNet::kTaps; ++o) gwc[o] += dz * act.x[nb[o]];
    }
  }
  return out;
}

TsdfGrid make_noisy_recon(const TsdfGrid& target, const LinearCodec& codec, double sigma, Rng& rng) {
  if (!(sigma >= 0.0)) fail(Errc::invalid_argument, "sigma", "noise scale must be >= 0");
  LatentCode z = encode(codec, target);
  for (double& v : z.values) v += sigma * rng.normal();
  return decode(codec, z);
}

double latent_noise_sigma(std::span<const LatentCode> codes, double factor) {
  if (codes.size() < 2) fail(Errc::too_few_samples, "codes", "need at least two latent codes");
  const std::size_t d = codes.front().dim();
  double pooled = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    double mean = 0.0;
    for (const auto& c : codes) mean += c.values[k];
    mean /= static_cast<double>(codes.size());
    double var = 0.0;
    for (const auto& c : codes) var += (c.values[k] - mean) * (c.values[k] - mean);
    pooled += var / static_cast<double>(codes.size() - 1);
  }
  return factor * std::sqrt(pooled / static_cast<double>(d));
}

double mean_adapter_loss(std::span<const AdapterPair> pairs, const AdapterNet& a, AdapterNorm norm) {
  if (pairs.empty()) fail(Errc::invalid_argument, "pairs", "no pairs");
  std::vector<double> losses(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t n) {
    const TsdfGrid refined = apply_adapter(a, pairs[n].noisy);
    double s = 0.0;
    for (std::size_t v = 0; v < refined.grid.size(); ++v) {
      const double diff = static_cast<double>(refined.grid.values()[v]) - pairs[n].target.grid.values()[v];
      s += norm == AdapterNorm::l1 ? std::abs(diff) : diff * diff;
    }
    losses[n] = s / static_cast<double>(refined.grid.size());
  });
  double total = 0.0;
  for (double l : losses) total += l;
  return total / static_cast<double>(pairs.size());
}

std::vector<AdapterPair> make_adapter_pairs(std::span<const TsdfGrid> targets, const LinearCodec& codec, double sigma,
                                            std::uint64_t seed, int per_target) {
  std::vector<AdapterPair> pairs;
  pairs.reserve(targets.size() * static_cast<std::size_t>(std::max(per_target, 0)));
  for (std::size_t n = 0; n < targets.size(); ++n)
    for (int r = 0; r < per_target; ++r) {
      Rng rng = Rng::derive(seed, n * static_cast<std::size_t>(per_target) + static_cast<std::size_t>(r));
      pairs.push_back({targets[n], make_noisy_recon(targets[n], codec, sigma, rng)});
    }
  return pairs;
}

AdapterTrainResult train_adapter(AdapterNet a, std::span<const AdapterPair> pairs, const TrainConfig& cfg,
                                 double final_diffusion_loss, AdapterNorm norm) {
  cfg.validate();
  if (pairs.empty()) fail(Errc::invalid_argument, "pairs", "no training pairs");
  Rng rng(cfg.seed);
  AdamState adam;
  AdapterTrainResult result;
  const double scale = 1.0 / static_cast<double>(cfg.batch_size);
  std::vector<std::size_t> picks(cfg.batch_size);
  std::vector<LossAndGrad> parts(cfg.batch_size);
  for (int step = 0; step < cfg.steps; ++step) {
    for (auto& p : picks) p = rng.below(pairs.size());
    parallel_for(picks.size(), [&](std::size_t b) { parts[b] = adapter_loss(pairs[picks[b]].target, pairs[picks[b]].noisy, a, norm); });
    std::vector<double> grad(a.params.size(), 0.0);
    double loss = 0.0;
    for (const auto& part : parts) {
      loss += part.loss * scale;
      for (std::size_t p = 0; p < grad.size(); ++p) grad[p] += part.grad[p] * scale;
    }
    if (!std::isfinite(loss))
      fail(Errc::non_finite_loss, "loss", "adapter loss became non-finite at step " + std::to_string(step));
    adam_update(a.params, grad, adam, cfg);
    result.loss_trace.push_back(loss);
  }
  result.final_adapter_loss = mean_adapter_loss(pairs, a, norm);
  result.total_loss = final_diffusion_loss + cfg.lambda * result.final_adapter_loss;
  result.net = std::move(a);
  return result;
}

std::string encode_adapter(const AdapterNet& a) {
  ordered_json h;
  h["magic"] = "LNA1";
  h["kernel"] = 3;
  h["channels"] = a.channels;
  h["tau"] = a.tau;
  h["activation"] = "silu";
  h["dtype"] = "f32";
  std::string out = h.dump();
  out.push_back('\n');
  append_f32(out, std::span<const double>(a.params));
  return out;
}

AdapterNet decode_adapter(std::string_view bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string_view::npos) fail(Errc::malformed_header, "header", "missing header terminator");
  try {
    const json h = json::parse(bytes.substr(0, nl));
    if (h.at("magic") != "LNA1") fail(Errc::malformed_header, "magic", "expected LNA1");
    if (h.at("kernel").get<int>() != 3) fail(Errc::malformed_header, "kernel", "only 3x3x3 kernels are supported");
    AdapterNet a = identity_adapter(h.at("tau").get<float>(), h.at("channels").get<int>());
    const auto vals = parse_f32(bytes.substr(nl + 1), a.param_count(), "payload");
    a.params.assign(vals.begin(), vals.end());
    return a;
  } catch (const json::exception& e) {
    fail(Errc::malformed_header, "header", e.what());
  }
}

void save_adapter(const AdapterNet& a, const std::filesystem::path& path) { write_file(path, encode_adapter(a)); }

AdapterNet load_adapter(const std::filesystem::path& path) { return decode_adapter(read_file(path)); }

}  // namespace lnforge
