#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "lnforge/diffusion.hpp"
#include "lnforge/error.hpp"
#include "lnforge/lnv_io.hpp"

namespace lnforge {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double silu(double x) { return x * sigmoid(x); }
double silu_grad(double x) {
  const double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

std::size_t param_count(const std::vector<std::size_t>& layers) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) n += layers[l + 1] * layers[l] + layers[l + 1];
  return n;
}

}  // namespace

std::size_t DenoiserNet::weight_offset(std::size_t layer) const {
  std::size_t off = 0;
  for (std::size_t l = 0; l < layer; ++l) off += layers[l + 1] * layers[l] + layers[l + 1];
  return off;
}

std::size_t DenoiserNet::bias_offset(std::size_t layer) const {
  return weight_offset(layer) + layers[layer + 1] * layers[layer];
}

DenoiserNet make_denoiser(std::size_t latent_dim, std::size_t cond_dim, const std::vector<std::size_t>& hidden,
                          Rng& rng) {
  if (latent_dim == 0) fail(Errc::invalid_argument, "latent_dim", "latent dimension must be positive");
  DenoiserNet net;
  net.latent_dim = latent_dim;
  net.cond_dim = cond_dim;
  net.layers.push_back(net.input_dim());
  for (std::size_t h : hidden) {
    if (h == 0) fail(Errc::invalid_argument, "hidden", "hidden width must be positive");
    net.layers.push_back(h);
  }
  net.layers.push_back(latent_dim);
  net.params.assign(param_count(net.layers), 0.0);
  for (std::size_t l = 0; l + 1 < net.layers.size(); ++l) {
    const double sd = 1.0 / std::sqrt(static_cast<double>(net.layers[l]));
    const std::size_t w0 = net.weight_offset(l);
    for (std::size_t n = 0; n < net.layers[l + 1] * net.layers[l]; ++n) net.params[w0 + n] = sd * rng.normal();
  }
  return net;
}

void denoiser_forward(const DenoiserNet& net, std::span<const double> input, ForwardCache& cache,
                      std::span<double> out) {
  const std::size_t nl = net.layers.size() - 1;
  if (input.size() != net.layers.front()) fail(Errc::dims_mismatch, "input", "denoiser input size mismatch");
  cache.inputs.resize(nl);
  cache.pre.resize(nl);
  cache.inputs[0].assign(input.begin(), input.end());
  for (std::size_t l = 0; l < nl; ++l) {
    const std::size_t in = net.layers[l], outn = net.layers[l + 1];
    const double* w = net.params.data() + net.weight_offset(l);
    const double* b = net.params.data() + net.bias_offset(l);
    const std::vector<double>& x = cache.inputs[l];
    std::vector<double>& z = cache.pre[l];
    z.resize(outn);
    for (std::size_t o = 0; o < outn; ++o) {
      const double* row = w + o * in;
      double s = b[o];
      for (std::size_t i = 0; i < in; ++i) s += row[i] * x[i];
      z[o] = s;
    }
    if (l + 1 < nl) {
      auto& next = cache.inputs[l + 1];
      next.resize(outn);
      for (std::size_t o = 0; o < outn; ++o) next[o] = silu(z[o]);
    }
  }
  const auto& last = cache.pre.back();
  std::copy(last.begin(), last.end(), out.begin());
}

void denoiser_backward(const DenoiserNet& net, const ForwardCache& cache, std::span<const double> grad_out,
                       std::span<double> grad) {
  const std::size_t nl = net.layers.size() - 1;
  std::vector<double> delta(grad_out.begin(), grad_out.end());
  std::vector<double> prev;
  for (std::size_t l = nl; l-- > 0;) {
    const std::size_t in = net.layers[l], outn = net.layers[l + 1];
    const double* w = net.params.data() + net.weight_offset(l);
    double* gw = grad.data() + net.weight_offset(l);
    double* gb = grad.data() + net.bias_offset(l);
    const std::vector<double>& x = cache.inputs[l];
    for (std::size_t o = 0; o < outn; ++o) {
      const double d = delta[o];
      gb[o] += d;
      double* grow = gw + o * in;
      for (std::size_t i = 0; i < in; ++i) grow[i] += d * x[i];
    }
    if (l == 0) break;
    prev.assign(in, 0.0);
    for (std::size_t o = 0; o < outn; ++o) {
      const double d = delta[o];
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) prev[i] += row[i] * d;
    }
    const std::vector<double>& zprev = cache.pre[l - 1];
    for (std::size_t i = 0; i < in; ++i) prev[i] *= silu_grad(zprev[i]);
    delta.swap(prev);
  }
}

std::vector<double> time_embedding(int t, std::size_t dim) {
  const std::size_t half = dim / 2;
  std::vector<double> e(dim, 0.0);
  for (std::size_t k = 0; k < half; ++k) {
    const double freq = std::exp(-std::log(1000.0) * static_cast<double>(k) / static_cast<double>(half));
    e[k] = std::sin(static_cast<double>(t) * freq);
    e[half + k] = std::cos(static_cast<double>(t) * freq);
  }
  return e;
}

std::vector<double> denoiser_input(std::span<const double> z_t, int t, std::span<const double> cond,
                                   std::size_t embed_dim) {
  std::vector<double> in;
  in.reserve(z_t.size() + embed_dim + cond.size());
  in.insert(in.end(), z_t.begin(), z_t.end());
  const auto e = time_embedding(t, embed_dim);
  in.insert(in.end(), e.begin(), e.end());
  in.insert(in.end(), cond.begin(), cond.end());
  return in;
}

std::vector<double> predict_noise(const DenoiserNet& net, std::span<const double> z_t, int t,
                                  std::span<const double> cond) {
  if (cond.size() != net.cond_dim) fail(Errc::dims_mismatch, "cond", "condition size differs from network");
  ForwardCache cache;
  std::vector<double> out(net.latent_dim);
  denoiser_forward(net, denoiser_input(z_t, t, cond, net.embed_dim), cache, out);
  return out;
}

std::string encode_ddpm(const LatentDiffusionModel& m) {
  ordered_json h;
  h["magic"] = "LND1";
  h["layers"] = m.net.layers;
  h["activation"] = "silu";
  h["embed_dim"] = m.net.embed_dim;
  h["latent_dim"] = m.net.latent_dim;
  h["cond_dim"] = m.net.cond_dim;
  h["schedule"] = {{"T", m.schedule.steps()},
                   {"beta_start", m.schedule.beta_start()},
                   {"beta_end", m.schedule.beta_end()}};
  h["latent_scale"] = m.latent_scale;
  h["cond_scale"] = m.cond_scale;
  h["dtype"] = "f32";
  std::string out = h.dump();
  out.push_back('\n');
  append_f32(out, std::span<const double>(m.net.params));
  return out;
}

LatentDiffusionModel decode_ddpm(std::string_view bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string_view::npos) fail(Errc::malformed_header, "header", "missing header terminator");
  try {
    const json h = json::parse(bytes.substr(0, nl));
    if (h.at("magic") != "LND1") fail(Errc::malformed_header, "magic", "expected LND1");
    if (h.at("activation") != "silu") fail(Errc::malformed_header, "activation", "unsupported activation");
    LatentDiffusionModel m;
    m.net.layers = h.at("layers").get<std::vector<std::size_t>>();
    m.net.embed_dim = h.at("embed_dim").get<std::size_t>();
    m.net.latent_dim = h.at("latent_dim").get<std::size_t>();
    m.net.cond_dim = h.at("cond_dim").get<std::size_t>();
    if (m.net.layers.size() < 2 || m.net.layers.front() != m.net.input_dim() ||
        m.net.layers.back() != m.net.latent_dim)
      fail(Errc::malformed_header, "layers", "layer sizes inconsistent with dims");
    const auto& s = h.at("schedule");
    m.schedule = make_schedule(s.at("T").get<int>(), s.at("beta_start").get<double>(), s.at("beta_end").get<double>());
    m.latent_scale = h.at("latent_scale").get<double>();
    m.cond_scale = h.at("cond_scale").get<double>();
    const auto vals = parse_f32(bytes.substr(nl + 1), param_count(m.net.layers), "payload");
    m.net.params.assign(vals.begin(), vals.end());
    return m;
  } catch (const json::exception& e) {
    fail(Errc::malformed_header, "header", e.what());
  }
}

void save_ddpm(const LatentDiffusionModel& m, const std::filesystem::path& path) { write_file(path, encode_ddpm(m)); }

LatentDiffusionModel load_ddpm(const std::filesystem::path& path) { return decode_ddpm(read_file(path)); }

}  // namespace lnforge
