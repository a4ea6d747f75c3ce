#include "lnforge/codec.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "lnforge/error.hpp"
#include "lnforge/lnv_io.hpp"
#include "lnforge/rng.hpp"

namespace lnforge {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) s += a[n] * b[n];
  return s;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t n = 0; n < x.size(); ++n) y[n] += alpha * x[n];
}

double normalize(std::span<double> v) {
  const double nrm = std::sqrt(dot(v, v));
  if (nrm > 0.0)
    for (double& x : v) x /= nrm;
  return nrm;
}

// Two rounds of classical Gram-Schmidt against the accepted vectors.
void orthogonalize(std::span<double> v, const std::vector<std::vector<double>>& against) {
  for (int round = 0; round < 2; ++round)
    for (const auto& u : against) axpy(-dot(v, u), u, v);
}

// Symmetric PSD matrix-vector product, row-major n x n.
void symv(const std::vector<double>& a, std::size_t n, std::span<const double> x, std::span<double> y) {
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = a.data() + r * n;
    double s = 0.0;
    for (std::size_t c = 0; c < n; ++c) s += row[c] * x[c];
    y[r] = s;
  }
}

struct EigenPairs {
  std::vector<double> values;
  std::vector<std::vector<double>> vectors;
};

// Deflated power iteration: each eigenvector is iterated while being kept
// orthogonal to the ones already accepted.
EigenPairs top_eigenpairs(const std::vector<double>& a, std::size_t n, std::size_t d, const CodecFitOptions& opt) {
  EigenPairs out;
  Rng rng(0x5eedc0decULL);
  std::vector<double> w(n);
  double scale = 0.0;
  for (std::size_t k = 0; k < std::min(d, n); ++k) {
    std::vector<double> u(n);
    for (double& x : u) x = rng.normal();
    orthogonalize(u, out.vectors);
    if (normalize(u) == 0.0) break;
    double lambda = 0.0;
    double sigma_prev = -1.0;
    for (int it = 0; it < opt.max_iterations; ++it) {
      symv(a, n, u, w);
      orthogonalize(w, out.vectors);
      lambda = std::max(0.0, dot(u, w));  // Rayleigh quotient
      const double nrm = normalize(w);
      if (nrm == 0.0) {
        lambda = 0.0;
        break;
      }
      u.swap(w);
      const double sigma = std::sqrt(lambda);
      const double ref = std::max(scale, sigma);
      if (sigma_prev >= 0.0 && std::abs(sigma - sigma_prev) <= opt.tolerance * std::max(ref, 1e-300)) break;
      sigma_prev = sigma;
    }
    symv(a, n, u, w);
    lambda = std::max(0.0, dot(u, w));
    if (k == 0) scale = std::sqrt(lambda);
    out.values.push_back(lambda);
    out.vectors.push_back(std::move(u));
  }
  return out;
}

}  // namespace

LinearCodec fit_codec(std::span<const Volume> training, std::size_t d, float clip, const CodecFitOptions& opt) {
  if (d == 0) fail(Errc::invalid_argument, "d", "latent dimension must be positive");
  if (training.size() < d + 1)
    fail(Errc::too_few_samples, "training",
         "need at least d+1 = " + std::to_string(d + 1) + " grids, got " + std::to_string(training.size()));
  const Dims dims = training.front().dims();
  for (const auto& v : training)
    if (v.dims() != dims) fail(Errc::dims_mismatch, "training", "training grids have inconsistent dims");

  const std::size_t n = training.size();
  const std::size_t vox = dims.count();
  if (d > vox) fail(Errc::invalid_argument, "d", "latent dimension exceeds voxel count");

  std::vector<double> mean(vox, 0.0);
  for (const auto& v : training)
    for (std::size_t p = 0; p < vox; ++p) mean[p] += v.values()[p];
  for (double& m : mean) m /= static_cast<double>(n);

  LinearCodec c;
  c.grid_dims = dims;
  c.spacing = training.front().spacing();
  c.unit = training.front().unit();
  c.clip = clip;
  c.mean.assign(mean.begin(), mean.end());

  // centre against the stored f32 mean so encode(mean grid) is exactly zero
  std::vector<double> x(n * vox);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t p = 0; p < vox; ++p)
      x[r * vox + p] = static_cast<double>(training[r].values()[p]) - static_cast<double>(c.mean[p]);

  std::vector<std::vector<double>> rows;
  std::vector<double> sigmas;
  if (n <= vox) {
    // Gram route: eigenvectors u of X X^T give v = X^T u / sigma
    std::vector<double> gram(n * n);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a; b < n; ++b) {
        const double g = dot(std::span<const double>(x).subspan(a * vox, vox), std::span<const double>(x).subspan(b * vox, vox));
        gram[a * n + b] = g;
        gram[b * n + a] = g;
      }
    const auto eig = top_eigenpairs(gram, n, d, opt);
    const double sigma1 = eig.values.empty() ? 0.0 : std::sqrt(eig.values.front());
    for (std::size_t k = 0; k < eig.values.size(); ++k) {
      const double sigma = std::sqrt(eig.values[k]);
      if (sigma <= 1e-10 * sigma1 || sigma == 0.0) break;
      std::vector<double> v(vox, 0.0);
      for (std::size_t r = 0; r < n; ++r) axpy(eig.vectors[k][r], std::span<const double>(x).subspan(r * vox, vox), v);
      orthogonalize(v, rows);
      if (normalize(v) == 0.0) break;
      rows.push_back(std::move(v));
      sigmas.push_back(sigma);
    }
  } else {
    std::vector<double> cov(vox * vox, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      const double* xr = x.data() + r * vox;
      for (std::size_t a = 0; a < vox; ++a)
        for (std::size_t b = 0; b < vox; ++b) cov[a * vox + b] += xr[a] * xr[b];
    }
    const auto eig = top_eigenpairs(cov, vox, d, opt);
    const double sigma1 = eig.values.empty() ? 0.0 : std::sqrt(eig.values.front());
    for (std::size_t k = 0; k < eig.values.size(); ++k) {
      const double sigma = std::sqrt(eig.values[k]);
      if (sigma <= 1e-10 * sigma1 || sigma == 0.0) break;
      std::vector<double> v = eig.vectors[k];
      orthogonalize(v, rows);
      if (normalize(v) == 0.0) break;
      rows.push_back(std::move(v));
      sigmas.push_back(sigma);
    }
  }

  // zero-variance directions: complete the basis with orthonormalised unit vectors
  for (std::size_t p = 0; rows.size() < d && p < vox; ++p) {
    std::vector<double> e(vox, 0.0);
    e[p] = 1.0;
    orthogonalize(e, rows);
    if (normalize(e) < 0.5) continue;
    rows.push_back(std::move(e));
    sigmas.push_back(0.0);
  }

  c.basis.resize(d * vox);
  for (std::size_t k = 0; k < d; ++k)
    std::transform(rows[k].begin(), rows[k].end(), c.basis.begin() + static_cast<std::ptrdiff_t>(k * vox),
                   [](double v) { return static_cast<float>(v); });
  c.singular_values.assign(sigmas.begin(), sigmas.end());
  return c;
}

LinearCodec fit_codec(std::span<const TsdfGrid> training, std::size_t d, const CodecFitOptions& opt) {
  if (training.empty()) fail(Errc::too_few_samples, "training", "no training grids");
  std::vector<Volume> grids;
  grids.reserve(training.size());
  for (const auto& t : training) grids.push_back(t.grid);
  LinearCodec c = fit_codec(grids, d, training.front().tau, opt);
  c.norm_scale = training.front().norm_scale;
  return c;
}

LatentCode encode(const LinearCodec& c, std::span<const float> flat) {
  if (flat.size() != c.voxel_count()) fail(Errc::dims_mismatch, "grid", "grid size differs from codec");
  const std::size_t vox = c.voxel_count();
  std::vector<double> centred(vox);
  for (std::size_t p = 0; p < vox; ++p) centred[p] = static_cast<double>(flat[p]) - static_cast<double>(c.mean[p]);
  LatentCode z{std::vector<double>(c.latent_dim(), 0.0)};
  for (std::size_t k = 0; k < c.latent_dim(); ++k) {
    const auto row = c.row(k);
    double s = 0.0;
    for (std::size_t p = 0; p < vox; ++p) s += static_cast<double>(row[p]) * centred[p];
    z.values[k] = s;
  }
  return z;
}

LatentCode encode(const LinearCodec& c, const Volume& v) {
  if (v.dims() != c.grid_dims) fail(Errc::dims_mismatch, "grid", "grid dims differ from codec dims");
  return encode(c, v.values());
}

LatentCode encode(const LinearCodec& c, const TsdfGrid& t) { return encode(c, t.grid); }

std::vector<double> decode_unclipped(const LinearCodec& c, const LatentCode& z) {
  if (z.dim() != c.latent_dim()) fail(Errc::dims_mismatch, "z", "latent dimension differs from codec");
  std::vector<double> out(c.mean.begin(), c.mean.end());
  for (std::size_t k = 0; k < c.latent_dim(); ++k) {
    const auto row = c.row(k);
    const double zk = z.values[k];
    for (std::size_t p = 0; p < out.size(); ++p) out[p] += static_cast<double>(row[p]) * zk;
  }
  return out;
}

Volume decode_volume(const LinearCodec& c, const LatentCode& z) {
  const auto raw = decode_unclipped(c, z);
  Volume out(c.grid_dims, c.spacing, c.unit);
  for (std::size_t p = 0; p < raw.size(); ++p)
    out.values()[p] = std::clamp(static_cast<float>(raw[p]), -c.clip, c.clip);
  return out;
}

TsdfGrid decode(const LinearCodec& c, const LatentCode& z) {
  Volume v = decode_volume(c, z);
  v.set_unit(Unit::sdf);
  return TsdfGrid{std::move(v), c.clip, c.norm_scale};
}

std::string encode_codec(const LinearCodec& c) {
  ordered_json h;
  h["magic"] = "LNC1";
  h["dims"] = {c.grid_dims.nx, c.grid_dims.ny, c.grid_dims.nz};
  h["spacing"] = {c.spacing.sx, c.spacing.sy, c.spacing.sz};
  h["unit"] = std::string(unit_tag(c.unit));
  h["latent_dim"] = c.latent_dim();
  h["clip"] = c.clip;
  h["norm_scale"] = c.norm_scale;
  h["dtype"] = "f32";
  std::string out = h.dump();
  out.push_back('\n');
  append_f32(out, std::span<const float>(c.mean));
  append_f32(out, std::span<const float>(c.basis));
  append_f32(out, std::span<const float>(c.singular_values));
  return out;
}

LinearCodec decode_codec(std::string_view bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string_view::npos) fail(Errc::malformed_header, "header", "missing header terminator");
  json h;
  try {
    h = json::parse(bytes.substr(0, nl));
    if (h.at("magic") != "LNC1") fail(Errc::malformed_header, "magic", "expected LNC1");
    LinearCodec c;
    const auto& d = h.at("dims");
    c.grid_dims = {d.at(0).get<std::int64_t>(), d.at(1).get<std::int64_t>(), d.at(2).get<std::int64_t>()};
    if (!c.grid_dims.positive()) fail(Errc::invalid_dims, "dims", "dims must be positive");
    const auto& s = h.at("spacing");
    c.spacing = {s.at(0).get<double>(), s.at(1).get<double>(), s.at(2).get<double>()};
    if (!c.spacing.valid()) fail(Errc::non_finite_spacing, "spacing", "invalid spacing");
    c.unit = parse_unit(h.at("unit").get<std::string>());
    c.clip = h.at("clip").get<float>();
    c.norm_scale = h.at("norm_scale").get<double>();
    const auto latent = h.at("latent_dim").get<std::size_t>();
    const std::size_t vox = c.grid_dims.count();
    auto payload = parse_f32(bytes.substr(nl + 1), vox + latent * vox + latent, "payload");
    c.mean.assign(payload.begin(), payload.begin() + static_cast<std::ptrdiff_t>(vox));
    c.basis.assign(payload.begin() + static_cast<std::ptrdiff_t>(vox),
                   payload.begin() + static_cast<std::ptrdiff_t>(vox + latent * vox));
    c.singular_values.assign(payload.begin() + static_cast<std::ptrdiff_t>(vox + latent * vox), payload.end());
    return c;
  } catch (const json::exception& e) {
    fail(Errc::malformed_header, "header", e.what());
  }
}

void save_codec(const LinearCodec& c, const std::filesystem::path& path) { write_file(path, encode_codec(c)); }

LinearCodec load_codec(const std::filesystem::path& path) { return decode_codec(read_file(path)); }

}  // namespace lnforge
