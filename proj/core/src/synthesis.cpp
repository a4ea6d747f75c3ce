#include "lnforge/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lnforge/error.hpp"
#include "lnforge/sdf.hpp"

namespace lnforge {

TsdfGrid generate_shape_tsdf(const ShapeGenerator& g, Rng& rng) {
  const LatentCode z = sample_latent(g.model, rng);
  TsdfGrid t = decode(g.codec, z);
  if (g.adapter) t = apply_adapter(*g.adapter, t);
  return t;
}

TsdfGrid recentre(const TsdfGrid& t) {
  const auto box = bounding_box(tsdf_to_mask(t));
  if (!box) return t;
  const Dims& d = t.dims();
  const Index3 shift{(d.nx - 1) / 2 - (box->lo.i + box->hi.i) / 2, (d.ny - 1) / 2 - (box->lo.j + box->hi.j) / 2,
                     (d.nz - 1) / 2 - (box->lo.k + box->hi.k) / 2};
  if (shift == Index3{}) return t;
  Volume out(d, t.spacing(), Unit::sdf, t.tau);
  for (std::int64_t k = 0; k < d.nz; ++k)
    for (std::int64_t j = 0; j < d.ny; ++j)
      for (std::int64_t i = 0; i < d.nx; ++i) {
        const Index3 src{i - shift.i, j - shift.j, k - shift.k};
        if (d.contains(src)) out.at(i, j, k) = t.grid.at(src);
      }
  return TsdfGrid{std::move(out), t.tau, t.norm_scale};
}

namespace {

// A scaled shape that vanished keeps its most interior voxel.
Mask scaled_mask(const TsdfGrid& scaled) {
  Mask m = tsdf_to_mask(scaled);
  if (m.count() > 0) return m;
  const auto vals = scaled.grid.values();
  const auto best = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
  m.values()[best] = 1;
  return m;
}

}  // namespace

ShapeSample fit_long_axis(const TsdfGrid& shape, double target_mm, int refine_iterations) {
  if (!(target_mm > 0.0)) fail(Errc::invalid_argument, "target_mm", "must be positive");
  const Mask base = tsdf_to_mask(shape);
  if (base.count() == 0) fail(Errc::empty_mask, "shape", "shape has no foreground voxels");
  const double l0 = long_axis_mm(base);

  ShapeSample best{base, {}, l0, l0, 1.0, 1};
  if (l0 == target_mm) return best;

  const double tol = 0.5 * shape.spacing().mean();
  double best_err = std::numeric_limits<double>::infinity();
  double factor = std::clamp(target_mm / l0, 0.05, 20.0);
  bool any = false;
  for (int it = 0; it < std::max(1, refine_iterations); ++it) {
    TsdfGrid scaled;
    try {
      scaled = scale_shape(shape, factor);
    } catch (const Error& e) {
      if (e.code() != Errc::out_of_bounds) throw;
      factor = std::max(0.05, factor * 0.95);
      continue;
    }
    Mask m = scaled_mask(scaled);
    const double l = long_axis_mm(m);
    const double err = std::abs(l - target_mm);
    if (err < best_err) {
      best_err = err;
      best = ShapeSample{std::move(m), {}, l, l0, factor, 1};
      any = true;
    }
    if (err <= tol) break;
    factor = std::clamp(factor * target_mm / l, 0.05, 20.0);
  }
  if (!any) fail(Errc::out_of_bounds, "target_mm", "scaled shape does not fit the patch");
  return best;
}

ShapeSample synth_shape(const ShapeGenerator& g, Rng& rng, double target_mm, const Dims& patch,
                        const ShapeSynthConfig& cfg) {
  const double slack = 2.0 * g.codec.spacing.diagonal();
  std::string reasons;
  auto reject = [&](int attempt, const std::string& why) {
    if (!reasons.empty()) reasons += "; ";
    reasons += "try " + std::to_string(attempt) + ": " + why;
  };
  for (int attempt = 1; attempt <= cfg.max_tries; ++attempt) {
    const TsdfGrid t = generate_shape_tsdf(g, rng);
    const Mask raw = tsdf_to_mask(t);
    if (raw.count() == 0) {
      reject(attempt, "empty");
      continue;
    }
    if (!is_connected6(raw)) {
      reject(attempt, "disconnected");
      continue;
    }
    ShapeSample s;
    try {
      s = fit_long_axis(recentre(pad_tsdf(t, patch)), target_mm, cfg.refine_iterations);
    } catch (const Error& e) {
      reject(attempt, e.what());
      continue;
    }
    if (std::abs(s.long_axis_mm - target_mm) > slack) {
      reject(attempt, "long axis " + std::to_string(s.long_axis_mm) + " mm misses target");
      continue;
    }
    if (!is_connected6(s.mask)) {
      reject(attempt, "disconnected after scaling");
      continue;
    }
    s.tries = attempt;
    s.canonical = raw;
    return s;
  }
  fail(Errc::retries_exhausted, "shape", reasons);
}

std::vector<double> texture_condition(const TextureGenerator& g, const Mask& mask) {
  const LinearCodec& c = g.cond_codec;
  if (!(mask.dims() == c.grid_dims)) fail(Errc::dims_mismatch, "mask", "mask dims differ from the condition codec grid");
  return encode(c, mask_to_tsdf(mask, c.clip, c.norm_scale)).values;
}

Volume synth_texture(const TextureGenerator& g, const Mask& mask, Rng& rng) {
  if (!(mask.dims() == g.patch_dims())) fail(Errc::dims_mismatch, "mask", "mask dims differ from the texture grid");
  const std::vector<double> cond = texture_condition(g, mask);
  const LatentCode z = sample_latent(g.model, rng, cond);
  Volume v = decode_volume(g.texture_codec, z);
  for (float& x : v.values()) x = std::clamp(x, -1.0f, 1.0f);
  v.set_unit(Unit::normalized);
  return v;
}

Index3 patch_corner(const Index3& center, const Dims& size) {
  return {center.i - size.nx / 2, center.j - size.ny / 2, center.k - size.nz / 2};
}

Volume blend(const Volume& ct, const Mask& mask, const Volume& texture, const Index3& center, double feather_mm,
             float hu_lo, float hu_hi) {
  if (!(feather_mm >= 0.0)) fail(Errc::invalid_argument, "feather_mm", "must be non-negative");
  if (!(mask.dims() == texture.dims())) fail(Errc::dims_mismatch, "texture", "texture and mask dims differ");
  if (!mask.spacing().approx_equal(ct.spacing()) || !texture.spacing().approx_equal(ct.spacing()))
    fail(Errc::spacing_mismatch, "patch", "patch spacing differs from the CT volume");
  const Dims& pd = mask.dims();
  const Dims& vd = ct.dims();
  const Index3 corner = patch_corner(center, pd);
  for (std::size_t n = 0; n < mask.size(); ++n) {
    if (!mask.values()[n]) continue;
    const Index3 p = pd.index(n);
    if (!vd.contains({corner.i + p.i, corner.j + p.j, corner.k + p.k}))
      fail(Errc::out_of_bounds, "center", "lesion mask extends outside the volume");
  }

  std::vector<double> dist;
  if (feather_mm > 0.0) {
    const DistanceGrid d = edt_squared_mm(mask);
    dist.resize(d.values.size());
    for (std::size_t n = 0; n < dist.size(); ++n) dist[n] = std::sqrt(d.values[n]);
  }

  Volume out = ct;
  for (std::size_t n = 0; n < mask.size(); ++n) {
    double w;
    if (mask.values()[n]) w = 1.0;
    else if (feather_mm > 0.0) w = std::clamp(1.0 - dist[n] / feather_mm, 0.0, 1.0);
    else w = 0.0;
    if (w <= 0.0) continue;
    const Index3 p = pd.index(n);
    const Index3 q{corner.i + p.i, corner.j + p.j, corner.k + p.k};
    if (!vd.contains(q)) continue;
    const double hu = denormalize_value(texture.values()[n], hu_lo, hu_hi);
    float& dst = out.at(q);
    dst = w == 1.0 ? static_cast<float>(hu) : static_cast<float>(w * hu + (1.0 - w) * static_cast<double>(dst));
  }
  return out;
}

}  // namespace lnforge
