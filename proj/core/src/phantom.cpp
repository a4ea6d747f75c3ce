#include "lnforge/phantom.hpp"

#include <algorithm>
#include <cmath>

#include "lnforge/error.hpp"
#include "lnforge/sdf.hpp"
#include "lnforge/synthesis.hpp"

namespace lnforge {

Rotation random_rotation(Rng& rng) {
  double q[4];
  double n2 = 0.0;
  for (double& v : q) {
    v = rng.normal();
    n2 += v * v;
  }
  const double inv = 1.0 / std::sqrt(n2);
  const double w = q[0] * inv, x = q[1] * inv, y = q[2] * inv, z = q[3] * inv;
  return {1 - 2 * (y * y + z * z), 2 * (x * y - z * w),     2 * (x * z + y * w),
          2 * (x * y + z * w),     1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
          2 * (x * z - y * w),     2 * (y * z + x * w),     1 - 2 * (x * x + y * y)};
}

void paint_ellipsoid(Mask& m, std::array<double, 3> centre, std::array<double, 3> semi_axes, const Rotation& rot) {
  const Dims& d = m.dims();
  const double reach = std::max({semi_axes[0], semi_axes[1], semi_axes[2]}) + 1.0;
  const auto lo = [&](double c) { return static_cast<std::int64_t>(std::floor(c - reach)); };
  const auto hi = [&](double c) { return static_cast<std::int64_t>(std::ceil(c + reach)); };
  for (std::int64_t k = std::max<std::int64_t>(0, lo(centre[2])); k <= std::min(d.nz - 1, hi(centre[2])); ++k)
    for (std::int64_t j = std::max<std::int64_t>(0, lo(centre[1])); j <= std::min(d.ny - 1, hi(centre[1])); ++j)
      for (std::int64_t i = std::max<std::int64_t>(0, lo(centre[0])); i <= std::min(d.nx - 1, hi(centre[0])); ++i) {
        const double p[3] = {static_cast<double>(i) - centre[0], static_cast<double>(j) - centre[1],
                             static_cast<double>(k) - centre[2]};
        double s = 0.0;
        for (int a = 0; a < 3; ++a) {
          // body-frame coordinate = R^T p
          const double u = rot[0 * 3 + a] * p[0] + rot[1 * 3 + a] * p[1] + rot[2 * 3 + a] * p[2];
          s += (u * u) / (semi_axes[a] * semi_axes[a]);
        }
        if (s <= 1.0) m.set({i, j, k}, true);
      }
}

Mask make_toy_shape(Rng& rng, const ShapeFamily& family) {
  const Dims& d = family.dims;
  for (int attempt = 0; attempt < 100; ++attempt) {
    Mask m(d, family.spacing);
    const std::array<double, 3> centre{0.5 * static_cast<double>(d.nx - 1) + rng.uniform(-0.5, 0.5),
                                       0.5 * static_cast<double>(d.ny - 1) + rng.uniform(-0.5, 0.5),
                                       0.5 * static_cast<double>(d.nz - 1) + rng.uniform(-0.5, 0.5)};
    std::array<double, 3> axes{};
    for (double& a : axes) a = rng.uniform(family.min_semi_axis, family.max_semi_axis);
    const Rotation rot = random_rotation(rng);
    paint_ellipsoid(m, centre, axes, rot);
    const int lobes = static_cast<int>(rng.below(static_cast<std::uint64_t>(family.max_lobes + 1)));
    for (int l = 0; l < lobes; ++l) {
      // lobe centre inside the main body keeps the union connected
      double dir[3];
      double n2 = 0.0;
      for (double& v : dir) {
        v = rng.normal();
        n2 += v * v;
      }
      const double r = 0.6 / std::sqrt(n2);
      std::array<double, 3> body{dir[0] * r * axes[0], dir[1] * r * axes[1], dir[2] * r * axes[2]};
      std::array<double, 3> c = centre;
      for (int a = 0; a < 3; ++a) c[a] += rot[a * 3 + 0] * body[0] + rot[a * 3 + 1] * body[1] + rot[a * 3 + 2] * body[2];
      std::array<double, 3> lobe_axes{};
      for (int a = 0; a < 3; ++a) lobe_axes[a] = rng.uniform(0.45, 0.7) * axes[a];
      paint_ellipsoid(m, c, lobe_axes, random_rotation(rng));
    }
    auto box = bounding_box(m);
    if (!box || !is_connected6(m)) continue;
    // keep one voxel of background around the shape
    if (box->lo.i < 1 || box->lo.j < 1 || box->lo.k < 1 || box->hi.i > d.nx - 2 || box->hi.j > d.ny - 2 ||
        box->hi.k > d.nz - 2)
      continue;
    return m;
  }
  fail(Errc::retries_exhausted, "shape", "could not draw a connected toy shape");
}

std::vector<Mask> make_toy_family(std::size_t count, std::uint64_t seed, const ShapeFamily& family) {
  std::vector<Mask> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    Rng rng = Rng::derive(seed, n);
    out.push_back(make_toy_shape(rng, family));
  }
  return out;
}

namespace {

struct Blob {
  std::array<double, 3> centre;
  double sigma;
  double amplitude;
};

// Smooth low-frequency field from a handful of Gaussian bumps.
void add_blobs(Volume& v, const std::vector<Blob>& blobs) {
  const Dims& d = v.dims();
  const Spacing& s = v.spacing();
  for (std::int64_t k = 0; k < d.nz; ++k)
    for (std::int64_t j = 0; j < d.ny; ++j)
      for (std::int64_t i = 0; i < d.nx; ++i) {
        double acc = 0.0;
        for (const auto& b : blobs) {
          const double dx = static_cast<double>(i) * s.sx - b.centre[0];
          const double dy = static_cast<double>(j) * s.sy - b.centre[1];
          const double dz = static_cast<double>(k) * s.sz - b.centre[2];
          acc += b.amplitude * std::exp(-(dx * dx + dy * dy + dz * dz) / (2.0 * b.sigma * b.sigma));
        }
        v.at(i, j, k) += static_cast<float>(acc);
      }
}

void fill_sphere(Volume& v, std::array<double, 3> centre_mm, double radius_mm, float value) {
  const Dims& d = v.dims();
  const Spacing& s = v.spacing();
  for (std::int64_t k = 0; k < d.nz; ++k)
    for (std::int64_t j = 0; j < d.ny; ++j)
      for (std::int64_t i = 0; i < d.nx; ++i) {
        const double dx = static_cast<double>(i) * s.sx - centre_mm[0];
        const double dy = static_cast<double>(j) * s.sy - centre_mm[1];
        const double dz = static_cast<double>(k) * s.sz - centre_mm[2];
        if (dx * dx + dy * dy + dz * dz <= radius_mm * radius_mm) v.at(i, j, k) = value;
      }
}

}  // namespace

BackgroundPhantom make_background(Rng& rng, const Dims& dims, const Spacing& spacing) {
  const double ex = static_cast<double>(dims.nx) * spacing.sx;
  const double ey = static_cast<double>(dims.ny) * spacing.sy;
  const double ez = static_cast<double>(dims.nz) * spacing.sz;
  Volume ct(dims, spacing, Unit::hu, 35.0f);

  std::vector<Blob> blobs;
  for (int b = 0; b < 12; ++b)
    blobs.push_back({{rng.uniform(0, ex), rng.uniform(0, ey), rng.uniform(0, ez)}, rng.uniform(5.0, 12.0),
                     rng.uniform(-25.0, 25.0)});
  // fat pads stay inside the soft-tissue window
  for (int b = 0; b < 4; ++b)
    blobs.push_back({{rng.uniform(0, ex), rng.uniform(0, ey), rng.uniform(0, ez)}, rng.uniform(4.0, 8.0),
                     rng.uniform(-110.0, -60.0)});
  add_blobs(ct, blobs);

  // gas pockets and bone fragments fall outside the window
  const int gas = 1 + static_cast<int>(rng.below(2));
  for (int g = 0; g < gas; ++g)
    fill_sphere(ct, {rng.uniform(0, ex), rng.uniform(0, ey), rng.uniform(0, ez)}, rng.uniform(3.0, 6.0), -900.0f);
  const int bone = 1 + static_cast<int>(rng.below(2));
  for (int b = 0; b < bone; ++b)
    fill_sphere(ct, {rng.uniform(0, ex), rng.uniform(0, ey), rng.uniform(0, ez)}, rng.uniform(3.0, 6.0), 650.0f);

  for (float& v : ct.values()) v += static_cast<float>(8.0 * rng.normal());

  Mask region(dims, spacing);
  const std::array<double, 3> centre{0.5 * static_cast<double>(dims.nx - 1), 0.5 * static_cast<double>(dims.ny - 1),
                                     0.5 * static_cast<double>(dims.nz - 1)};
  const Rotation identity{1, 0, 0, 0, 1, 0, 0, 0, 1};
  paint_ellipsoid(region, centre,
                  {0.36 * static_cast<double>(dims.nx), 0.36 * static_cast<double>(dims.ny),
                   0.36 * static_cast<double>(dims.nz)},
                  identity);
  return {std::move(ct), std::move(region)};
}

TexturePatch make_texture_patch(Rng& rng, const Dims& patch, const ShapeFamily& family, double lo_mm, double hi_mm,
                                float lesion_hu, float hu_lo, float hu_hi) {
  const Mask base = make_toy_shape(rng, family);
  const double target = rng.uniform(lo_mm, hi_mm);
  const TsdfGrid placed = recentre(pad_tsdf(mask_to_tsdf(base), patch));
  Mask mask = fit_long_axis(placed, target, 3).mask;

  Volume hu(patch, family.spacing, Unit::hu, 35.0f);
  std::vector<Blob> blobs;
  const double ex = static_cast<double>(patch.nx) * family.spacing.sx;
  for (int b = 0; b < 4; ++b)
    blobs.push_back({{rng.uniform(0, ex), rng.uniform(0, ex), rng.uniform(0, ex)}, rng.uniform(4.0, 9.0),
                     rng.uniform(-30.0, 30.0)});
  add_blobs(hu, blobs);
  for (std::size_t v = 0; v < hu.size(); ++v) {
    const float noise = static_cast<float>(6.0 * rng.normal());
    if (mask.values()[v]) hu.values()[v] = lesion_hu + noise;
    else hu.values()[v] += noise;
  }
  return {std::move(mask), normalize_hu(hu, hu_lo, hu_hi)};
}

}  // namespace lnforge
