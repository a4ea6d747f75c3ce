#include "lnforge/sdf.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "lnforge/error.hpp"
#include "lnforge/lnv_io.hpp"

namespace lnforge {

void TsdfGrid::validate() const {
  if (!(tau > 0.0f)) fail(Errc::invalid_argument, "tau", "tau must be positive");
  if (!(norm_scale > 0.0) || !std::isfinite(norm_scale)) fail(Errc::invalid_argument, "norm_scale", "must be positive");
  grid.validate();
  for (float v : grid.values())
    if (v < -tau || v > tau) fail(Errc::out_of_bounds, "values", "TSDF value outside [-tau, tau]");
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Lower envelope of parabolas w*(p-q)^2 + f(q) over sites with finite f.
struct Envelope {
  std::vector<std::int64_t> v;
  std::vector<double> z;
  std::vector<double> line;
  std::vector<double> result;

  explicit Envelope(std::size_t n) : v(n), z(n + 1), line(n), result(n) {}

  void run(std::size_t n, double w) {
    std::int64_t k = -1;
    for (std::int64_t q = 0; q < static_cast<std::int64_t>(n); ++q) {
      const double fq = line[q];
      if (fq == kInf) continue;
      if (k < 0) {
        k = 0;
        v[0] = q;
        z[0] = -kInf;
        z[1] = kInf;
        continue;
      }
      while (true) {
        const std::int64_t r = v[k];
        const double s = ((fq + w * static_cast<double>(q * q)) - (line[r] + w * static_cast<double>(r * r))) /
                         (2.0 * w * static_cast<double>(q - r));
        if (s <= z[k]) {
          --k;
          continue;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kInf;
        break;
      }
    }
    if (k < 0) {
      std::fill(result.begin(), result.begin() + static_cast<std::ptrdiff_t>(n), kInf);
      return;
    }
    k = 0;
    for (std::int64_t q = 0; q < static_cast<std::int64_t>(n); ++q) {
      while (z[k + 1] < static_cast<double>(q)) ++k;
      const double d = static_cast<double>(q - v[k]);
      result[q] = w * d * d + line[v[k]];
    }
  }
};

}  // namespace

DistanceGrid edt_squared_weighted(const Mask& m, double wx, double wy, double wz) {
  const Dims d = m.dims();
  std::vector<double> g(d.count());
  for (std::size_t n = 0; n < g.size(); ++n) g[n] = m.values()[n] ? 0.0 : kInf;

  Envelope env(static_cast<std::size_t>(std::max({d.nx, d.ny, d.nz, std::int64_t{1}})));
  // x pass
  for (std::int64_t k = 0; k < d.nz; ++k)
    for (std::int64_t j = 0; j < d.ny; ++j) {
      for (std::int64_t i = 0; i < d.nx; ++i) env.line[i] = g[d.offset(i, j, k)];
      env.run(d.nx, wx);
      for (std::int64_t i = 0; i < d.nx; ++i) g[d.offset(i, j, k)] = env.result[i];
    }
  // y pass
  for (std::int64_t k = 0; k < d.nz; ++k)
    for (std::int64_t i = 0; i < d.nx; ++i) {
      for (std::int64_t j = 0; j < d.ny; ++j) env.line[j] = g[d.offset(i, j, k)];
      env.run(d.ny, wy);
      for (std::int64_t j = 0; j < d.ny; ++j) g[d.offset(i, j, k)] = env.result[j];
    }
  // z pass
  for (std::int64_t j = 0; j < d.ny; ++j)
    for (std::int64_t i = 0; i < d.nx; ++i) {
      for (std::int64_t k = 0; k < d.nz; ++k) env.line[k] = g[d.offset(i, j, k)];
      env.run(d.nz, wz);
      for (std::int64_t k = 0; k < d.nz; ++k) g[d.offset(i, j, k)] = env.result[k];
    }

  const double sentinel = wx * static_cast<double>(d.nx * d.nx) + wy * static_cast<double>(d.ny * d.ny) +
                          wz * static_cast<double>(d.nz * d.nz) + 1.0;
  for (double& x : g)
    if (x == kInf) x = sentinel;
  return DistanceGrid{d, std::move(g), sentinel};
}

DistanceGrid edt_squared(const Mask& m) { return edt_squared_weighted(m, 1.0, 1.0, 1.0); }

DistanceGrid edt_squared_mm(const Mask& m) {
  const Spacing& s = m.spacing();
  return edt_squared_weighted(m, s.sx * s.sx, s.sy * s.sy, s.sz * s.sz);
}

double default_norm_scale(const Dims& dims, const Spacing& spacing) {
  return 0.5 * std::min({static_cast<double>(dims.nx) * spacing.sx, static_cast<double>(dims.ny) * spacing.sy,
                         static_cast<double>(dims.nz) * spacing.sz});
}

TsdfGrid mask_to_tsdf(const Mask& m, float tau, double norm_scale) {
  if (!(tau > 0.0f)) fail(Errc::invalid_argument, "tau", "tau must be positive");
  if (!(norm_scale > 0.0)) fail(Errc::invalid_argument, "norm_scale", "norm_scale must be positive");
  const std::size_t fg = m.count();
  if (fg == 0) fail(Errc::empty_mask, "mask", "mask has no foreground voxel");
  if (fg == m.size()) fail(Errc::full_mask, "mask", "mask has no background voxel");

  Mask inverse(m.dims(), m.spacing());
  for (std::size_t n = 0; n < m.size(); ++n) inverse.values()[n] = m.values()[n] ? 0 : 1;
  const DistanceGrid to_fg = edt_squared_mm(m);
  const DistanceGrid to_bg = edt_squared_mm(inverse);

  Volume out(m.dims(), m.spacing(), Unit::sdf);
  for (std::size_t n = 0; n < m.size(); ++n) {
    const double mm = m.values()[n] ? -std::sqrt(to_bg.values[n]) : std::sqrt(to_fg.values[n]);
    out.values()[n] = std::clamp(static_cast<float>(mm / norm_scale), -tau, tau);
  }
  return TsdfGrid{std::move(out), tau, norm_scale};
}

TsdfGrid mask_to_tsdf(const Mask& m, float tau) {
  return mask_to_tsdf(m, tau, default_norm_scale(m.dims(), m.spacing()));
}

Mask tsdf_to_mask(const TsdfGrid& t) {
  Mask m(t.dims(), t.spacing());
  for (std::size_t n = 0; n < m.size(); ++n) m.values()[n] = t.grid.values()[n] < 0.0f ? 1 : 0;
  return m;
}

std::vector<Index3> surface_voxels(const Mask& m) {
  const Dims& d = m.dims();
  std::vector<Index3> out;
  static constexpr int kOff[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  for (std::int64_t k = 0; k < d.nz; ++k)
    for (std::int64_t j = 0; j < d.ny; ++j)
      for (std::int64_t i = 0; i < d.nx; ++i) {
        if (!m.at(i, j, k)) continue;
        for (const auto& o : kOff) {
          const Index3 p{i + o[0], j + o[1], k + o[2]};
          if (!d.contains(p) || !m.at(p)) {
            out.push_back({i, j, k});
            break;
          }
        }
      }
  return out;
}

double long_axis_mm(const Mask& m) {
  const auto surf = surface_voxels(m);
  if (surf.empty()) fail(Errc::empty_mask, "mask", "long axis of an empty mask");
  const Spacing& s = m.spacing();
  if (surf.size() == 1) return s.mean();
  double best = 0.0;
  std::vector<double> px(surf.size()), py(surf.size()), pz(surf.size());
  for (std::size_t a = 0; a < surf.size(); ++a) {
    px[a] = static_cast<double>(surf[a].i) * s.sx;
    py[a] = static_cast<double>(surf[a].j) * s.sy;
    pz[a] = static_cast<double>(surf[a].k) * s.sz;
  }
  for (std::size_t a = 0; a < surf.size(); ++a)
    for (std::size_t b = a + 1; b < surf.size(); ++b) {
      const double dx = px[a] - px[b], dy = py[a] - py[b], dz = pz[a] - pz[b];
      best = std::max(best, dx * dx + dy * dy + dz * dz);
    }
  return std::sqrt(best);
}

namespace {

float sample_or(const TsdfGrid& t, std::int64_t i, std::int64_t j, std::int64_t k) {
  const Dims& d = t.dims();
  if (i < 0 || j < 0 || k < 0 || i >= d.nx || j >= d.ny || k >= d.nz) return t.tau;
  return t.grid.at(i, j, k);
}

double trilinear(const TsdfGrid& t, double x, double y, double z) {
  const double fx = std::floor(x), fy = std::floor(y), fz = std::floor(z);
  const auto i = static_cast<std::int64_t>(fx), j = static_cast<std::int64_t>(fy), k = static_cast<std::int64_t>(fz);
  const double ax = x - fx, ay = y - fy, az = z - fz;
  auto v = [&](int di, int dj, int dk) { return static_cast<double>(sample_or(t, i + di, j + dj, k + dk)); };
  // exact grid points read the voxel directly
  if (ax == 0.0 && ay == 0.0 && az == 0.0) return v(0, 0, 0);
  const double c00 = v(0, 0, 0) * (1 - ax) + v(1, 0, 0) * ax;
  const double c10 = v(0, 1, 0) * (1 - ax) + v(1, 1, 0) * ax;
  const double c01 = v(0, 0, 1) * (1 - ax) + v(1, 0, 1) * ax;
  const double c11 = v(0, 1, 1) * (1 - ax) + v(1, 1, 1) * ax;
  const double c0 = c00 * (1 - ay) + c10 * ay;
  const double c1 = c01 * (1 - ay) + c11 * ay;
  return c0 * (1 - az) + c1 * az;
}

}  // namespace

TsdfGrid scale_shape(const TsdfGrid& t, double factor) {
  if (!(factor >= 0.05 && factor <= 20.0)) fail(Errc::invalid_argument, "factor", "scale factor outside [0.05, 20]");
  const Dims& d = t.dims();
  const double cx = 0.5 * static_cast<double>(d.nx - 1);
  const double cy = 0.5 * static_cast<double>(d.ny - 1);
  const double cz = 0.5 * static_cast<double>(d.nz - 1);

  if (auto box = bounding_box(tsdf_to_mask(t))) {
    auto fits = [&](std::int64_t lo, std::int64_t hi, double c, std::int64_t n) {
      const double a = c + (static_cast<double>(lo) - c) * factor;
      const double b = c + (static_cast<double>(hi) - c) * factor;
      return a >= -1e-9 && b <= static_cast<double>(n - 1) + 1e-9;
    };
    if (!fits(box->lo.i, box->hi.i, cx, d.nx) || !fits(box->lo.j, box->hi.j, cy, d.ny) ||
        !fits(box->lo.k, box->hi.k, cz, d.nz))
      fail(Errc::out_of_bounds, "factor", "scaled shape exceeds the grid");
  }

  Volume out(d, t.spacing(), Unit::sdf);
  const double inv = 1.0 / factor;
  for (std::int64_t k = 0; k < d.nz; ++k)
    for (std::int64_t j = 0; j < d.ny; ++j)
      for (std::int64_t i = 0; i < d.nx; ++i) {
        const double x = cx + (static_cast<double>(i) - cx) * inv;
        const double y = cy + (static_cast<double>(j) - cy) * inv;
        const double z = cz + (static_cast<double>(k) - cz) * inv;
        const double v = trilinear(t, x, y, z);
        out.at(i, j, k) = std::clamp(static_cast<float>(v), -t.tau, t.tau);
      }
  return TsdfGrid{std::move(out), t.tau, t.norm_scale};
}

TsdfGrid pad_tsdf(const TsdfGrid& t, const Dims& dims) {
  const Dims& d = t.dims();
  if (dims.nx < d.nx || dims.ny < d.ny || dims.nz < d.nz) fail(Errc::invalid_dims, "dims", "padded grid is smaller");
  Volume out(dims, t.spacing(), Unit::sdf, t.tau);
  const Index3 off{(dims.nx - d.nx) / 2, (dims.ny - d.ny) / 2, (dims.nz - d.nz) / 2};
  for (std::int64_t k = 0; k < d.nz; ++k)
    for (std::int64_t j = 0; j < d.ny; ++j)
      for (std::int64_t i = 0; i < d.nx; ++i) out.at(i + off.i, j + off.j, k + off.k) = t.grid.at(i, j, k);
  return TsdfGrid{std::move(out), t.tau, t.norm_scale};
}

bool is_connected6(const Mask& m) {
  const Dims& d = m.dims();
  std::size_t total = m.count();
  if (total == 0) return false;
  std::vector<std::uint8_t> seen(m.size(), 0);
  std::size_t start = 0;
  while (!m.values()[start]) ++start;
  std::deque<std::size_t> queue{start};
  seen[start] = 1;
  std::size_t reached = 0;
  static constexpr int kOff[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  while (!queue.empty()) {
    const std::size_t cur = queue.front();
    queue.pop_front();
    ++reached;
    const Index3 p = d.index(cur);
    for (const auto& o : kOff) {
      const Index3 q{p.i + o[0], p.j + o[1], p.k + o[2]};
      if (!d.contains(q)) continue;
      const std::size_t off = d.offset(q);
      if (m.values()[off] && !seen[off]) {
        seen[off] = 1;
        queue.push_back(off);
      }
    }
  }
  return reached == total;
}

std::optional<Box3> bounding_box(const Mask& m) {
  const Dims& d = m.dims();
  std::optional<Box3> box;
  for (std::int64_t k = 0; k < d.nz; ++k)
    for (std::int64_t j = 0; j < d.ny; ++j)
      for (std::int64_t i = 0; i < d.nx; ++i) {
        if (!m.at(i, j, k)) continue;
        if (!box) {
          box = Box3{{i, j, k}, {i, j, k}};
          continue;
        }
        box->lo = {std::min(box->lo.i, i), std::min(box->lo.j, j), std::min(box->lo.k, k)};
        box->hi = {std::max(box->hi.i, i), std::max(box->hi.j, j), std::max(box->hi.k, k)};
      }
  return box;
}

void save_tsdf(const TsdfGrid& t, const std::filesystem::path& path) {
  write_lnv(path, t.grid, {{"tau", static_cast<double>(t.tau)}, {"norm_scale", t.norm_scale}});
}

TsdfGrid load_tsdf(const std::filesystem::path& path) {
  auto f = read_lnv(path);
  if (f.volume.unit() != Unit::sdf) fail(Errc::malformed_header, "unit", "expected SDF unit in " + path.string());
  if (!f.extras.contains("tau") || !f.extras.contains("norm_scale"))
    fail(Errc::malformed_header, "tau", "SDF file lacks tau/norm_scale");
  TsdfGrid t{std::move(f.volume), static_cast<float>(f.extras["tau"]), f.extras["norm_scale"]};
  t.validate();
  return t;
}

}  // namespace lnforge
