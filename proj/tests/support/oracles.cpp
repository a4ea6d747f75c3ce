#include "oracles.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

namespace lnforge::oracle {

std::vector<double> edt_squared(const Mask& m, double wx, double wy, double wz) {
  const Dims& d = m.dims();
  std::vector<Index3> sites;
  for (std::size_t n = 0; n < m.size(); ++n)
    if (m.values()[n]) sites.push_back(d.index(n));
  std::vector<double> out(m.size(), std::numeric_limits<double>::infinity());
  for (std::size_t n = 0; n < m.size(); ++n) {
    const Index3 p = d.index(n);
    double best = std::numeric_limits<double>::infinity();
    for (const Index3& s : sites) {
      const auto di = static_cast<double>(p.i - s.i), dj = static_cast<double>(p.j - s.j),
                 dk = static_cast<double>(p.k - s.k);
      best = std::min(best, wx * di * di + wy * dj * dj + wz * dk * dk);
    }
    out[n] = best;
  }
  return out;
}

double long_axis_mm(const Mask& m) {
  const Dims& d = m.dims();
  const Spacing& s = m.spacing();
  std::vector<Index3> pts;
  for (std::size_t n = 0; n < m.size(); ++n)
    if (m.values()[n]) pts.push_back(d.index(n));
  if (pts.size() == 1) return s.mean();
  double best = 0.0;
  for (std::size_t a = 0; a < pts.size(); ++a)
    for (std::size_t b = a + 1; b < pts.size(); ++b) {
      const double x = static_cast<double>(pts[a].i - pts[b].i) * s.sx;
      const double y = static_cast<double>(pts[a].j - pts[b].j) * s.sy;
      const double z = static_cast<double>(pts[a].k - pts[b].k) * s.sz;
      best = std::max(best, x * x + y * y + z * z);
    }
  return std::sqrt(best);
}

namespace {

double dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

std::vector<double> knn_radius(const FeatureSet& s, std::size_t k) {
  std::vector<double> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::vector<double> ds;
    for (std::size_t j = 0; j < s.size(); ++j)
      if (j != i) ds.push_back(dist(s.row(i), s.row(j)));
    std::sort(ds.begin(), ds.end());
    out.push_back(ds[k - 1]);
  }
  return out;
}

double coverage(const FeatureSet& manifold, const FeatureSet& probes, std::size_t k) {
  const auto radii = oracle::knn_radius(manifold, k);
  std::size_t hit = 0;
  for (std::size_t p = 0; p < probes.size(); ++p) {
    bool in = false;
    for (std::size_t r = 0; r < manifold.size(); ++r)
      if (dist(probes.row(p), manifold.row(r)) <= radii[r]) in = true;
    if (in) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(probes.size());
}

std::vector<double> singular_values(const std::vector<std::vector<double>>& rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto v = static_cast<Eigen::Index>(rows.front().size());
  Eigen::MatrixXd x(n, v);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < v; ++c) x(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  x.rowwise() -= x.colwise().mean();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(x);
  const Eigen::VectorXd s = svd.singularValues();
  return std::vector<double>(s.data(), s.data() + s.size());
}

double ks_uniform(std::vector<double> x, double lo, double hi) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = std::clamp((x[i] - lo) / (hi - lo), 0.0, 1.0);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

Mask random_mask(Rng& rng, const Dims& dims, double density, Spacing spacing) {
  Mask m(dims, spacing);
  for (auto& v : m.values()) v = rng.uniform() < density ? 1 : 0;
  return m;
}

Mask thick_mask(Rng& rng, const Dims& half, double density) {
  const Mask coarse = random_mask(rng, half, density);
  const Dims full{2 * half.nx, 2 * half.ny, 2 * half.nz};
  Mask m(full, {});
  for (std::int64_t k = 0; k < full.nz; ++k)
    for (std::int64_t j = 0; j < full.ny; ++j)
      for (std::int64_t i = 0; i < full.nx; ++i) m.set({i, j, k}, coarse.at(i / 2, j / 2, k / 2));
  return m;
}

Mask ball_mask(const Dims& dims, const Spacing& s, double cx, double cy, double cz, double radius_mm) {
  Mask m(dims, s);
  for (std::int64_t k = 0; k < dims.nz; ++k)
    for (std::int64_t j = 0; j < dims.ny; ++j)
      for (std::int64_t i = 0; i < dims.nx; ++i) {
        const double x = static_cast<double>(i) * s.sx - cx, y = static_cast<double>(j) * s.sy - cy,
                     z = static_cast<double>(k) * s.sz - cz;
        if (x * x + y * y + z * z <= radius_mm * radius_mm) m.set({i, j, k}, true);
      }
  return m;
}

}  // namespace lnforge::oracle
