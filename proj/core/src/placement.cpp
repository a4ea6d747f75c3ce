#include "lnforge/placement.hpp"

#include <algorithm>
#include <cmath>

#include "lnforge/error.hpp"
#include "lnforge/parallel.hpp"
#include "lnforge/sdf.hpp"

namespace lnforge {

void PlacementConfig::validate() const {
  if (!(hu_lo < hu_hi)) fail(Errc::invalid_argument, "hu_window", "lower bound must be below upper bound");
  if (!(min_soft_fraction >= 0.0 && min_soft_fraction <= 1.0))
    fail(Errc::invalid_argument, "min_soft_fraction", "must lie in [0, 1]");
  if (margin < 0) fail(Errc::invalid_argument, "margin", "must be non-negative");
  if (stride < 1) fail(Errc::invalid_argument, "stride", "must be at least 1");
  if (radius_ladder_mm.empty()) fail(Errc::invalid_argument, "radius_ladder", "must not be empty");
  for (std::size_t r = 0; r < radius_ladder_mm.size(); ++r) {
    if (!(radius_ladder_mm[r] > 0.0)) fail(Errc::invalid_argument, "radius_ladder", "radii must be positive");
    if (r > 0 && !(radius_ladder_mm[r] > radius_ladder_mm[r - 1]))
      fail(Errc::invalid_argument, "radius_ladder", "radii must increase");
  }
  if (!(feather_mm >= 0.0)) fail(Errc::invalid_argument, "feather_mm", "must be non-negative");
  if (max_retries < 1) fail(Errc::invalid_argument, "max_retries", "must be at least 1");
}

Mask dilate(const Mask& m, int margin) {
  if (margin <= 0 || m.count() == 0) return m;
  const DistanceGrid d = edt_squared(m);
  const double r2 = static_cast<double>(margin) * static_cast<double>(margin);
  Mask out(m.dims(), m.spacing());
  for (std::size_t n = 0; n < d.values.size(); ++n)
    if (d.values[n] <= r2) out.values()[n] = 1;
  return out;
}

namespace {

struct Offset {
  std::int64_t di, dj, dk;
  double dist_mm;
};

// Ball offsets up to r_max, nearest first.
std::vector<Offset> ball_offsets(const Spacing& s, double r_max) {
  std::vector<Offset> out;
  const auto reach = [&](double step) { return static_cast<std::int64_t>(std::floor(r_max / step)); };
  const std::int64_t ri = reach(s.sx), rj = reach(s.sy), rk = reach(s.sz);
  for (std::int64_t dk = -rk; dk <= rk; ++dk)
    for (std::int64_t dj = -rj; dj <= rj; ++dj)
      for (std::int64_t di = -ri; di <= ri; ++di) {
        const double x = static_cast<double>(di) * s.sx, y = static_cast<double>(dj) * s.sy,
                     z = static_cast<double>(dk) * s.sz;
        const double dist = std::sqrt(x * x + y * y + z * z);
        if (dist <= r_max) out.push_back({di, dj, dk, dist});
      }
  std::stable_sort(out.begin(), out.end(), [](const Offset& a, const Offset& b) { return a.dist_mm < b.dist_mm; });
  return out;
}

void require_same_grid(const Dims& a, const Spacing& sa, const Dims& b, const Spacing& sb, const char* field) {
  if (!(a == b)) fail(Errc::dims_mismatch, field, "grid dims differ from the CT volume");
  if (!sa.approx_equal(sb)) fail(Errc::spacing_mismatch, field, "spacing differs from the CT volume");
}

}  // namespace

double soft_tissue_fraction(const Volume& ct, const Index3& center, double radius_mm, float lo, float hi) {
  const Spacing& s = ct.spacing();
  const Dims& d = ct.dims();
  std::size_t total = 0, soft = 0;
  for (const Offset& o : ball_offsets(s, radius_mm)) {
    const Index3 p{center.i + o.di, center.j + o.dj, center.k + o.dk};
    if (!d.contains(p)) continue;
    ++total;
    const float v = ct.at(p);
    if (v >= lo && v <= hi) ++soft;
  }
  return total == 0 ? 0.0 : static_cast<double>(soft) / static_cast<double>(total);
}

SoftTissueScan scan_soft_tissue(const Volume& ct, const Mask& region, const PlacementConfig& cfg) {
  cfg.validate();
  require_same_grid(ct.dims(), ct.spacing(), region.dims(), region.spacing(), "region");
  const Dims& d = ct.dims();
  const auto& ladder = cfg.radius_ladder_mm;
  const std::vector<Offset> offsets = ball_offsets(ct.spacing(), ladder.back());

  SoftTissueScan scan;
  for (std::int64_t k = 0; k < d.nz; k += cfg.stride)
    for (std::int64_t j = 0; j < d.ny; j += cfg.stride)
      for (std::int64_t i = 0; i < d.nx; i += cfg.stride)
        if (region.at(i, j, k)) scan.centers.push_back({i, j, k});
  scan.rung.assign(scan.centers.size(), -1);
  scan.fraction.assign(scan.centers.size(), {});

  parallel_for(scan.centers.size(), [&](std::size_t c) {
    const Index3 ctr = scan.centers[c];
    std::size_t total = 0, soft = 0, next = 0;
    std::vector<double> fractions;
    // offsets are nearest-first, so each ladder radius is a prefix
    for (std::size_t r = 0; r < ladder.size(); ++r) {
      while (next < offsets.size() && offsets[next].dist_mm <= ladder[r]) {
        const Offset& o = offsets[next++];
        const Index3 p{ctr.i + o.di, ctr.j + o.dj, ctr.k + o.dk};
        if (!d.contains(p)) continue;
        ++total;
        const float v = ct.at(p);
        if (v >= cfg.hu_lo && v <= cfg.hu_hi) ++soft;
      }
      const double f = total == 0 ? 0.0 : static_cast<double>(soft) / static_cast<double>(total);
      if (f < cfg.min_soft_fraction) break;
      fractions.push_back(f);
    }
    scan.rung[c] = static_cast<int>(fractions.size()) - 1;
    scan.fraction[c] = std::move(fractions);
  });
  return scan;
}

std::vector<PlacementCandidate> apply_exclusion(const SoftTissueScan& scan, const Mask& existing,
                                                const PlacementConfig& cfg) {
  const auto& ladder = cfg.radius_ladder_mm;
  const bool any = existing.count() > 0;
  DistanceGrid blocked;
  if (any) blocked = edt_squared_mm(dilate(existing, cfg.margin));

  std::vector<PlacementCandidate> out;
  for (std::size_t c = 0; c < scan.centers.size(); ++c) {
    int rung = scan.rung[c];
    if (rung < 0) continue;
    if (any) {
      // a ball of radius r misses the blocked set iff r is below the distance to it
      const double d2 = blocked.values[existing.dims().offset(scan.centers[c])];
      while (rung >= 0 && !(ladder[static_cast<std::size_t>(rung)] * ladder[static_cast<std::size_t>(rung)] < d2))
        --rung;
      if (rung < 0) continue;
    }
    const auto r = static_cast<std::size_t>(rung);
    out.push_back({scan.centers[c], 2.0 * ladder[r], scan.fraction[c][r]});
  }
  return out;
}

std::vector<PlacementCandidate> find_candidates(const Volume& ct, const Mask& region, const Mask& existing,
                                                const PlacementConfig& cfg) {
  require_same_grid(ct.dims(), ct.spacing(), existing.dims(), existing.spacing(), "existing");
  return apply_exclusion(scan_soft_tissue(ct, region, cfg), existing, cfg);
}

double sample_target_long_axis(Rng& rng, double lo_mm, double hi_mm) {
  if (!(lo_mm < hi_mm)) fail(Errc::invalid_argument, "long_axis", "lower bound must be below upper bound");
  return rng.uniform(lo_mm, hi_mm);
}

}  // namespace lnforge
