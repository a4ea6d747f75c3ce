#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "lnforge/volume.hpp"

namespace lnforge {

/// Truncated signed distance field: negative inside, positive outside, values
/// in [-tau, tau]; one normalized unit corresponds to norm_scale millimetres.
struct TsdfGrid {
  Volume grid;  // unit SDF
  float tau = 0.2f;
  double norm_scale = 1.0;

  const Dims& dims() const noexcept { return grid.dims(); }
  const Spacing& spacing() const noexcept { return grid.spacing(); }
  void validate() const;
};

inline constexpr float kDefaultTau = 0.2f;

/// Squared distance grid. Voxels with no reachable site hold `sentinel`.
struct DistanceGrid {
  Dims dims;
  std::vector<double> values;
  double sentinel = 0.0;
};

/// Exact squared distance (voxel^2) from every voxel to the nearest
/// foreground voxel, via separable lower envelopes of parabolas.
DistanceGrid edt_squared(const Mask& m);
/// Same, with per-axis step lengths taken from the mask spacing (mm^2).
DistanceGrid edt_squared_mm(const Mask& m);
/// General form: squared per-axis step weights.
DistanceGrid edt_squared_weighted(const Mask& m, double wx, double wy, double wz);

/// Half the physical extent of the shortest grid axis.
double default_norm_scale(const Dims& dims, const Spacing& spacing);

TsdfGrid mask_to_tsdf(const Mask& m, float tau, double norm_scale);
TsdfGrid mask_to_tsdf(const Mask& m, float tau = kDefaultTau);
/// Foreground iff value < 0.
Mask tsdf_to_mask(const TsdfGrid& t);

/// Foreground voxels with at least one background (or off-grid) 6-neighbour.
std::vector<Index3> surface_voxels(const Mask& m);
/// Maximum centre-to-centre distance between surface voxels, in mm. A single
/// voxel measures as the mean spacing.
double long_axis_mm(const Mask& m);

/// Resamples t at c + (x - c) / factor about the grid centre c. Off-grid
/// samples read +tau.
TsdfGrid scale_shape(const TsdfGrid& t, double factor);

/// Embeds t centred in a larger grid, filling new voxels with +tau.
TsdfGrid pad_tsdf(const TsdfGrid& t, const Dims& dims);

bool is_connected6(const Mask& m);

struct Box3 {
  Index3 lo;
  Index3 hi;  // inclusive
};
std::optional<Box3> bounding_box(const Mask& m);

void save_tsdf(const TsdfGrid& t, const std::filesystem::path& path);
TsdfGrid load_tsdf(const std::filesystem::path& path);

}  // namespace lnforge
