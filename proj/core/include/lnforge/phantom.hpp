#pragma once

#include <array>
#include <vector>

#include "lnforge/rng.hpp"
#include "lnforge/volume.hpp"

namespace lnforge {

/// Procedural stand-ins for clinical data: blobby lesion masks built from
/// unions of rotated ellipsoids, soft-tissue CT backgrounds, and textured
/// lesion patches.
struct ShapeFamily {
  Dims dims{20, 20, 20};
  Spacing spacing{1.0, 1.0, 1.0};
  double min_semi_axis = 2.5;  // voxels
  double max_semi_axis = 6.0;
  int max_lobes = 2;
};

using Rotation = std::array<double, 9>;  // row-major

Rotation random_rotation(Rng& rng);

/// Voxels whose centre lies inside the rotated ellipsoid (centre and axes in voxels).
void paint_ellipsoid(Mask& m, std::array<double, 3> centre, std::array<double, 3> semi_axes, const Rotation& rot);

/// One connected blob; retried internally until 6-connected.
Mask make_toy_shape(Rng& rng, const ShapeFamily& family);
std::vector<Mask> make_toy_family(std::size_t count, std::uint64_t seed, const ShapeFamily& family);

struct BackgroundPhantom {
  Volume ct;    // HU
  Mask region;  // admissible lesion region
};

BackgroundPhantom make_background(Rng& rng, const Dims& dims, const Spacing& spacing);

struct TexturePatch {
  Mask mask;
  Volume texture;  // NORMALIZED
};

/// Lesion mask of random long axis in [lo_mm, hi_mm] centred in a patch,
/// with tissue texture outside and lesion texture at `lesion_hu` inside.
TexturePatch make_texture_patch(Rng& rng, const Dims& patch, const ShapeFamily& family, double lo_mm, double hi_mm,
                                float lesion_hu, float hu_lo, float hu_hi);

}  // namespace lnforge
