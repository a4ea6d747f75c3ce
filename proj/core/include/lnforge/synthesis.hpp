#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lnforge/adapter.hpp"
#include "lnforge/codec.hpp"
#include "lnforge/diffusion.hpp"
#include "lnforge/placement.hpp"

namespace lnforge {

/// Unconditional shape model: latent sampler, decoder and optional refiner.
struct ShapeGenerator {
  LatentDiffusionModel model;
  LinearCodec codec;
  std::optional<AdapterNet> adapter;
};

/// Mask-conditioned intensity model. The condition is the cond_codec latent
/// of the mask TSDF; samples decode through texture_codec.
struct TextureGenerator {
  LatentDiffusionModel model;
  LinearCodec cond_codec;
  LinearCodec texture_codec;

  const Dims& patch_dims() const noexcept { return texture_codec.grid_dims; }
};

struct ShapeSynthConfig {
  int max_tries = 10;
  int refine_iterations = 4;
};

struct ShapeSample {
  Mask mask;       // patch-sized, centred
  Mask canonical;  // accepted decode at the codec grid, before scaling
  double long_axis_mm = 0.0;
  double base_long_axis_mm = 0.0;  // before scaling
  double scale_factor = 1.0;
  int tries = 1;
};

/// One decoded shape at the codec grid: sample, decode, refine.
TsdfGrid generate_shape_tsdf(const ShapeGenerator& g, Rng& rng);

/// Moves the bounding-box centre of the foreground to the grid centre.
TsdfGrid recentre(const TsdfGrid& t);

/// Scales an already-measured shape so its long axis approaches target_mm.
ShapeSample fit_long_axis(const TsdfGrid& shape, double target_mm, int refine_iterations);

/// Draws shapes until one decodes to a non-empty connected mask, then scales
/// it into a patch of `patch` dims. Final long axis lies within two voxel
/// diagonals of target_mm.
ShapeSample synth_shape(const ShapeGenerator& g, Rng& rng, double target_mm, const Dims& patch,
                        const ShapeSynthConfig& cfg = {});

std::vector<double> texture_condition(const TextureGenerator& g, const Mask& mask);
Volume synth_texture(const TextureGenerator& g, const Mask& mask, Rng& rng);

/// Composites a lesion patch centred at `center`:
///   w = clamp(1 - dist_mm / feather_mm, 0, 1), out = w * HU(texture) + (1 - w) * ct.
/// Patch voxels outside the volume are ignored; every mask voxel must land inside.
Volume blend(const Volume& ct, const Mask& mask, const Volume& texture, const Index3& center, double feather_mm,
             float hu_lo, float hu_hi);

/// Corner of a patch of `size` centred at `center`.
Index3 patch_corner(const Index3& center, const Dims& size);

struct Background {
  std::string id;
  Volume ct;
  Mask region;
  std::string ct_path;      // recorded in the manifest, may be empty
  std::string region_path;
};

struct AssemblyConfig {
  PlacementConfig placement;
  ShapeSynthConfig shape;
  double long_axis_lo = 1.7;
  double long_axis_hi = 30.0;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<std::string> checkpoint_hashes;
};

struct ManifestEntry {
  std::string background;
  Index3 center;
  double target_mm = 0.0;
  double realized_mm = 0.0;
  double scale_factor = 1.0;
  std::uint64_t shape_seed = 0;
  std::uint64_t texture_seed = 0;
  double max_long_axis_mm = 0.0;
  double soft_tissue_fraction = 0.0;
  Index3 lesion_corner;
  std::string volume_file;
  std::string mask_file;
  std::string lesion_file;
  std::string shape_file;
};

struct ManifestBackground {
  std::string id;
  std::string ct;
  std::string region;
  std::string volume_file;
  std::string mask_file;
};

struct DatasetManifest {
  int version = 1;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<std::string> checkpoint_hashes;
  PlacementConfig placement;
  std::vector<ManifestEntry> entries;
  std::vector<ManifestBackground> backgrounds;
};

/// Places counts[b] lesions into backgrounds[b] and writes composited volumes,
/// lesion-union masks, per-lesion masks, canonical shapes and manifest.json below out_dir.
DatasetManifest assemble_dataset(std::span<const Background> backgrounds, std::span<const std::size_t> counts,
                                 const ShapeGenerator& shapes, const TextureGenerator& textures,
                                 const AssemblyConfig& cfg, const std::filesystem::path& out_dir);

std::string manifest_json(const DatasetManifest& m);

}  // namespace lnforge
