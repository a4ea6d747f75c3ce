#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "lnforge/sdf.hpp"
#include "lnforge/volume.hpp"

namespace lnforge {

/// Fixed-length latent vector.
struct LatentCode {
  std::vector<double> values;

  std::size_t dim() const noexcept { return values.size(); }
};

/// Rank-d linear encoder/decoder between grids of fixed dims and latent
/// codes. Rows of `basis` are orthonormal; decode clips to [-clip, clip].
/// Parameters are held in f32 so a fitted codec and its reloaded file
/// behave identically.
struct LinearCodec {
  Dims grid_dims;
  Spacing spacing;
  Unit unit = Unit::sdf;
  float clip = kDefaultTau;
  double norm_scale = 1.0;  // carried onto decoded TSDF grids
  std::vector<float> mean;             // V
  std::vector<float> basis;            // d x V, row-major
  std::vector<float> singular_values;  // d, descending

  std::size_t latent_dim() const noexcept { return singular_values.size(); }
  std::size_t voxel_count() const noexcept { return mean.size(); }
  std::span<const float> row(std::size_t r) const noexcept {
    return std::span<const float>(basis).subspan(r * voxel_count(), voxel_count());
  }
};

struct CodecFitOptions {
  double tolerance = 1e-8;  // relative change of each singular value
  int max_iterations = 1000;
};

/// Mean and top-d right singular directions of the centred data matrix.
LinearCodec fit_codec(std::span<const Volume> training, std::size_t d, float clip, const CodecFitOptions& opt = {});
LinearCodec fit_codec(std::span<const TsdfGrid> training, std::size_t d, const CodecFitOptions& opt = {});

LatentCode encode(const LinearCodec& c, std::span<const float> flat);
LatentCode encode(const LinearCodec& c, const Volume& v);
LatentCode encode(const LinearCodec& c, const TsdfGrid& t);

/// mean + basis^T z without clipping.
std::vector<double> decode_unclipped(const LinearCodec& c, const LatentCode& z);
Volume decode_volume(const LinearCodec& c, const LatentCode& z);
TsdfGrid decode(const LinearCodec& c, const LatentCode& z);

void save_codec(const LinearCodec& c, const std::filesystem::path& path);
LinearCodec load_codec(const std::filesystem::path& path);
std::string encode_codec(const LinearCodec& c);
LinearCodec decode_codec(std::string_view bytes);

}  // namespace lnforge
