#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace lnforge {

/// Voxel index triple.
struct Index3 {
  std::int64_t i = 0;
  std::int64_t j = 0;
  std::int64_t k = 0;
  friend bool operator==(const Index3&, const Index3&) = default;
};

struct Dims {
  std::int64_t nx = 0;
  std::int64_t ny = 0;
  std::int64_t nz = 0;

  std::size_t count() const noexcept {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
  }
  bool positive() const noexcept { return nx > 0 && ny > 0 && nz > 0; }
  bool contains(const Index3& p) const noexcept {
    return p.i >= 0 && p.j >= 0 && p.k >= 0 && p.i < nx && p.j < ny && p.k < nz;
  }
  /// x-fastest linear offset.
  std::size_t offset(std::int64_t i, std::int64_t j, std::int64_t k) const noexcept {
    return static_cast<std::size_t>(i + nx * (j + ny * k));
  }
  std::size_t offset(const Index3& p) const noexcept { return offset(p.i, p.j, p.k); }
  Index3 index(std::size_t off) const noexcept {
    const auto o = static_cast<std::int64_t>(off);
    return {o % nx, (o / nx) % ny, o / (nx * ny)};
  }
  friend bool operator==(const Dims&, const Dims&) = default;
};

/// Millimetres per voxel along x, y, z.
struct Spacing {
  double sx = 1.0;
  double sy = 1.0;
  double sz = 1.0;

  bool valid() const noexcept;
  double mean() const noexcept { return (sx + sy + sz) / 3.0; }
  /// Length of one voxel diagonal in mm.
  double diagonal() const noexcept;
  bool approx_equal(const Spacing& o, double tol = 1e-9) const noexcept;
  friend bool operator==(const Spacing&, const Spacing&) = default;
};

enum class Unit { hu, sdf, normalized, mask };

std::string_view unit_tag(Unit u) noexcept;  // "HU", "SDF", "NORM", "MASK"
Unit parse_unit(std::string_view tag);

/// Dense float grid in x-fastest order. Values are owned; operations below
/// return new volumes rather than mutating their inputs.
class Volume {
public:
  Volume() = default;
  Volume(Dims dims, Spacing spacing, Unit unit, float fill = 0.0f);
  Volume(Dims dims, Spacing spacing, Unit unit, std::vector<float> values);

  const Dims& dims() const noexcept { return dims_; }
  const Spacing& spacing() const noexcept { return spacing_; }
  Unit unit() const noexcept { return unit_; }
  void set_unit(Unit u) noexcept { unit_ = u; }

  std::span<const float> values() const noexcept { return values_; }
  std::span<float> values() noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }

  float at(std::int64_t i, std::int64_t j, std::int64_t k) const noexcept { return values_[dims_.offset(i, j, k)]; }
  float& at(std::int64_t i, std::int64_t j, std::int64_t k) noexcept { return values_[dims_.offset(i, j, k)]; }
  float at(const Index3& p) const noexcept { return values_[dims_.offset(p)]; }
  float& at(const Index3& p) noexcept { return values_[dims_.offset(p)]; }

  bool empty() const noexcept { return values_.empty(); }

  /// Throws Error on any violated invariant (length, spacing, finiteness,
  /// normalized range).
  void validate() const;

private:
  Dims dims_;
  Spacing spacing_;
  Unit unit_ = Unit::hu;
  std::vector<float> values_;
};

/// Binary occupancy grid.
class Mask {
public:
  Mask() = default;
  Mask(Dims dims, Spacing spacing);
  Mask(Dims dims, Spacing spacing, std::vector<std::uint8_t> values);

  const Dims& dims() const noexcept { return dims_; }
  const Spacing& spacing() const noexcept { return spacing_; }
  std::span<const std::uint8_t> values() const noexcept { return values_; }
  std::span<std::uint8_t> values() noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }

  bool at(std::int64_t i, std::int64_t j, std::int64_t k) const noexcept { return values_[dims_.offset(i, j, k)] != 0; }
  bool at(const Index3& p) const noexcept { return values_[dims_.offset(p)] != 0; }
  void set(const Index3& p, bool v) noexcept { values_[dims_.offset(p)] = v ? 1 : 0; }

  std::size_t count() const noexcept;
  friend bool operator==(const Mask&, const Mask&) = default;

private:
  Dims dims_;
  Spacing spacing_;
  std::vector<std::uint8_t> values_;
};

Volume mask_to_volume(const Mask& m);
/// Accepts exactly 0.0 / 1.0 voxels.
Mask volume_to_mask(const Volume& v);

Volume clamp_hu(const Volume& v, float lo, float hi);
/// Clamp then affine map [lo, hi] -> [-1, 1].
Volume normalize_hu(const Volume& v, float lo, float hi);
/// Inverse affine map [-1, 1] -> [lo, hi].
Volume denormalize_hu(const Volume& v, float lo, float hi);
float denormalize_value(float x, float lo, float hi) noexcept;

/// Copy of the box [corner, corner + size). A size with any zero component
/// yields an empty volume.
Volume extract_patch(const Volume& v, const Index3& corner, const Index3& size);
Mask extract_patch(const Mask& m, const Index3& corner, const Index3& size);

Volume paste_patch(const Volume& v, const Volume& patch, const Index3& corner);

}  // namespace lnforge
