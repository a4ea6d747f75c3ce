#include "lnforge/volume.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lnforge/error.hpp"

namespace lnforge {

bool Spacing::valid() const noexcept {
  return std::isfinite(sx) && std::isfinite(sy) && std::isfinite(sz) && sx > 0 && sy > 0 && sz > 0;
}

double Spacing::diagonal() const noexcept { return std::sqrt(sx * sx + sy * sy + sz * sz); }

bool Spacing::approx_equal(const Spacing& o, double tol) const noexcept {
  return std::abs(sx - o.sx) <= tol && std::abs(sy - o.sy) <= tol && std::abs(sz - o.sz) <= tol;
}

std::string_view unit_tag(Unit u) noexcept {
  switch (u) {
    case Unit::hu: return "HU";
    case Unit::sdf: return "SDF";
    case Unit::normalized: return "NORM";
    case Unit::mask: return "MASK";
  }
  return "HU";
}

Unit parse_unit(std::string_view tag) {
  if (tag == "HU") return Unit::hu;
  if (tag == "SDF") return Unit::sdf;
  if (tag == "NORM") return Unit::normalized;
  if (tag == "MASK") return Unit::mask;
  fail(Errc::malformed_header, "unit", "unknown unit tag '" + std::string(tag) + "'");
}

namespace {

void check_dims(const Dims& d) {
  if (d.nx < 0 || d.ny < 0 || d.nz < 0) fail(Errc::invalid_dims, "dims", "negative extent");
}

void check_spacing(const Spacing& s) {
  if (!s.valid()) fail(Errc::non_finite_spacing, "spacing", "spacing must be finite and positive");
}

}  // namespace

Volume::Volume(Dims dims, Spacing spacing, Unit unit, float fill)
    : dims_(dims), spacing_(spacing), unit_(unit) {
  check_dims(dims);
  check_spacing(spacing);
  values_.assign(dims.count(), fill);
}

Volume::Volume(Dims dims, Spacing spacing, Unit unit, std::vector<float> values)
    : dims_(dims), spacing_(spacing), unit_(unit), values_(std::move(values)) {
  check_dims(dims);
  check_spacing(spacing);
  if (values_.size() != dims.count())
    fail(Errc::payload_length_mismatch, "values",
         "expected " + std::to_string(dims.count()) + " voxels, got " + std::to_string(values_.size()));
}

void Volume::validate() const {
  if (!dims_.positive()) fail(Errc::invalid_dims, "dims", "all extents must be positive");
  check_spacing(spacing_);
  if (values_.size() != dims_.count()) fail(Errc::payload_length_mismatch, "values", "length differs from dims");
  for (float v : values_) {
    if (!std::isfinite(v)) fail(Errc::non_finite_voxel, "values", "non-finite voxel");
    if (unit_ == Unit::normalized && (v < -1.0f || v > 1.0f))
      fail(Errc::out_of_bounds, "values", "normalized voxel outside [-1, 1]");
    if (unit_ == Unit::mask && v != 0.0f && v != 1.0f) fail(Errc::out_of_bounds, "values", "mask voxel not 0/1");
  }
}

Mask::Mask(Dims dims, Spacing spacing) : dims_(dims), spacing_(spacing) {
  check_dims(dims);
  check_spacing(spacing);
  values_.assign(dims.count(), 0);
}

Mask::Mask(Dims dims, Spacing spacing, std::vector<std::uint8_t> values)
    : dims_(dims), spacing_(spacing), values_(std::move(values)) {
  check_dims(dims);
  check_spacing(spacing);
  if (values_.size() != dims.count()) fail(Errc::payload_length_mismatch, "values", "mask length differs from dims");
  for (auto& v : values_)
    if (v > 1) fail(Errc::out_of_bounds, "values", "mask voxel not 0/1");
}

std::size_t Mask::count() const noexcept {
  return static_cast<std::size_t>(std::count(values_.begin(), values_.end(), std::uint8_t{1}));
}

Volume mask_to_volume(const Mask& m) {
  std::vector<float> vals(m.size());
  std::transform(m.values().begin(), m.values().end(), vals.begin(), [](std::uint8_t b) { return b ? 1.0f : 0.0f; });
  return Volume(m.dims(), m.spacing(), Unit::mask, std::move(vals));
}

Mask volume_to_mask(const Volume& v) {
  std::vector<std::uint8_t> vals(v.size());
  for (std::size_t n = 0; n < v.size(); ++n) {
    const float x = v.values()[n];
    if (x != 0.0f && x != 1.0f) fail(Errc::out_of_bounds, "values", "mask voxel not 0/1");
    vals[n] = x == 1.0f ? 1 : 0;
  }
  return Mask(v.dims(), v.spacing(), std::move(vals));
}

Volume clamp_hu(const Volume& v, float lo, float hi) {
  if (!(lo < hi)) fail(Errc::invalid_argument, "lo/hi", "clamp window requires lo < hi");
  Volume out = v;
  for (float& x : out.values()) x = std::min(hi, std::max(lo, x));
  return out;
}

Volume normalize_hu(const Volume& v, float lo, float hi) {
  if (!(lo < hi)) fail(Errc::invalid_argument, "lo/hi", "normalization window requires lo < hi");
  Volume out = v;
  const double width = static_cast<double>(hi) - lo;
  for (float& x : out.values()) {
    const double c = std::min<double>(hi, std::max<double>(lo, x));
    const double y = 2.0 * (c - lo) / width - 1.0;
    x = static_cast<float>(std::clamp(y, -1.0, 1.0));
  }
  out.set_unit(Unit::normalized);
  return out;
}

float denormalize_value(float x, float lo, float hi) noexcept {
  const double c = std::clamp<double>(x, -1.0, 1.0);
  return static_cast<float>(lo + (c + 1.0) * 0.5 * (static_cast<double>(hi) - lo));
}

Volume denormalize_hu(const Volume& v, float lo, float hi) {
  if (!(lo < hi)) fail(Errc::invalid_argument, "lo/hi", "window requires lo < hi");
  Volume out = v;
  for (float& x : out.values()) x = denormalize_value(x, lo, hi);
  out.set_unit(Unit::hu);
  return out;
}

namespace {

template <class Grid>
void check_box(const Grid& g, const Index3& corner, const Index3& size) {
  const auto& d = g.dims();
  if (size.i < 0 || size.j < 0 || size.k < 0) fail(Errc::out_of_bounds, "size", "negative patch size");
  if (corner.i < 0 || corner.j < 0 || corner.k < 0 || corner.i + size.i > d.nx || corner.j + size.j > d.ny ||
      corner.k + size.k > d.nz)
    fail(Errc::out_of_bounds, "corner", "patch extends outside the volume");
}

template <class Out, class Grid>
Out extract_impl(const Grid& g, const Index3& corner, const Index3& size, Out out) {
  for (std::int64_t k = 0; k < size.k; ++k)
    for (std::int64_t j = 0; j < size.j; ++j)
      for (std::int64_t i = 0; i < size.i; ++i)
        out.values()[out.dims().offset(i, j, k)] = g.values()[g.dims().offset(corner.i + i, corner.j + j, corner.k + k)];
  return out;
}

}  // namespace

Volume extract_patch(const Volume& v, const Index3& corner, const Index3& size) {
  check_box(v, corner, size);
  return extract_impl(v, corner, size, Volume(Dims{size.i, size.j, size.k}, v.spacing(), v.unit()));
}

Mask extract_patch(const Mask& m, const Index3& corner, const Index3& size) {
  check_box(m, corner, size);
  return extract_impl(m, corner, size, Mask(Dims{size.i, size.j, size.k}, m.spacing()));
}

Volume paste_patch(const Volume& v, const Volume& patch, const Index3& corner) {
  const Dims& pd = patch.dims();
  if (pd.count() == 0) return v;
  if (!v.spacing().approx_equal(patch.spacing(), 1e-9))
    fail(Errc::spacing_mismatch, "spacing", "patch spacing differs from target volume");
  check_box(v, corner, Index3{pd.nx, pd.ny, pd.nz});
  Volume out = v;
  for (std::int64_t k = 0; k < pd.nz; ++k)
    for (std::int64_t j = 0; j < pd.ny; ++j)
      for (std::int64_t i = 0; i < pd.nx; ++i) out.at(corner.i + i, corner.j + j, corner.k + k) = patch.at(i, j, k);
  return out;
}

}  // namespace lnforge
