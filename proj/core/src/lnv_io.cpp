#include "lnforge/lnv_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "lnforge/error.hpp"

namespace lnforge {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::uint32_t to_le(std::uint32_t x) {
  if constexpr (std::endian::native == std::endian::little) return x;
  return ((x & 0xFFu) << 24) | ((x & 0xFF00u) << 8) | ((x >> 8) & 0xFF00u) | (x >> 24);
}

}  // namespace

void append_f32(std::string& out, std::span<const float> values) {
  const std::size_t start = out.size();
  out.resize(start + values.size() * 4);
  for (std::size_t n = 0; n < values.size(); ++n) {
    const std::uint32_t bits = to_le(std::bit_cast<std::uint32_t>(values[n]));
    std::memcpy(out.data() + start + 4 * n, &bits, 4);
  }
}

void append_f32(std::string& out, std::span<const double> values) {
  std::vector<float> tmp(values.begin(), values.end());
  append_f32(out, std::span<const float>(tmp));
}

std::vector<float> parse_f32(std::string_view bytes, std::size_t count, std::string_view field) {
  if (bytes.size() != count * 4)
    fail(Errc::payload_length_mismatch, std::string(field),
         "payload length mismatch: expected " + std::to_string(count * 4) + " bytes, got " +
             std::to_string(bytes.size()));
  std::vector<float> out(count);
  for (std::size_t n = 0; n < count; ++n) {
    std::uint32_t bits;
    std::memcpy(&bits, bytes.data() + 4 * n, 4);
    out[n] = std::bit_cast<float>(to_le(bits));
  }
  return out;
}

std::string encode_lnv(const Volume& v, const HeaderExtras& extras) {
  if (!v.dims().positive()) fail(Errc::invalid_dims, "dims", "LNV requires positive dims");
  if (!v.spacing().valid()) fail(Errc::non_finite_spacing, "spacing", "non-finite spacing");
  for (float x : v.values())
    if (!std::isfinite(x)) fail(Errc::non_finite_voxel, "values", "non-finite voxel");
  ordered_json h;
  h["magic"] = "LNV1";
  h["dims"] = {v.dims().nx, v.dims().ny, v.dims().nz};
  h["spacing"] = {v.spacing().sx, v.spacing().sy, v.spacing().sz};
  h["dtype"] = "f32";
  h["unit"] = std::string(unit_tag(v.unit()));
  for (const auto& [key, value] : extras) h[key] = value;
  std::string out = h.dump();
  out.push_back('\n');
  append_f32(out, v.values());
  return out;
}

LnvFile decode_lnv(std::string_view bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string_view::npos) fail(Errc::malformed_header, "header", "missing header terminator");
  json h;
  try {
    h = json::parse(bytes.substr(0, nl));
  } catch (const json::exception& e) {
    fail(Errc::malformed_header, "header", e.what());
  }
  if (!h.is_object()) fail(Errc::malformed_header, "header", "header is not a JSON object");
  if (!h.contains("magic") || h["magic"] != "LNV1") fail(Errc::malformed_header, "magic", "expected LNV1");
  if (!h.contains("dtype") || h["dtype"] != "f32") fail(Errc::malformed_header, "dtype", "expected f32");
  if (!h.contains("unit") || !h["unit"].is_string()) fail(Errc::malformed_header, "unit", "missing unit");

  const auto& jd = h.contains("dims") ? h["dims"] : json();
  if (!jd.is_array() || jd.size() != 3) fail(Errc::malformed_header, "dims", "expected three integers");
  Dims dims;
  std::int64_t* dp[3] = {&dims.nx, &dims.ny, &dims.nz};
  for (int a = 0; a < 3; ++a) {
    if (!jd[a].is_number_integer() || jd[a].get<std::int64_t>() <= 0)
      fail(Errc::invalid_dims, "dims", "dims must be positive integers");
    *dp[a] = jd[a].get<std::int64_t>();
  }

  const auto& js = h.contains("spacing") ? h["spacing"] : json();
  if (!js.is_array() || js.size() != 3) fail(Errc::malformed_header, "spacing", "expected three numbers");
  Spacing spacing;
  double* sp[3] = {&spacing.sx, &spacing.sy, &spacing.sz};
  for (int a = 0; a < 3; ++a) {
    if (!js[a].is_number()) fail(Errc::non_finite_spacing, "spacing", "spacing must be finite numbers");
    *sp[a] = js[a].get<double>();
  }
  if (!spacing.valid()) fail(Errc::non_finite_spacing, "spacing", "spacing must be finite and positive");

  const Unit unit = parse_unit(h["unit"].get<std::string>());
  auto values = parse_f32(bytes.substr(nl + 1), dims.count(), "payload");
  for (float x : values)
    if (!std::isfinite(x)) fail(Errc::non_finite_voxel, "payload", "non-finite voxel");

  LnvFile out{Volume(dims, spacing, unit, std::move(values)), {}};
  for (const auto& [key, value] : h.items()) {
    if (key == "magic" || key == "dims" || key == "spacing" || key == "dtype" || key == "unit") continue;
    if (!value.is_number()) fail(Errc::malformed_header, key, "extra header keys must be numeric");
    out.extras[key] = value.get<double>();
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, path.string(), "cannot open file for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io, path.string(), "cannot open file for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(Errc::io, path.string(), "write failed");
}

void write_lnv(const std::filesystem::path& path, const Volume& v, const HeaderExtras& extras) {
  write_file(path, encode_lnv(v, extras));
}

LnvFile read_lnv(const std::filesystem::path& path) { return decode_lnv(read_file(path)); }

Volume load_volume(const std::filesystem::path& path) { return read_lnv(path).volume; }

void save_volume(const Volume& v, const std::filesystem::path& path) { write_lnv(path, v); }

Mask load_mask(const std::filesystem::path& path) {
  auto f = read_lnv(path);
  if (f.volume.unit() != Unit::mask) fail(Errc::malformed_header, "unit", "expected MASK unit in " + path.string());
  return volume_to_mask(f.volume);
}

void save_mask(const Mask& m, const std::filesystem::path& path) { write_lnv(path, mask_to_volume(m)); }

}  // namespace lnforge
