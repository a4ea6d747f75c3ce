#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "lnforge/volume.hpp"

namespace lnforge {

/// Numeric header keys beyond the core set, e.g. {"tau": 0.2, "norm_scale": 10}.
using HeaderExtras = std::map<std::string, double>;

/// Decoded LNV file: one JSON header line followed by a raw little-endian
/// f32 payload in x-fastest order.
struct LnvFile {
  Volume volume;
  HeaderExtras extras;
};

std::string encode_lnv(const Volume& v, const HeaderExtras& extras = {});
LnvFile decode_lnv(std::string_view bytes);

void write_lnv(const std::filesystem::path& path, const Volume& v, const HeaderExtras& extras = {});
LnvFile read_lnv(const std::filesystem::path& path);

Volume load_volume(const std::filesystem::path& path);
void save_volume(const Volume& v, const std::filesystem::path& path);

Mask load_mask(const std::filesystem::path& path);
void save_mask(const Mask& m, const std::filesystem::path& path);

/// Whole-file helpers shared by the checkpoint formats.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

/// f32 little-endian payload helpers.
void append_f32(std::string& out, std::span<const float> values);
void append_f32(std::string& out, std::span<const double> values);
std::vector<float> parse_f32(std::string_view bytes, std::size_t count, std::string_view field);

}  // namespace lnforge
