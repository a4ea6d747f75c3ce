#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lnforge/placement.hpp"
#include "lnforge/volume.hpp"

namespace lnforge::cli {

/// Every tunable of the pipeline. Loaded from an INI file with sections
/// [general] [paths] [geometry] [codec] [schedule] [training] [placement]
/// [long_axis] [metric] [phantom]; later sources override earlier ones.
struct PipelineConfig {
  std::uint64_t seed = 0;

  std::string data_dir;
  std::string checkpoint_dir;
  std::string out_dir;

  Dims shape_dims{20, 20, 20};
  Dims patch_dims{36, 36, 36};
  double spacing_mm = 1.0;
  double tau = 0.2;
  double norm_scale = 0.0;  // 0 selects half the shortest grid extent

  int shape_latent = 32;
  int texture_latent = 32;
  int cond_latent = 32;

  int schedule_steps = 200;
  double beta_start = 1e-4;
  double beta_end = 0.02;

  double lr = 1e-3;
  int steps = 3000;
  int batch = 64;
  std::vector<int> hidden{128, 128};
  double lambda = 1.0;
  double sigma_adapter = 0.25;
  int adapter_steps = 300;
  int adapter_batch = 4;
  double adapter_lr = 3e-3;
  int adapter_channels = 8;
  std::string adapter_norm = "l1";
  int adapter_pairs = 1;
  int texture_steps = 3000;
  int texture_batch = 64;
  double texture_lr = 1e-3;

  PlacementConfig placement;
  int max_shape_tries = 10;

  double long_axis_lo = 1.7;
  double long_axis_hi = 30.0;
  int bins = 20;

  int k = 3;

  Dims background_dims{64, 64, 48};

  /// Throws Error(config) naming the offending "section.key".
  void validate() const;
};

/// Applies "section.key" = value; rejects unknown keys and malformed values.
void set_value(PipelineConfig& cfg, const std::string& dotted_key, const std::string& value);

/// Reads an INI file over the current values.
void load_ini(PipelineConfig& cfg, const std::filesystem::path& path);

/// Canonical INI text of every key in fixed order.
std::string dump_config(const PipelineConfig& cfg);

/// SHA-256 of the canonical dump without the [paths] section, so that the
/// digest identifies the computation rather than where files live.
std::string config_hash(const PipelineConfig& cfg);

}  // namespace lnforge::cli
