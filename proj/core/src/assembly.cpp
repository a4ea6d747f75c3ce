#include <algorithm>
#include <string>

#include "json.hpp"
#include "lnforge/error.hpp"
#include "lnforge/lnv_io.hpp"
#include "lnforge/sdf.hpp"
#include "lnforge/synthesis.hpp"

namespace lnforge {

namespace fs = std::filesystem;

namespace {

bool footprint_free(const Mask& lesion, const Index3& corner, const Mask& blocked) {
  const Dims& pd = lesion.dims();
  const Dims& vd = blocked.dims();
  for (std::size_t n = 0; n < lesion.size(); ++n) {
    if (!lesion.values()[n]) continue;
    const Index3 p = pd.index(n);
    const Index3 q{corner.i + p.i, corner.j + p.j, corner.k + p.k};
    if (!vd.contains(q) || blocked.at(q)) return false;
  }
  return true;
}

nlohmann::ordered_json index_json(const Index3& p) { return nlohmann::ordered_json::array({p.i, p.j, p.k}); }

}  // namespace

DatasetManifest assemble_dataset(std::span<const Background> backgrounds, std::span<const std::size_t> counts,
                                 const ShapeGenerator& shapes, const TextureGenerator& textures,
                                 const AssemblyConfig& cfg, const fs::path& out_dir) {
  cfg.placement.validate();
  if (counts.size() != backgrounds.size())
    fail(Errc::invalid_argument, "counts", "one lesion count per background is required");
  if (!(cfg.long_axis_lo < cfg.long_axis_hi)) fail(Errc::invalid_argument, "long_axis", "lo must be below hi");

  std::error_code ec;
  fs::create_directories(out_dir / "lesions", ec);
  if (!ec) fs::create_directories(out_dir / "shapes", ec);
  if (ec) fail(Errc::io, "out_dir", "cannot create " + out_dir.string() + ": " + ec.message());

  DatasetManifest manifest;
  manifest.seed = cfg.seed;
  manifest.config_hash = cfg.config_hash;
  manifest.checkpoint_hashes = cfg.checkpoint_hashes;
  manifest.placement = cfg.placement;

  const Dims patch = textures.patch_dims();
  const PlacementConfig& pc = cfg.placement;
  std::uint64_t entry_index = 0;
  for (std::size_t b = 0; b < backgrounds.size(); ++b) {
    const Background& bg = backgrounds[b];
    if (!(bg.region.dims() == bg.ct.dims())) fail(Errc::dims_mismatch, "region", "region of " + bg.id);

    Volume composite = bg.ct;
    Mask existing(bg.ct.dims(), bg.ct.spacing());
    const SoftTissueScan scan = counts[b] > 0 ? scan_soft_tissue(bg.ct, bg.region, pc) : SoftTissueScan{};

    for (std::size_t n = 0; n < counts[b]; ++n, ++entry_index) {
      const std::uint64_t shape_seed = mix_seed(cfg.seed, 2 * entry_index);
      const std::uint64_t texture_seed = mix_seed(cfg.seed, 2 * entry_index + 1);
      Rng shape_rng(shape_seed);
      Rng texture_rng(texture_seed);
      Rng place_rng = Rng::derive(shape_seed, 1);

      const std::vector<PlacementCandidate> candidates = apply_exclusion(scan, existing, pc);
      const Mask blocked = dilate(existing, pc.margin);

      std::optional<ShapeSample> shape;
      PlacementCandidate chosen;
      double target = 0.0;
      for (int attempt = 0; attempt < pc.max_retries && !shape; ++attempt) {
        target = sample_target_long_axis(place_rng, cfg.long_axis_lo, cfg.long_axis_hi);
        std::vector<const PlacementCandidate*> pool;
        for (const auto& c : candidates)
          if (c.max_long_axis_mm >= target) pool.push_back(&c);
        if (pool.empty()) continue;
        ShapeSample s = synth_shape(shapes, shape_rng, target, patch, cfg.shape);
        while (!pool.empty()) {
          const auto pick = static_cast<std::size_t>(place_rng.below(pool.size()));
          const PlacementCandidate& c = *pool[pick];
          if (footprint_free(s.mask, patch_corner(c.center, patch), blocked)) {
            chosen = c;
            shape = std::move(s);
            break;
          }
          pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
        }
      }
      if (!shape)
        fail(Errc::no_candidate, "placement",
             "no qualifying candidate in background " + bg.id + " after " + std::to_string(pc.max_retries) +
                 " target draws");

      const Volume texture = synth_texture(textures, shape->mask, texture_rng);
      composite = blend(composite, shape->mask, texture, chosen.center, pc.feather_mm, pc.hu_lo, pc.hu_hi);

      const Index3 corner = patch_corner(chosen.center, patch);
      for (std::size_t v = 0; v < shape->mask.size(); ++v) {
        if (!shape->mask.values()[v]) continue;
        const Index3 p = patch.index(v);
        existing.set({corner.i + p.i, corner.j + p.j, corner.k + p.k}, true);
      }

      const Box3 box = *bounding_box(shape->mask);
      const Index3 size{box.hi.i - box.lo.i + 1, box.hi.j - box.lo.j + 1, box.hi.k - box.lo.k + 1};
      const Index3 lesion_corner{corner.i + box.lo.i, corner.j + box.lo.j, corner.k + box.lo.k};
      const std::string lesion_file = "lesions/" + bg.id + "_lesion_" + std::to_string(n) + ".lnv";
      write_lnv(out_dir / lesion_file, mask_to_volume(extract_patch(shape->mask, box.lo, size)),
                {{"corner_i", static_cast<double>(lesion_corner.i)},
                 {"corner_j", static_cast<double>(lesion_corner.j)},
                 {"corner_k", static_cast<double>(lesion_corner.k)}});

      const std::string shape_file = "shapes/" + bg.id + "_shape_" + std::to_string(n) + ".lnv";
      save_mask(shape->canonical, out_dir / shape_file);

      ManifestEntry e;
      e.background = bg.id;
      e.center = chosen.center;
      e.target_mm = target;
      e.realized_mm = shape->long_axis_mm;
      e.scale_factor = shape->scale_factor;
      e.shape_seed = shape_seed;
      e.texture_seed = texture_seed;
      e.max_long_axis_mm = chosen.max_long_axis_mm;
      e.soft_tissue_fraction = chosen.soft_tissue_fraction;
      e.lesion_corner = lesion_corner;
      e.volume_file = bg.id + "_volume.lnv";
      e.mask_file = bg.id + "_mask.lnv";
      e.lesion_file = lesion_file;
      e.shape_file = shape_file;
      manifest.entries.push_back(std::move(e));
    }

    ManifestBackground mb{bg.id, bg.ct_path, bg.region_path, bg.id + "_volume.lnv", bg.id + "_mask.lnv"};
    save_volume(composite, out_dir / mb.volume_file);
    save_mask(existing, out_dir / mb.mask_file);
    manifest.backgrounds.push_back(std::move(mb));
  }

  write_file(out_dir / "manifest.json", manifest_json(manifest));
  return manifest;
}

std::string manifest_json(const DatasetManifest& m) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["version"] = m.version;
  j["seed"] = m.seed;
  j["config_hash"] = m.config_hash;
  j["checkpoint_hashes"] = m.checkpoint_hashes;
  const PlacementConfig& p = m.placement;
  j["placement"] = {{"hu_window", {p.hu_lo, p.hu_hi}},
                    {"min_soft_fraction", p.min_soft_fraction},
                    {"margin", p.margin},
                    {"stride", p.stride},
                    {"radius_ladder_mm", p.radius_ladder_mm},
                    {"feather_mm", p.feather_mm}};
  ordered_json entries = ordered_json::array();
  for (const auto& e : m.entries) {
    ordered_json o;
    o["background"] = e.background;
    o["center"] = index_json(e.center);
    o["target_mm"] = e.target_mm;
    o["realized_mm"] = e.realized_mm;
    o["scale_factor"] = e.scale_factor;
    o["shape_seed"] = e.shape_seed;
    o["texture_seed"] = e.texture_seed;
    o["max_long_axis_mm"] = e.max_long_axis_mm;
    o["soft_tissue_fraction"] = e.soft_tissue_fraction;
    o["lesion_corner"] = index_json(e.lesion_corner);
    o["files"] = {{"volume", e.volume_file}, {"mask", e.mask_file}, {"lesion", e.lesion_file}, {"shape", e.shape_file}};
    entries.push_back(std::move(o));
  }
  j["entries"] = std::move(entries);
  ordered_json bgs = ordered_json::array();
  for (const auto& b : m.backgrounds)
    bgs.push_back({{"id", b.id}, {"ct", b.ct}, {"region", b.region}, {"volume", b.volume_file}, {"mask", b.mask_file}});
  j["backgrounds"] = std::move(bgs);
  return j.dump(2) + "\n";
}

}  // namespace lnforge
