#pragma once

#include <vector>

#include "lnforge/rng.hpp"
#include "lnforge/volume.hpp"

namespace lnforge {

struct PlacementConfig {
  float hu_lo = -175.0f;
  float hu_hi = 250.0f;
  double min_soft_fraction = 0.9;
  int margin = 3;  // voxels of dilation around existing lesions
  int stride = 4;
  std::vector<double> radius_ladder_mm{2, 4, 6, 8, 10, 12, 14, 16};
  double feather_mm = 2.0;
  int max_retries = 50;

  void validate() const;
};

struct PlacementCandidate {
  Index3 center;
  double max_long_axis_mm = 0.0;
  double soft_tissue_fraction = 0.0;  // at the largest admitted probe radius
};

/// Voxels of `m` grown by a Euclidean ball of `margin` voxels.
Mask dilate(const Mask& m, int margin);

/// Fraction of in-bounds voxels within radius_mm of `center` whose HU lies in [lo, hi].
double soft_tissue_fraction(const Volume& ct, const Index3& center, double radius_mm, float lo, float hi);

/// Per-centre soft-tissue part of the heuristic, reusable while lesions are
/// added to the same background.
struct SoftTissueScan {
  std::vector<Index3> centers;
  std::vector<int> rung;                  // largest admitted ladder index, prefix-monotone
  std::vector<std::vector<double>> fraction;  // per admitted rung
};

SoftTissueScan scan_soft_tissue(const Volume& ct, const Mask& region, const PlacementConfig& cfg);

/// Combines a scan with the exclusion zone around `existing`.
std::vector<PlacementCandidate> apply_exclusion(const SoftTissueScan& scan, const Mask& existing,
                                                const PlacementConfig& cfg);

/// Stride-grid voxels of `region` whose probe balls satisfy the HU-window and
/// non-overlap priors, with the largest admissible lesion size for each.
std::vector<PlacementCandidate> find_candidates(const Volume& ct, const Mask& region, const Mask& existing,
                                                const PlacementConfig& cfg);

double sample_target_long_axis(Rng& rng, double lo_mm = 1.7, double hi_mm = 30.0);

}  // namespace lnforge
