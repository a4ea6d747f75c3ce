#include "lnforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "lnforge/error.hpp"
#include "lnforge/sdf.hpp"

namespace lnforge {

void FeatureSet::add(std::span<const double> v) {
  if (dim == 0) dim = v.size();
  if (v.size() != dim) fail(Errc::dims_mismatch, "features", "feature length differs from set dimension");
  rows.insert(rows.end(), v.begin(), v.end());
}

double euclidean(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) {
    const double d = a[n] - b[n];
    s += d * d;
  }
  return std::sqrt(s);
}

namespace {

void check_set(const FeatureSet& s, std::size_t k, const char* name) {
  if (k == 0) fail(Errc::invalid_argument, "k", "k must be positive");
  if (s.size() < k + 1)
    fail(Errc::too_few_samples, name, "need at least k+1 = " + std::to_string(k + 1) + " rows");
  for (double v : s.rows)
    if (!std::isfinite(v)) fail(Errc::non_finite_voxel, name, "non-finite feature");
}

double coverage(const FeatureSet& manifold, const FeatureSet& probes, std::size_t k) {
  check_set(manifold, k, "manifold");
  check_set(probes, k, "probes");
  if (manifold.dim != probes.dim) fail(Errc::dims_mismatch, "features", "feature sets differ in dimension");
  const auto radii = knn_radius(manifold, k);
  std::size_t covered = 0;
  for (std::size_t p = 0; p < probes.size(); ++p) {
    for (std::size_t m = 0; m < manifold.size(); ++m) {
      if (euclidean(probes.row(p), manifold.row(m)) <= radii[m]) {
        ++covered;
        break;
      }
    }
  }
  return static_cast<double>(covered) / static_cast<double>(probes.size());
}

}  // namespace

std::vector<double> knn_radius(const FeatureSet& s, std::size_t k) {
  check_set(s, k, "features");
  const std::size_t n = s.size();
  std::vector<double> radii(n);
  std::vector<double> dist;
  dist.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    dist.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) dist.push_back(euclidean(s.row(i), s.row(j)));
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k - 1), dist.end());
    radii[i] = dist[k - 1];
  }
  return radii;
}

double improved_precision(const FeatureSet& real, const FeatureSet& fake, std::size_t k) {
  return coverage(real, fake, k);
}

double improved_recall(const FeatureSet& real, const FeatureSet& fake, std::size_t k) {
  return improved_precision(fake, real, k);
}

IprReport evaluate_ipr(const FeatureSet& real, const FeatureSet& fake, std::size_t k) {
  return IprReport{improved_precision(real, fake, k), improved_recall(real, fake, k), k, real.size(), fake.size()};
}

std::string ipr_json(const IprReport& r) {
  nlohmann::ordered_json j;
  j["ip"] = r.ip;
  j["ir"] = r.ir;
  j["k"] = r.k;
  j["n_real"] = r.n_real;
  j["n_fake"] = r.n_fake;
  return j.dump(2) + "\n";
}

LongAxisReport long_axis_report(std::span<const double> lengths_mm, std::size_t bins) {
  if (lengths_mm.empty()) fail(Errc::invalid_argument, "masks", "long-axis report of an empty list");
  if (bins == 0) fail(Errc::invalid_argument, "bins", "need at least one bin");
  LongAxisReport r;
  r.count = lengths_mm.size();
  r.min_mm = *std::min_element(lengths_mm.begin(), lengths_mm.end());
  r.max_mm = *std::max_element(lengths_mm.begin(), lengths_mm.end());
  const double width = (r.max_mm - r.min_mm) / static_cast<double>(bins);
  r.bins.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    r.bins[b].lo = r.min_mm + width * static_cast<double>(b);
    r.bins[b].hi = b + 1 == bins ? r.max_mm : r.min_mm + width * static_cast<double>(b + 1);
  }
  std::size_t in_range = 0;
  for (double v : lengths_mm) {
    std::size_t b = 0;
    if (width > 0.0) b = std::min(bins - 1, static_cast<std::size_t>((v - r.min_mm) / width));
    ++r.bins[b].count;
    if (v >= 3.0 && v <= 10.0) ++in_range;
  }
  r.fraction_3_10 = static_cast<double>(in_range) / static_cast<double>(r.count);
  return r;
}

LongAxisReport long_axis_report(std::span<const Mask> masks, std::size_t bins) {
  std::vector<double> lengths;
  lengths.reserve(masks.size());
  for (const auto& m : masks) lengths.push_back(long_axis_mm(m));
  return long_axis_report(lengths, bins);
}

std::string histogram_csv(const LongAxisReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << "bin_lo,bin_hi,count\n";
  for (const auto& b : r.bins) out << b.lo << ',' << b.hi << ',' << b.count << '\n';
  return out.str();
}

std::string summary_json(const LongAxisReport& r) {
  nlohmann::ordered_json j;
  j["count"] = r.count;
  j["min_mm"] = r.min_mm;
  j["max_mm"] = r.max_mm;
  j["fraction_3_10"] = r.fraction_3_10;
  return j.dump(2) + "\n";
}

}  // namespace lnforge
