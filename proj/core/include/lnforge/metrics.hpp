#pragma once

#include <span>
#include <string>
#include <vector>

#include "lnforge/volume.hpp"

namespace lnforge {

enum class SetLabel { real, fake };

/// N x dim feature matrix, rows are samples.
struct FeatureSet {
  std::size_t dim = 0;
  std::vector<double> rows;
  SetLabel label = SetLabel::real;

  std::size_t size() const noexcept { return dim == 0 ? 0 : rows.size() / dim; }
  std::span<const double> row(std::size_t r) const noexcept {
    return std::span<const double>(rows).subspan(r * dim, dim);
  }
  void add(std::span<const double> v);
};

double euclidean(std::span<const double> a, std::span<const double> b);

/// Distance from each row to its k-th nearest other row.
std::vector<double> knn_radius(const FeatureSet& s, std::size_t k);

/// Fraction of fake rows inside at least one real k-NN ball.
double improved_precision(const FeatureSet& real, const FeatureSet& fake, std::size_t k);
/// Fraction of real rows inside at least one fake k-NN ball.
double improved_recall(const FeatureSet& real, const FeatureSet& fake, std::size_t k);

struct IprReport {
  double ip = 0.0;
  double ir = 0.0;
  std::size_t k = 0;
  std::size_t n_real = 0;
  std::size_t n_fake = 0;
};

IprReport evaluate_ipr(const FeatureSet& real, const FeatureSet& fake, std::size_t k);
std::string ipr_json(const IprReport& r);

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
};

struct LongAxisReport {
  std::vector<HistogramBin> bins;
  std::size_t count = 0;
  double min_mm = 0.0;
  double max_mm = 0.0;
  double fraction_3_10 = 0.0;  // share of samples with 3 <= L <= 10 mm
};

LongAxisReport long_axis_report(std::span<const double> lengths_mm, std::size_t bins);
LongAxisReport long_axis_report(std::span<const Mask> masks, std::size_t bins);
std::string histogram_csv(const LongAxisReport& r);
std::string summary_json(const LongAxisReport& r);

}  // namespace lnforge
