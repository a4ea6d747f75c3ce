#include <cmath>

#include "lnforge/diffusion.hpp"
#include "lnforge/error.hpp"

namespace lnforge {

NoiseSchedule::NoiseSchedule(int steps, double beta_start, double beta_end)
    : beta_start_(beta_start), beta_end_(beta_end) {
  if (steps < 2) fail(Errc::invalid_argument, "T", "schedule needs at least two steps");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
    fail(Errc::invalid_argument, "beta", "require 0 < beta_start <= beta_end < 1");
  const auto n = static_cast<std::size_t>(steps);
  beta_.resize(n);
  alpha_.resize(n);
  alpha_bar_.resize(n);
  double acc = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double frac = static_cast<double>(i) / static_cast<double>(n - 1);
    beta_[i] = beta_start + (beta_end - beta_start) * frac;
    alpha_[i] = 1.0 - beta_[i];
    acc *= alpha_[i];
    alpha_bar_[i] = acc;
  }
}

NoiseSchedule make_schedule(int steps, double beta_start, double beta_end) {
  return NoiseSchedule(steps, beta_start, beta_end);
}

namespace {
void check_step(int t, const NoiseSchedule& s) {
  if (t < 1 || t > s.steps()) fail(Errc::out_of_bounds, "t", "timestep " + std::to_string(t) + " outside [1, T]");
}
}  // namespace

LatentCode forward_sample(const LatentCode& z0, int t, std::span<const double> eps, const NoiseSchedule& s) {
  check_step(t, s);
  if (eps.size() != z0.dim()) fail(Errc::dims_mismatch, "eps", "noise dimension differs from latent");
  const double a = std::sqrt(s.alpha_bar(t));
  const double b = std::sqrt(1.0 - s.alpha_bar(t));
  LatentCode out{std::vector<double>(z0.dim())};
  for (std::size_t i = 0; i < z0.dim(); ++i) out.values[i] = a * z0.values[i] + b * eps[i];
  return out;
}

LatentCode forward_step(const LatentCode& z_prev, int t, std::span<const double> eps, const NoiseSchedule& s) {
  check_step(t, s);
  if (eps.size() != z_prev.dim()) fail(Errc::dims_mismatch, "eps", "noise dimension differs from latent");
  const double a = std::sqrt(1.0 - s.beta(t));
  const double b = std::sqrt(s.beta(t));
  LatentCode out{std::vector<double>(z_prev.dim())};
  for (std::size_t i = 0; i < z_prev.dim(); ++i) out.values[i] = a * z_prev.values[i] + b * eps[i];
  return out;
}

}  // namespace lnforge
