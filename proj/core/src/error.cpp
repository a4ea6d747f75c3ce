#include "lnforge/error.hpp"

namespace lnforge {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::io: return "io";
    case Errc::malformed_header: return "malformed_header";
    case Errc::payload_length_mismatch: return "payload_length_mismatch";
    case Errc::non_finite_spacing: return "non_finite_spacing";
    case Errc::non_finite_voxel: return "non_finite_voxel";
    case Errc::invalid_dims: return "invalid_dims";
    case Errc::out_of_bounds: return "out_of_bounds";
    case Errc::spacing_mismatch: return "spacing_mismatch";
    case Errc::dims_mismatch: return "dims_mismatch";
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::empty_mask: return "empty_mask";
    case Errc::full_mask: return "full_mask";
    case Errc::too_few_samples: return "too_few_samples";
    case Errc::non_finite_loss: return "non_finite_loss";
    case Errc::sampler_diverged: return "sampler_diverged";
    case Errc::retries_exhausted: return "retries_exhausted";
    case Errc::no_candidate: return "no_candidate";
    case Errc::config: return "config";
  }
  return "unknown";
}

namespace {
std::string compose(Errc code, const std::string& field, const std::string& detail) {
  std::string msg(errc_name(code));
  if (!field.empty()) msg += " [" + field + "]";
  if (!detail.empty()) msg += ": " + detail;
  return msg;
}
}  // namespace

Error::Error(Errc code, std::string field, const std::string& detail)
    : std::runtime_error(compose(code, field, detail)), code_(code), field_(std::move(field)) {}

void fail(Errc code, std::string field, const std::string& detail) {
  throw Error(code, std::move(field), detail);
}

}  // namespace lnforge
