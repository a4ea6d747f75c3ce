#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lnforge {

/// Error categories. Each maps to a stable lower-case token used by the CLI
/// when it reports failures on a single line.
enum class Errc {
  io,
  malformed_header,
  payload_length_mismatch,
  non_finite_spacing,
  non_finite_voxel,
  invalid_dims,
  out_of_bounds,
  spacing_mismatch,
  dims_mismatch,
  invalid_argument,
  empty_mask,
  full_mask,
  too_few_samples,
  non_finite_loss,
  sampler_diverged,
  retries_exhausted,
  no_candidate,
  config,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
public:
  Error(Errc code, std::string field, const std::string& detail);

  Errc code() const noexcept { return code_; }
  /// Name of the offending field or argument, may be empty.
  const std::string& field() const noexcept { return field_; }

private:
  Errc code_;
  std::string field_;
};

[[noreturn]] void fail(Errc code, std::string field, const std::string& detail);

}  // namespace lnforge
