#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lnforge/codec.hpp"
#include "lnforge/diffusion.hpp"
#include "lnforge/sdf.hpp"

namespace lnforge {

/// Two-layer 3x3x3 convolutional residual refiner on TSDF grids:
///   out = clamp(in + tau * conv2(silu(conv1(in / tau))), -tau, tau)
/// with replicate padding at the grid border.
struct AdapterNet {
  int channels = 8;
  float tau = kDefaultTau;
  std::vector<double> params;  // W1 [channels x 27], b1 [channels], W2 [channels x 27], b2

  static constexpr int kTaps = 27;
  std::size_t w1() const noexcept { return 0; }
  std::size_t b1() const noexcept { return static_cast<std::size_t>(channels * kTaps); }
  std::size_t w2() const noexcept { return b1() + static_cast<std::size_t>(channels); }
  std::size_t b2() const noexcept { return w2() + static_cast<std::size_t>(channels * kTaps); }
  std::size_t param_count() const noexcept { return b2() + 1; }
};

/// Random first layer, zero second layer: starts as the identity map.
AdapterNet make_adapter(float tau, Rng& rng, int channels = 8);
AdapterNet identity_adapter(float tau, int channels = 8);

TsdfGrid apply_adapter(const AdapterNet& a, const TsdfGrid& t);

enum class AdapterNorm { l1, l2 };

/// Mean per-voxel |M - A(M_hat)| (or squared difference for l2) with gradient.
LossAndGrad adapter_loss(const TsdfGrid& target, const TsdfGrid& noisy, const AdapterNet& a,
                         AdapterNorm norm = AdapterNorm::l1);

/// decode(encode(M) + sigma * g), g standard normal in latent space.
TsdfGrid make_noisy_recon(const TsdfGrid& target, const LinearCodec& codec, double sigma, Rng& rng);

/// factor * sqrt(mean over coordinates of the per-coordinate latent variance).
double latent_noise_sigma(std::span<const LatentCode> codes, double factor);

struct AdapterPair {
  TsdfGrid target;
  TsdfGrid noisy;
};

struct AdapterTrainResult {
  AdapterNet net;
  std::vector<double> loss_trace;
  double final_adapter_loss = 0.0;
  /// final diffusion loss + lambda * final adapter loss, for logging.
  double total_loss = 0.0;
};

/// per_target noisy reconstructions of every target, each from its own stream.
std::vector<AdapterPair> make_adapter_pairs(std::span<const TsdfGrid> targets, const LinearCodec& codec, double sigma,
                                            std::uint64_t seed, int per_target = 1);

double mean_adapter_loss(std::span<const AdapterPair> pairs, const AdapterNet& a, AdapterNorm norm = AdapterNorm::l1);

AdapterTrainResult train_adapter(AdapterNet a, std::span<const AdapterPair> pairs, const TrainConfig& cfg,
                                 double final_diffusion_loss = 0.0, AdapterNorm norm = AdapterNorm::l1);

std::string encode_adapter(const AdapterNet& a);
AdapterNet decode_adapter(std::string_view bytes);
void save_adapter(const AdapterNet& a, const std::filesystem::path& path);
AdapterNet load_adapter(const std::filesystem::path& path);

}  // namespace lnforge
