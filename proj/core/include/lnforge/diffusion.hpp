#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lnforge/codec.hpp"
#include "lnforge/rng.hpp"

namespace lnforge {

/// Linear variance schedule with cumulative products. Timesteps are 1-based.
class NoiseSchedule {
public:
  NoiseSchedule() = default;
  NoiseSchedule(int steps, double beta_start, double beta_end);

  int steps() const noexcept { return static_cast<int>(beta_.size()); }
  double beta_start() const noexcept { return beta_start_; }
  double beta_end() const noexcept { return beta_end_; }
  double beta(int t) const { return beta_.at(static_cast<std::size_t>(t - 1)); }
  double alpha(int t) const { return alpha_.at(static_cast<std::size_t>(t - 1)); }
  double alpha_bar(int t) const { return alpha_bar_.at(static_cast<std::size_t>(t - 1)); }

private:
  double beta_start_ = 0.0;
  double beta_end_ = 0.0;
  std::vector<double> beta_;
  std::vector<double> alpha_;
  std::vector<double> alpha_bar_;
};

NoiseSchedule make_schedule(int steps, double beta_start, double beta_end);

/// Closed-form marginal: sqrt(abar_t) z0 + sqrt(1 - abar_t) eps.
LatentCode forward_sample(const LatentCode& z0, int t, std::span<const double> eps, const NoiseSchedule& s);
/// One transition of the Markov chain: sqrt(1 - beta_t) z + sqrt(beta_t) eps.
LatentCode forward_step(const LatentCode& z_prev, int t, std::span<const double> eps, const NoiseSchedule& s);

inline constexpr std::size_t kTimeEmbedDim = 16;

/// 8 sine/cosine pairs of t at geometrically spaced frequencies.
std::vector<double> time_embedding(int t, std::size_t dim = kTimeEmbedDim);

/// Fully-connected noise predictor. Input is concat(z_t, embed(t), cond);
/// hidden layers use SiLU, the output layer is linear.
struct DenoiserNet {
  std::size_t latent_dim = 0;
  std::size_t cond_dim = 0;
  std::size_t embed_dim = kTimeEmbedDim;
  std::vector<std::size_t> layers;  // input, hidden..., output
  std::vector<double> params;       // per layer: W (out x in, row-major) then b

  std::size_t input_dim() const noexcept { return latent_dim + embed_dim + cond_dim; }
  std::size_t weight_offset(std::size_t layer) const;
  std::size_t bias_offset(std::size_t layer) const;
};

DenoiserNet make_denoiser(std::size_t latent_dim, std::size_t cond_dim, const std::vector<std::size_t>& hidden,
                          Rng& rng);

/// Activations kept from a forward pass for backpropagation.
struct ForwardCache {
  std::vector<std::vector<double>> inputs;  // input of each layer
  std::vector<std::vector<double>> pre;     // pre-activation of each layer
};

void denoiser_forward(const DenoiserNet& net, std::span<const double> input, ForwardCache& cache,
                      std::span<double> out);
/// Accumulates d(loss)/d(params) into grad given d(loss)/d(output).
void denoiser_backward(const DenoiserNet& net, const ForwardCache& cache, std::span<const double> grad_out,
                       std::span<double> grad);

std::vector<double> denoiser_input(std::span<const double> z_t, int t, std::span<const double> cond,
                                   std::size_t embed_dim = kTimeEmbedDim);
std::vector<double> predict_noise(const DenoiserNet& net, std::span<const double> z_t, int t,
                                  std::span<const double> cond);

/// Training example: clean latent plus optional condition vector.
struct DiffusionExample {
  std::vector<double> z0;
  std::vector<double> cond;
};

/// Pre-drawn noise for one example.
struct NoiseDraw {
  int t = 1;
  std::vector<double> eps;
};

NoiseDraw draw_noise(Rng& rng, const NoiseSchedule& s, std::size_t dim);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Mean over the batch of ||eps - eps_theta(z_t, t, cond)||^2 and its gradient.
LossAndGrad diffusion_loss(const DenoiserNet& net, std::span<const DiffusionExample> batch,
                           std::span<const NoiseDraw> draws, const NoiseSchedule& s);
LossAndGrad diffusion_loss(const DenoiserNet& net, std::span<const DiffusionExample> batch, const NoiseSchedule& s,
                           Rng& rng);

struct TrainConfig {
  double learning_rate = 1e-3;
  int steps = 3000;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  double lambda = 1.0;  // weight of the adapter term in the reported total loss
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

/// Bias-corrected two-moment optimizer state.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
};

void adam_update(std::span<double> params, std::span<const double> grad, AdamState& state, const TrainConfig& cfg);

struct TrainResult {
  DenoiserNet net;
  std::vector<double> loss_trace;
};

TrainResult train(DenoiserNet net, std::span<const DiffusionExample> data, const NoiseSchedule& s,
                  const TrainConfig& cfg);

/// Ancestral sampling with sigma_t = sqrt(beta_t) and no noise at t = 1.
LatentCode reverse_sample(const DenoiserNet& net, const NoiseSchedule& s, Rng& rng, std::span<const double> cond = {});

/// Denoiser plus everything needed to map between codec latents and the
/// unit-scale space the network is trained in.
struct LatentDiffusionModel {
  DenoiserNet net;
  NoiseSchedule schedule;
  double latent_scale = 1.0;  // codec latent = latent_scale * network latent
  double cond_scale = 1.0;    // network condition = codec condition / cond_scale
};

/// RMS of all latent entries; 1.0 for an all-zero set.
double latent_rms(std::span<const LatentCode> codes);

struct LatentTrainResult {
  LatentDiffusionModel model;
  std::vector<double> loss_trace;
};

/// Normalizes codes (and conditions) to unit RMS, initializes a denoiser from
/// a stream derived from cfg.seed and trains it.
LatentTrainResult train_latent_model(std::span<const LatentCode> codes, std::span<const std::vector<double>> conds,
                                     const std::vector<std::size_t>& hidden, const NoiseSchedule& s,
                                     const TrainConfig& cfg);

LatentCode sample_latent(const LatentDiffusionModel& model, Rng& rng, std::span<const double> cond = {});

std::string encode_ddpm(const LatentDiffusionModel& m);
LatentDiffusionModel decode_ddpm(std::string_view bytes);
void save_ddpm(const LatentDiffusionModel& m, const std::filesystem::path& path);
LatentDiffusionModel load_ddpm(const std::filesystem::path& path);

}  // namespace lnforge
