#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <functional>

#include "dsr/gridworld.hpp"
#include "dsr/vec.hpp"

namespace dsr {

/// Fully-connected layer, weights row-major (out x in).
struct Dense {
  std::size_t in = 0;
  std::size_t out = 0;
  Vec w;
  Vec b;

  Dense() = default;
  Dense(std::size_t in_, std::size_t out_) : in(in_), out(out_), w(in_ * out_, 0.0), b(out_, 0.0) {}
};

/// z = W x + b
void dense_forward(const Dense& d, const double* x, double* z);

/// Accumulates weight/bias gradients for upstream grad dz and optionally
/// back-propagates dx = W^T dz.
void dense_backward(const Dense& d, const double* x, const double* dz, Dense& grad, double* dx);

struct Scratch;

/// Feature encoder: two rectified hidden layers and a linear feature layer
/// that reads both the top hidden activations and the raw input (a linear
/// skip). The skip keeps the feature geometry of near-orthogonal inputs
/// well conditioned, which the successor regression depends on.
struct Trunk {
  Dense l1, l2, l3;  // l3.in == hidden + obs_dim
};

/// Forward pass through the encoder; activations land in the scratch
/// buffers (z1/a1/z2/a2/concat/phi).
void trunk_forward(const Trunk& t, const double* x, Scratch& s);

/// Accumulates encoder gradients for an upstream dphi (consumes the scratch
/// state left by trunk_forward).
void trunk_backward(const Trunk& t, const double* x, const Vec& dphi, Trunk& grads, Scratch& s);

/// One linear successor head per action.
struct Heads {
  std::array<Dense, kNumActions> h;
};

/// Mirrored dense decoder: one rectified hidden layer, linear output.
struct Decoder {
  Dense d1, d2;
};

/// The four learnable groups of the successor agent: feature encoder,
/// per-action successor heads plus their cached target copy, decoder, and
/// the linear reward weights.
struct ModelParams {
  std::size_t obs_dim = 0;
  std::size_t hidden = 0;
  std::size_t feature_dim = 0;
  Trunk trunk;
  Heads heads;
  Heads heads_prev;
  Decoder decoder;
  Vec w;
};

/// Scaled-uniform fan-in initialization, |w| <= sqrt(6/fan_in); biases zero;
/// the target heads start as an exact copy.
ModelParams init_params(std::size_t obs_dim, std::size_t hidden, std::size_t feature_dim,
                        std::uint64_t seed);

/// heads_prev <- heads (deep copy).
void sync_target(ModelParams& params);

/// Scratch buffers reused across forward/backward passes.
struct Scratch {
  Vec z1, a1, z2, a2, concat, phi;
  Vec z1n, a1n, z2n, a2n, concat_n, phi_next;
  Vec m, m2, target;
  Vec dec_z1, dec_a1, shat;
  Vec dphi, dconcat, dz2, da2, dz1;
  Vec dshat, ddec_z1, ddec_a1;

  void ensure(const ModelParams& p);
  void ensure_dims(std::size_t obs_dim, std::size_t hidden, std::size_t feature_dim);
};

/// phi written into scratch.phi; returns a reference to it.
const Vec& forward_features(const ModelParams& p, const double* obs, Scratch& s);
Vec forward_features(const ModelParams& p, const Observation& obs);

/// m = u_alpha(phi, action); independent parameters per action.
void forward_successor(const Heads& heads, const Vec& phi, int action, Vec& m);
Vec forward_successor(const ModelParams& p, const Vec& phi, int action);

Vec forward_decoder(const ModelParams& p, const Vec& phi);

double predict_reward(const Vec& w, const Vec& phi);

/// Q(s,a) = m_a . w for every action.
std::array<double, kNumActions> q_values(const ModelParams& p, const double* obs, Scratch& s);

struct LossWeights {
  double reward = 1.0;
  double reconstruction = 1.0;
};

struct RewardSample {
  const double* obs = nullptr;  // obs_dim values; reconstruction target
  double reward = 0.0;          // reward regression target
};

struct SrSample {
  const double* obs = nullptr;
  int action = 0;
  const double* next_obs = nullptr;
  bool terminal = false;
};

struct RewardPhaseGrads {
  Trunk trunk;
  Decoder decoder;
  Vec w;
};
RewardPhaseGrads make_reward_grads(const ModelParams& p);

struct SrPhaseGrads {
  Heads heads;
};
SrPhaseGrads make_sr_grads(const ModelParams& p);

struct RewardPhaseLoss {
  double total = 0.0;   // reward * loss_r + reconstruction * loss_a
  double loss_r = 0.0;  // mean squared reward error
  double loss_a = 0.0;  // mean per-element squared reconstruction error
};

/// Reward-prediction plus reconstruction phase: exact gradients for the
/// trunk, decoder and reward weights; the successor heads never appear.
RewardPhaseLoss grad_reward_phase(const ModelParams& p, std::span<const RewardSample> batch,
                                  const LossWeights& weights, RewardPhaseGrads& grads, Scratch& s);

/// Loss value only (used by the finite-difference checks).
RewardPhaseLoss reward_phase_loss(const ModelParams& p, std::span<const RewardSample> batch,
                                  const LossWeights& weights, Scratch& s);

/// Next-action rule for the successor bootstrap: the argmax form learns the
/// optimal-policy SR; the uniform form takes the expectation over a uniform
/// random policy (the diffusion-like SR that subgoal extraction wants when
/// the agent itself acts randomly).
enum class SrBootstrap { Argmax, UniformPolicy };

/// Frozen per-sample successor targets: phi(s) + gamma * u_prev(phi(s'), a*)
/// with a* chosen by the current heads and reward weights (or the uniform
/// expectation over the target heads). Terminal transitions stop the
/// bootstrap but still count the terminal state's own features:
/// phi(s) + gamma * phi(s'), matching the tabular convention. The gradient
/// treats these targets as constants.
struct SrTargets {
  std::vector<Vec> target;   // one per sample
  std::vector<Vec> phi;      // phi(s) per sample
};
SrTargets sr_phase_targets(const ModelParams& p, std::span<const SrSample> batch, double gamma,
                           Scratch& s, SrBootstrap bootstrap = SrBootstrap::Argmax);

/// Successor phase: semi-gradient of the mean squared successor error with
/// respect to the heads only.
double grad_sr_phase(const ModelParams& p, std::span<const SrSample> batch, double gamma,
                     SrPhaseGrads& grads, Scratch& s,
                     SrBootstrap bootstrap = SrBootstrap::Argmax);

double sr_phase_loss_given_targets(const ModelParams& p, std::span<const SrSample> batch,
                                   const SrTargets& targets, Scratch& s);

/// Velocity buffers mirror every parameter tensor.
struct OptimizerState {
  double lr = 2.5e-4;
  double momentum = 0.95;
  Trunk trunk;
  Heads heads;
  Decoder decoder;
  Vec w;
};
OptimizerState make_optimizer(const ModelParams& p, double lr, double momentum);

/// v <- momentum * v - lr * g; p <- p + v, tensor by tensor.
void apply_reward_phase(ModelParams& p, const RewardPhaseGrads& g, OptimizerState& opt);
void apply_sr_phase(ModelParams& p, const SrPhaseGrads& g, OptimizerState& opt);

/// Named views over every tensor (used by snapshots and the checks).
void for_each_tensor(ModelParams& p, const std::function<void(const std::string&, Vec&)>& fn);
void for_each_tensor(OptimizerState& o, const std::function<void(const std::string&, Vec&)>& fn);

}  // namespace dsr
