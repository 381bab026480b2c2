#include "dsr/nn.hpp"

#include <cmath>

#include "dsr/error.hpp"
#include "dsr/kernels.hpp"
#include "dsr/rng.hpp"

namespace dsr {

void dense_forward(const Dense& d, const double* x, double* z) {
  const auto& k = kernels::ops();
  k.gemv(d.w.data(), d.out, d.in, x, z);
  k.axpy(1.0, d.b.data(), z, d.out);
}

void dense_backward(const Dense& d, const double* x, const double* dz, Dense& grad, double* dx) {
  const auto& k = kernels::ops();
  k.ger(grad.w.data(), d.out, d.in, 1.0, dz, x);
  k.axpy(1.0, dz, grad.b.data(), d.out);
  if (dx != nullptr) k.gemv_t(d.w.data(), d.out, d.in, dz, dx);
}

namespace {

void init_dense(Dense& d, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(d.in));
  for (double& v : d.w) v = rng.uniform_range(-bound, bound);
  for (double& v : d.b) v = 0.0;
}

void zero(Vec& v) { std::fill(v.begin(), v.end(), 0.0); }
void zero(Dense& d) {
  zero(d.w);
  zero(d.b);
}

}  // namespace

void trunk_forward(const Trunk& t, const double* x, Scratch& s) {
  const auto& k = kernels::ops();
  const std::size_t hidden = t.l1.out;
  const std::size_t obs_dim = t.l1.in;
  dense_forward(t.l1, x, s.z1.data());
  k.relu(s.z1.data(), s.a1.data(), hidden);
  dense_forward(t.l2, s.a1.data(), s.z2.data());
  k.relu(s.z2.data(), s.a2.data(), hidden);
  std::copy(s.a2.begin(), s.a2.end(), s.concat.begin());
  std::copy(x, x + obs_dim, s.concat.begin() + hidden);
  dense_forward(t.l3, s.concat.data(), s.phi.data());
}

void trunk_backward(const Trunk& t, const double* x, const Vec& dphi, Trunk& grads, Scratch& s) {
  const auto& k = kernels::ops();
  const std::size_t hidden = t.l1.out;
  dense_backward(t.l3, s.concat.data(), dphi.data(), grads.l3, s.dconcat.data());
  std::copy(s.dconcat.begin(), s.dconcat.begin() + hidden, s.da2.begin());
  k.relu_backward(s.a2.data(), s.da2.data(), s.dz2.data(), hidden);
  dense_backward(t.l2, s.a1.data(), s.dz2.data(), grads.l2, s.da2.data());
  k.relu_backward(s.a1.data(), s.da2.data(), s.dz1.data(), hidden);
  dense_backward(t.l1, x, s.dz1.data(), grads.l1, nullptr);
}

namespace {
// forwards phi(x) into s.phi using the trunk's own scratch lanes
void trunk_forward_aux(const Trunk& t, const double* x, Scratch& s, bool next_lane) {
  if (!next_lane) {
    trunk_forward(t, x, s);
    return;
  }
  const auto& k = kernels::ops();
  const std::size_t hidden = t.l1.out;
  const std::size_t obs_dim = t.l1.in;
  dense_forward(t.l1, x, s.z1n.data());
  k.relu(s.z1n.data(), s.a1n.data(), hidden);
  dense_forward(t.l2, s.a1n.data(), s.z2n.data());
  k.relu(s.z2n.data(), s.a2n.data(), hidden);
  std::copy(s.a2n.begin(), s.a2n.end(), s.concat_n.begin());
  std::copy(x, x + obs_dim, s.concat_n.begin() + hidden);
  dense_forward(t.l3, s.concat_n.data(), s.phi_next.data());
}
}  // namespace

ModelParams init_params(std::size_t obs_dim, std::size_t hidden, std::size_t feature_dim,
                        std::uint64_t seed) {
  require(obs_dim >= 1 && hidden >= 1 && feature_dim >= 1, ErrCode::BadSpec,
          "layer sizes must be positive");
  ModelParams p;
  p.obs_dim = obs_dim;
  p.hidden = hidden;
  p.feature_dim = feature_dim;
  p.trunk.l1 = Dense(obs_dim, hidden);
  p.trunk.l2 = Dense(hidden, hidden);
  p.trunk.l3 = Dense(hidden + obs_dim, feature_dim);
  for (auto& h : p.heads.h) h = Dense(feature_dim, feature_dim);
  p.decoder.d1 = Dense(feature_dim, hidden);
  p.decoder.d2 = Dense(hidden, obs_dim);
  p.w.assign(feature_dim, 0.0);

  Rng rng(derive_seed(seed, 0xd5));
  init_dense(p.trunk.l1, rng);
  init_dense(p.trunk.l2, rng);
  init_dense(p.trunk.l3, rng);
  for (auto& h : p.heads.h) init_dense(h, rng);
  init_dense(p.decoder.d1, rng);
  init_dense(p.decoder.d2, rng);
  {
    const double bound = std::sqrt(6.0 / static_cast<double>(feature_dim));
    for (double& v : p.w) v = rng.uniform_range(-bound, bound);
  }
  p.heads_prev = p.heads;
  return p;
}

void sync_target(ModelParams& params) { params.heads_prev = params.heads; }

void Scratch::ensure(const ModelParams& p) { ensure_dims(p.obs_dim, p.hidden, p.feature_dim); }

void Scratch::ensure_dims(std::size_t obs_dim, std::size_t hidden, std::size_t feature_dim) {
  const auto resize = [](Vec& v, std::size_t n) {
    if (v.size() != n) v.assign(n, 0.0);
  };
  resize(z1, hidden);
  resize(a1, hidden);
  resize(z2, hidden);
  resize(a2, hidden);
  resize(concat, hidden + obs_dim);
  resize(phi, feature_dim);
  resize(z1n, hidden);
  resize(a1n, hidden);
  resize(z2n, hidden);
  resize(a2n, hidden);
  resize(concat_n, hidden + obs_dim);
  resize(phi_next, feature_dim);
  resize(m, feature_dim);
  resize(m2, feature_dim);
  resize(target, feature_dim);
  resize(dec_z1, hidden);
  resize(dec_a1, hidden);
  resize(shat, obs_dim);
  resize(dphi, feature_dim);
  resize(dconcat, hidden + obs_dim);
  resize(dz2, hidden);
  resize(da2, hidden);
  resize(dz1, hidden);
  resize(dshat, obs_dim);
  resize(ddec_z1, hidden);
  resize(ddec_a1, hidden);
}

const Vec& forward_features(const ModelParams& p, const double* obs, Scratch& s) {
  s.ensure(p);
  trunk_forward(p.trunk, obs, s);
  return s.phi;
}

Vec forward_features(const ModelParams& p, const Observation& obs) {
  require(obs.size() == p.obs_dim, ErrCode::ShapeMismatch,
          "observation size does not match the network input");
  Scratch s;
  return forward_features(p, obs.data.data(), s);
}

void forward_successor(const Heads& heads, const Vec& phi, int action, Vec& m) {
  require(action >= 0 && action < kNumActions, ErrCode::BadAction, "action index out of range");
  const Dense& head = heads.h[action];
  require(phi.size() == head.in, ErrCode::ShapeMismatch, "phi length does not match the head");
  m.resize(head.out);
  dense_forward(head, phi.data(), m.data());
}

Vec forward_successor(const ModelParams& p, const Vec& phi, int action) {
  Vec m;
  forward_successor(p.heads, phi, action, m);
  return m;
}

Vec forward_decoder(const ModelParams& p, const Vec& phi) {
  require(phi.size() == p.feature_dim, ErrCode::ShapeMismatch, "phi length != feature_dim");
  Scratch s;
  s.ensure(p);
  dense_forward(p.decoder.d1, phi.data(), s.dec_z1.data());
  kernels::ops().relu(s.dec_z1.data(), s.dec_a1.data(), s.dec_z1.size());
  dense_forward(p.decoder.d2, s.dec_a1.data(), s.shat.data());
  return s.shat;
}

double predict_reward(const Vec& w, const Vec& phi) {
  require(w.size() == phi.size(), ErrCode::DimensionMismatch, "w and phi lengths differ");
  return kernels::ops().dot(w.data(), phi.data(), w.size());
}

std::array<double, kNumActions> q_values(const ModelParams& p, const double* obs, Scratch& s) {
  forward_features(p, obs, s);
  std::array<double, kNumActions> q{};
  for (int a = 0; a < kNumActions; ++a) {
    forward_successor(p.heads, s.phi, a, s.m);
    q[a] = kernels::ops().dot(s.m.data(), p.w.data(), p.feature_dim);
  }
  return q;
}

RewardPhaseGrads make_reward_grads(const ModelParams& p) {
  RewardPhaseGrads g;
  g.trunk.l1 = Dense(p.trunk.l1.in, p.trunk.l1.out);
  g.trunk.l2 = Dense(p.trunk.l2.in, p.trunk.l2.out);
  g.trunk.l3 = Dense(p.trunk.l3.in, p.trunk.l3.out);
  g.decoder.d1 = Dense(p.decoder.d1.in, p.decoder.d1.out);
  g.decoder.d2 = Dense(p.decoder.d2.in, p.decoder.d2.out);
  g.w.assign(p.w.size(), 0.0);
  return g;
}

SrPhaseGrads make_sr_grads(const ModelParams& p) {
  SrPhaseGrads g;
  for (int a = 0; a < kNumActions; ++a)
    g.heads.h[a] = Dense(p.heads.h[a].in, p.heads.h[a].out);
  return g;
}

RewardPhaseLoss grad_reward_phase(const ModelParams& p, std::span<const RewardSample> batch,
                                  const LossWeights& weights, RewardPhaseGrads& grads,
                                  Scratch& s) {
  require(!batch.empty(), ErrCode::EmptyBatch, "reward phase needs a nonempty batch");
  s.ensure(p);
  zero(grads.trunk.l1);
  zero(grads.trunk.l2);
  zero(grads.trunk.l3);
  zero(grads.decoder.d1);
  zero(grads.decoder.d2);
  zero(grads.w);

  const auto& k = kernels::ops();
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const double inv_obs = 1.0 / static_cast<double>(p.obs_dim);
  RewardPhaseLoss loss;

  for (const RewardSample& sample : batch) {
    trunk_forward(p.trunk, sample.obs, s);
    dense_forward(p.decoder.d1, s.phi.data(), s.dec_z1.data());
    k.relu(s.dec_z1.data(), s.dec_a1.data(), s.dec_z1.size());
    dense_forward(p.decoder.d2, s.dec_a1.data(), s.shat.data());
    const double rhat = k.dot(p.w.data(), s.phi.data(), p.feature_dim);

    const double rerr = rhat - sample.reward;
    loss.loss_r += rerr * rerr;
    loss.loss_a += k.sq_diff_sum(s.shat.data(), sample.obs, p.obs_dim) * inv_obs;

    // decoder backward
    const double ascale = 2.0 * weights.reconstruction * inv_obs * inv_b;
    for (std::size_t j = 0; j < p.obs_dim; ++j)
      s.dshat[j] = ascale * (s.shat[j] - sample.obs[j]);
    dense_backward(p.decoder.d2, s.dec_a1.data(), s.dshat.data(), grads.decoder.d2,
                   s.ddec_a1.data());
    k.relu_backward(s.dec_a1.data(), s.ddec_a1.data(), s.ddec_z1.data(), p.hidden);
    dense_backward(p.decoder.d1, s.phi.data(), s.ddec_z1.data(), grads.decoder.d1, s.dphi.data());

    // reward-head backward into w and phi
    const double rscale = 2.0 * weights.reward * rerr * inv_b;
    k.axpy(rscale, s.phi.data(), grads.w.data(), p.feature_dim);
    k.axpy(rscale, p.w.data(), s.dphi.data(), p.feature_dim);

    trunk_backward(p.trunk, sample.obs, s.dphi, grads.trunk, s);
  }

  loss.loss_r *= inv_b;
  loss.loss_a *= inv_b;
  loss.total = weights.reward * loss.loss_r + weights.reconstruction * loss.loss_a;
  return loss;
}

RewardPhaseLoss reward_phase_loss(const ModelParams& p, std::span<const RewardSample> batch,
                                  const LossWeights& weights, Scratch& s) {
  require(!batch.empty(), ErrCode::EmptyBatch, "reward phase needs a nonempty batch");
  s.ensure(p);
  const auto& k = kernels::ops();
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const double inv_obs = 1.0 / static_cast<double>(p.obs_dim);
  RewardPhaseLoss loss;
  for (const RewardSample& sample : batch) {
    trunk_forward(p.trunk, sample.obs, s);
    dense_forward(p.decoder.d1, s.phi.data(), s.dec_z1.data());
    k.relu(s.dec_z1.data(), s.dec_a1.data(), s.dec_z1.size());
    dense_forward(p.decoder.d2, s.dec_a1.data(), s.shat.data());
    const double rerr = k.dot(p.w.data(), s.phi.data(), p.feature_dim) - sample.reward;
    loss.loss_r += rerr * rerr;
    loss.loss_a += k.sq_diff_sum(s.shat.data(), sample.obs, p.obs_dim) * inv_obs;
  }
  loss.loss_r *= inv_b;
  loss.loss_a *= inv_b;
  loss.total = weights.reward * loss.loss_r + weights.reconstruction * loss.loss_a;
  return loss;
}

SrTargets sr_phase_targets(const ModelParams& p, std::span<const SrSample> batch, double gamma,
                           Scratch& s, SrBootstrap bootstrap) {
  require(!batch.empty(), ErrCode::EmptyBatch, "sr phase needs a nonempty batch");
  s.ensure(p);
  const auto& k = kernels::ops();
  SrTargets out;
  out.target.reserve(batch.size());
  out.phi.reserve(batch.size());
  for (const SrSample& sample : batch) {
    trunk_forward(p.trunk, sample.obs, s);
    Vec target = s.phi;
    trunk_forward_aux(p.trunk, sample.next_obs, s, true);
    if (sample.terminal) {
      // Episodes end here: the successor occupancy still counts the terminal
      // state's own features once, mirroring the tabular convention, but
      // nothing is bootstrapped beyond it.
      k.axpy(gamma, s.phi_next.data(), target.data(), p.feature_dim);
    } else if (bootstrap == SrBootstrap::UniformPolicy) {
      for (int a = 0; a < kNumActions; ++a) {
        forward_successor(p.heads_prev, s.phi_next, a, s.m2);
        k.axpy(gamma / kNumActions, s.m2.data(), target.data(), p.feature_dim);
      }
    } else {
      // a' = argmax_a u_alpha(phi', a) . w with the current heads and w
      int best = 0;
      double best_q = 0.0;
      for (int a = 0; a < kNumActions; ++a) {
        forward_successor(p.heads, s.phi_next, a, s.m2);
        const double q = k.dot(s.m2.data(), p.w.data(), p.feature_dim);
        if (a == 0 || q > best_q) {
          best_q = q;
          best = a;
        }
      }
      // bootstrap through the cached target heads
      forward_successor(p.heads_prev, s.phi_next, best, s.m2);
      k.axpy(gamma, s.m2.data(), target.data(), p.feature_dim);
    }
    out.phi.push_back(s.phi);
    out.target.push_back(std::move(target));
  }
  return out;
}

double grad_sr_phase(const ModelParams& p, std::span<const SrSample> batch, double gamma,
                     SrPhaseGrads& grads, Scratch& s, SrBootstrap bootstrap) {
  const SrTargets targets = sr_phase_targets(p, batch, gamma, s, bootstrap);
  for (auto& h : grads.heads.h) zero(h);

  const auto& k = kernels::ops();
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  Vec dpred(p.feature_dim);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const SrSample& sample = batch[i];
    forward_successor(p.heads, targets.phi[i], sample.action, s.m);
    loss += k.sq_diff_sum(s.m.data(), targets.target[i].data(), p.feature_dim);
    for (std::size_t j = 0; j < p.feature_dim; ++j)
      dpred[j] = 2.0 * inv_b * (s.m[j] - targets.target[i][j]);
    dense_backward(p.heads.h[sample.action], targets.phi[i].data(), dpred.data(),
                   grads.heads.h[sample.action], nullptr);
  }
  return loss * inv_b;
}

double sr_phase_loss_given_targets(const ModelParams& p, std::span<const SrSample> batch,
                                   const SrTargets& targets, Scratch& s) {
  s.ensure(p);
  const auto& k = kernels::ops();
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    forward_successor(p.heads, targets.phi[i], batch[i].action, s.m);
    loss += k.sq_diff_sum(s.m.data(), targets.target[i].data(), p.feature_dim);
  }
  return loss / static_cast<double>(batch.size());
}

OptimizerState make_optimizer(const ModelParams& p, double lr, double momentum) {
  OptimizerState o;
  o.lr = lr;
  o.momentum = momentum;
  o.trunk.l1 = Dense(p.trunk.l1.in, p.trunk.l1.out);
  o.trunk.l2 = Dense(p.trunk.l2.in, p.trunk.l2.out);
  o.trunk.l3 = Dense(p.trunk.l3.in, p.trunk.l3.out);
  for (int a = 0; a < kNumActions; ++a)
    o.heads.h[a] = Dense(p.heads.h[a].in, p.heads.h[a].out);
  o.decoder.d1 = Dense(p.decoder.d1.in, p.decoder.d1.out);
  o.decoder.d2 = Dense(p.decoder.d2.in, p.decoder.d2.out);
  o.w.assign(p.w.size(), 0.0);
  return o;
}

namespace {

void momentum_step(Vec& p, Vec& v, const Vec& g, double lr, double mu) {
  if (p.size() != v.size() || p.size() != g.size())
    fail(ErrCode::ShapeMismatch, "optimizer state does not mirror the parameters");
  kernels::ops().momentum_update(p.data(), v.data(), g.data(), p.size(), mu, lr);
}

void momentum_step(Dense& p, Dense& v, const Dense& g, double lr, double mu) {
  momentum_step(p.w, v.w, g.w, lr, mu);
  momentum_step(p.b, v.b, g.b, lr, mu);
}

}  // namespace

void apply_reward_phase(ModelParams& p, const RewardPhaseGrads& g, OptimizerState& opt) {
  momentum_step(p.trunk.l1, opt.trunk.l1, g.trunk.l1, opt.lr, opt.momentum);
  momentum_step(p.trunk.l2, opt.trunk.l2, g.trunk.l2, opt.lr, opt.momentum);
  momentum_step(p.trunk.l3, opt.trunk.l3, g.trunk.l3, opt.lr, opt.momentum);
  momentum_step(p.decoder.d1, opt.decoder.d1, g.decoder.d1, opt.lr, opt.momentum);
  momentum_step(p.decoder.d2, opt.decoder.d2, g.decoder.d2, opt.lr, opt.momentum);
  momentum_step(p.w, opt.w, g.w, opt.lr, opt.momentum);
}

void apply_sr_phase(ModelParams& p, const SrPhaseGrads& g, OptimizerState& opt) {
  for (int a = 0; a < kNumActions; ++a)
    momentum_step(p.heads.h[a], opt.heads.h[a], g.heads.h[a], opt.lr, opt.momentum);
}

namespace {

template <typename Fn>
void visit_dense(const std::string& prefix, Dense& d, const Fn& fn) {
  fn(prefix + ".w", d.w);
  fn(prefix + ".b", d.b);
}

}  // namespace

void for_each_tensor(ModelParams& p, const std::function<void(const std::string&, Vec&)>& fn) {
  visit_dense("trunk.l1", p.trunk.l1, fn);
  visit_dense("trunk.l2", p.trunk.l2, fn);
  visit_dense("trunk.l3", p.trunk.l3, fn);
  for (int a = 0; a < kNumActions; ++a)
    visit_dense("heads." + std::to_string(a), p.heads.h[a], fn);
  for (int a = 0; a < kNumActions; ++a)
    visit_dense("heads_prev." + std::to_string(a), p.heads_prev.h[a], fn);
  visit_dense("decoder.d1", p.decoder.d1, fn);
  visit_dense("decoder.d2", p.decoder.d2, fn);
  fn("w", p.w);
}

void for_each_tensor(OptimizerState& o, const std::function<void(const std::string&, Vec&)>& fn) {
  visit_dense("vel.trunk.l1", o.trunk.l1, fn);
  visit_dense("vel.trunk.l2", o.trunk.l2, fn);
  visit_dense("vel.trunk.l3", o.trunk.l3, fn);
  for (int a = 0; a < kNumActions; ++a)
    visit_dense("vel.heads." + std::to_string(a), o.heads.h[a], fn);
  visit_dense("vel.decoder.d1", o.decoder.d1, fn);
  visit_dense("vel.decoder.d2", o.decoder.d2, fn);
  fn("vel.w", o.w);
}

}  // namespace dsr
