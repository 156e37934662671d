// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dsce/rnn.hpp"

namespace dsce::rnn {

void TrainConfig::validate() const {
  require(epochs >= 0, "epochs must be non-negative");
  require(batch_size >= 1, "batch size must be positive");
  require(lr >= 0.0 && std::isfinite(lr), "learning rate must be non-negative");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "Adam betas must lie in [0, 1)");
  require(eps > 0.0, "Adam epsilon must be positive");
  require(n_train >= 1 && n_test >= 0, "corpus sizes must be positive");
}

AdamState::AdamState(const NetworkModel& like) : m(zeros_like(like)), v(zeros_like(like)) {}

namespace {

// Applies fn(param, grad, m, v) to matching tensors of the four models.
template <class Fn>
void zip4(NetworkModel& p, const NetworkModel& g, NetworkModel& m, NetworkModel& v, Fn&& fn) {
  auto cell = [&](CellParams& pc, const CellParams& gc, CellParams& mc, CellParams& vc) {
    fn(pc.W, gc.W, mc.W, vc.W);
    fn(pc.U, gc.U, mc.U, vc.U);
    fn(pc.b, gc.b, mc.b, vc.b);
  };
  cell(p.forward, g.forward, m.forward, v.forward);
  if (p.backward) cell(*p.backward, *g.backward, *m.backward, *v.backward);
  fn(p.readout.W, g.readout.W, m.readout.W, v.readout.W);
  fn(p.readout.b, g.readout.b, m.readout.b, v.readout.b);
}

}  // namespace

void adam_update(NetworkModel& params, const NetworkModel& grad, AdamState& state, const TrainConfig& cfg) {
  require(same_architecture(params, grad), "adam_update: gradient shape mismatch");
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  zip4(params, grad, state.m, state.v, [&](auto& p, const auto& g, auto& m, auto& v) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseAbs2();
    p.array() -= cfg.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.eps);
  });
}

double clip_global_norm(NetworkModel& grad, double max_norm) {
  double sq = 0.0;
  for_each_tensor(std::as_const(grad),
                  [&](const char*, const Eigen::Ref<const RMatrix>& t) { sq += t.squaredNorm(); });
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for_each_tensor(grad, [&](const char*, Eigen::Ref<RMatrix> t) { t *= s; });
  }
  return norm;
}

TrainResult train(NetworkModel model, const Dataset& data, const TrainConfig& cfg, std::uint64_t seed,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  model.validate();
  data.validate(model);

  TrainResult res;
  AdamState adam(model);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  NetworkModel checkpoint = model;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    int batches = 0;
    try {
      for (std::size_t lo = 0; lo < order.size(); lo += static_cast<std::size_t>(cfg.batch_size)) {
        const std::size_t len = std::min<std::size_t>(cfg.batch_size, order.size() - lo);
        auto lg = bptt_gradients(model, data, std::span<const std::size_t>(order).subspan(lo, len));
        clip_global_norm(lg.grad, cfg.clip_norm);
        adam_update(model, lg.grad, adam, cfg);
        sum += lg.loss;
        ++batches;
      }
      if (!flatten(model).allFinite()) throw RuntimeError("non-finite parameters after update");
    } catch (const RuntimeError& e) {
      res.diverged = true;
      res.message = "epoch " + std::to_string(epoch) + ": " + e.what();
      model = checkpoint;
      break;
    }
    checkpoint = model;
    const double mean = sum / batches;
    res.loss_history.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }
  res.model = std::move(model);
  return res;
}

NetworkModel ensemble_average(std::span<const NetworkModel> models) {
  require(!models.empty(), "ensemble_average: no models");
  for (const auto& m : models)
    require(same_architecture(m, models.front()), "ensemble_average: architecture mismatch");
  RVector theta = RVector::Zero(static_cast<Eigen::Index>(parameter_count(models.front())));
  for (const auto& m : models) theta += flatten(m);
  theta /= static_cast<double>(models.size());
  NetworkModel out = models.front();
  unflatten(out, theta);
  return out;
}

}  // namespace dsce::rnn
