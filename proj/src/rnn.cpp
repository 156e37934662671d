// SPDX-License-Identifier: Apache-2.0
#include "dsce/rnn.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>

#include "dsce/kernels.hpp"

namespace dsce::rnn {

const char* to_string(CellKind kind) {
  switch (kind) {
    case CellKind::SRNN: return "srnn";
    case CellKind::LSTM: return "lstm";
    case CellKind::GRU: return "gru";
  }
  return "?";
}

CellKind parse_cell_kind(const std::string& name) {
  std::string n = name;
  for (auto& ch : n) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (n == "srnn" || n == "rnn") return CellKind::SRNN;
  if (n == "lstm") return CellKind::LSTM;
  if (n == "gru") return CellKind::GRU;
  throw InvalidArgument("unknown cell kind '" + name + "'");
}

int gate_count(CellKind kind) {
  switch (kind) {
    case CellKind::SRNN: return 1;
    case CellKind::LSTM: return 4;
    case CellKind::GRU: return 3;
  }
  throw InvalidArgument("bad cell kind");
}

namespace {

void validate_cell(const CellParams& p, const char* which) {
  const auto G = gate_count(p.kind);
  const auto P = p.U.cols();
  const std::string w(which);
  require(P > 0 && p.W.cols() > 0, w + " cell: empty dimensions");
  require(p.W.rows() == G * P && p.U.rows() == G * P && p.b.size() == G * P,
          w + " cell: gate block shapes disagree");
  require(p.W.allFinite() && p.U.allFinite() && p.b.allFinite(), w + " cell: non-finite parameter");
}

template <class M>
M sigmoid(const M& a) {
  return (1.0 + (-a.array()).exp()).inverse().matrix();
}

}  // namespace

void NetworkModel::validate() const {
  validate_cell(forward, "forward");
  if (backward) {
    validate_cell(*backward, "backward");
    require(backward->kind == forward.kind && backward->W.cols() == forward.W.cols() &&
                backward->U.cols() == forward.U.cols(),
            "bidirectional cells must share a shape");
  }
  require(readout.W.cols() == readout_width(), "readout width does not match the hidden width");
  require(readout.b.size() == readout.W.rows() && readout.W.rows() > 0, "readout bias shape");
  require(readout.W.allFinite() && readout.b.allFinite(), "readout: non-finite parameter");
}

Architecture architecture_of(const NetworkModel& m) {
  return {m.forward.kind, m.input_dim(), m.hidden_dim(), m.out_dim(), m.bidirectional(),
          m.readout.activation};
}

bool same_architecture(const NetworkModel& a, const NetworkModel& b) {
  const auto x = architecture_of(a), y = architecture_of(b);
  return x.kind == y.kind && x.input_dim == y.input_dim && x.hidden_dim == y.hidden_dim &&
         x.out_dim == y.out_dim && x.bidirectional == y.bidirectional &&
         x.readout_activation == y.readout_activation;
}

NetworkModel init_model(const Architecture& arch, std::uint64_t seed) {
  require(arch.input_dim > 0 && arch.hidden_dim > 0 && arch.out_dim > 0,
          "init_model: dimensions must be positive");
  std::mt19937_64 rng(seed);
  auto uniform = [&](Eigen::Index rows, Eigen::Index cols, double bound) {
    std::uniform_real_distribution<double> u(-bound, bound);
    RMatrix m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
      for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = u(rng);
    return m;
  };
  const int G = gate_count(arch.kind);
  const int P = arch.hidden_dim;
  const double bound = 1.0 / std::sqrt(static_cast<double>(P));
  auto make_cell = [&] {
    CellParams c;
    c.kind = arch.kind;
    c.W = uniform(G * P, arch.input_dim, bound);
    c.U = uniform(G * P, P, bound);
    c.b = RVector::Zero(G * P);
    return c;
  };
  NetworkModel m;
  m.forward = make_cell();
  if (arch.bidirectional) m.backward = make_cell();
  const int width = arch.bidirectional ? 2 * P : P;
  m.readout.W = uniform(arch.out_dim, width, 1.0 / std::sqrt(static_cast<double>(width)));
  m.readout.b = RVector::Zero(arch.out_dim);
  m.readout.activation = arch.readout_activation;
  return m;
}

NetworkModel zeros_like(const NetworkModel& m) {
  NetworkModel z = m;
  for_each_tensor(z, [](const char*, Eigen::Ref<RMatrix> t) { t.setZero(); });
  return z;
}

void for_each_tensor(NetworkModel& m, const std::function<void(const char*, Eigen::Ref<RMatrix>)>& fn) {
  auto cell = [&](CellParams& c, const char* w, const char* u, const char* b) {
    fn(w, c.W);
    fn(u, c.U);
    fn(b, Eigen::Map<RMatrix>(c.b.data(), c.b.size(), 1));
  };
  cell(m.forward, "forward.W", "forward.U", "forward.b");
  if (m.backward) cell(*m.backward, "backward.W", "backward.U", "backward.b");
  fn("readout.W", m.readout.W);
  fn("readout.b", Eigen::Map<RMatrix>(m.readout.b.data(), m.readout.b.size(), 1));
}

void for_each_tensor(const NetworkModel& m,
                     const std::function<void(const char*, const Eigen::Ref<const RMatrix>&)>& fn) {
  auto cell = [&](const CellParams& c, const char* w, const char* u, const char* b) {
    fn(w, c.W);
    fn(u, c.U);
    fn(b, Eigen::Map<const RMatrix>(c.b.data(), c.b.size(), 1));
  };
  cell(m.forward, "forward.W", "forward.U", "forward.b");
  if (m.backward) cell(*m.backward, "backward.W", "backward.U", "backward.b");
  fn("readout.W", m.readout.W);
  fn("readout.b", Eigen::Map<const RMatrix>(m.readout.b.data(), m.readout.b.size(), 1));
}

std::size_t parameter_count(const NetworkModel& m) {
  std::size_t n = 0;
  for_each_tensor(m, [&](const char*, const Eigen::Ref<const RMatrix>& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

RVector flatten(const NetworkModel& m) {
  RVector theta(static_cast<Eigen::Index>(parameter_count(m)));
  Eigen::Index at = 0;
  // row-major, matching the file layout
  for_each_tensor(m, [&](const char*, const Eigen::Ref<const RMatrix>& t) {
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) theta(at++) = t(r, c);
  });
  return theta;
}

void unflatten(NetworkModel& m, const RVector& theta) {
  require(static_cast<std::size_t>(theta.size()) == parameter_count(m), "unflatten: size mismatch");
  Eigen::Index at = 0;
  for_each_tensor(m, [&](const char*, Eigen::Ref<RMatrix> t) {
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = theta(at++);
  });
}

// ---------------------------------------------------------------------------
// Batched time-major recurrences. Column block t of an (n x T*B) matrix holds
// step t for all B sequences.
// ---------------------------------------------------------------------------

namespace {

struct Trace {
  RMatrix pre;    // G*P x TB, W x + b
  RMatrix gates;  // G*P x TB, activated gates
  RMatrix h;      // P x TB, state after each step
  RMatrix h_prev; // P x TB, state entering each step
  RMatrix c;      // LSTM cell after each step
  RMatrix c_prev;
  RMatrix tanh_c;
  RMatrix rh;     // GRU r .* h_prev
};

// One step for a batch. `pre` already holds W x + b.
void step_batch(const CellParams& p, const Eigen::Ref<const RMatrix>& pre, const Eigen::Ref<const RMatrix>& h_prev,
                const Eigen::Ref<const RMatrix>& c_prev, Eigen::Ref<RMatrix> gates, Eigen::Ref<RMatrix> h,
                Eigen::Ref<RMatrix> c, Eigen::Ref<RMatrix> tanh_c, Eigen::Ref<RMatrix> rh) {
  const int P = p.hidden_dim();
  switch (p.kind) {
    case CellKind::SRNN: {
      gates = sigmoid<RMatrix>(pre + p.U * h_prev);
      h = gates;
      break;
    }
    case CellKind::LSTM: {
      const RMatrix a = pre + p.U * h_prev;
      gates.topRows(2 * P) = sigmoid<RMatrix>(a.topRows(2 * P));
      gates.middleRows(2 * P, P) = a.middleRows(2 * P, P).array().tanh().matrix();
      gates.bottomRows(P) = sigmoid<RMatrix>(a.bottomRows(P));
      c = gates.topRows(P).cwiseProduct(c_prev) + gates.middleRows(P, P).cwiseProduct(gates.middleRows(2 * P, P));
      tanh_c = c.array().tanh().matrix();
      h = gates.bottomRows(P).cwiseProduct(tanh_c);
      break;
    }
    case CellKind::GRU: {
      gates.topRows(2 * P) = sigmoid<RMatrix>(pre.topRows(2 * P) + p.U.topRows(2 * P) * h_prev);
      rh = gates.topRows(P).cwiseProduct(h_prev);
      gates.bottomRows(P) = (pre.bottomRows(P) + p.U.bottomRows(P) * rh).array().tanh().matrix();
      const auto z = gates.middleRows(P, P).array();
      h = ((1.0 - z) * h_prev.array() + z * gates.bottomRows(P).array()).matrix();
      break;
    }
  }
}

// Runs one direction over T steps of B sequences; `reverse` walks t = T-1..0.
void cell_forward(const CellParams& p, const RMatrix& X, int T, int B, bool reverse, Trace& tr) {
  const int P = p.hidden_dim();
  const int G = gate_count(p.kind);
  const Eigen::Index TB = static_cast<Eigen::Index>(T) * B;
  tr.pre = (p.W * X).colwise() + p.b;
  tr.gates.resize(G * P, TB);
  tr.h.resize(P, TB);
  tr.h_prev.resize(P, TB);
  const bool lstm = p.kind == CellKind::LSTM;
  const bool gru = p.kind == CellKind::GRU;
  if (lstm) {
    tr.c.resize(P, TB);
    tr.c_prev.resize(P, TB);
    tr.tanh_c.resize(P, TB);
  }
  if (gru) tr.rh.resize(P, TB);
  RMatrix dummy(P, B);
  for (int s = 0; s < T; ++s) {
    const int t = reverse ? T - 1 - s : s;
    const int tp = reverse ? t + 1 : t - 1;
    const Eigen::Index col = static_cast<Eigen::Index>(t) * B;
    if (s == 0) {
      tr.h_prev.middleCols(col, B).setZero();
      if (lstm) tr.c_prev.middleCols(col, B).setZero();
    } else {
      tr.h_prev.middleCols(col, B) = tr.h.middleCols(static_cast<Eigen::Index>(tp) * B, B);
      if (lstm) tr.c_prev.middleCols(col, B) = tr.c.middleCols(static_cast<Eigen::Index>(tp) * B, B);
    }
    step_batch(p, tr.pre.middleCols(col, B), tr.h_prev.middleCols(col, B),
               lstm ? Eigen::Ref<const RMatrix>(tr.c_prev.middleCols(col, B)) : Eigen::Ref<const RMatrix>(dummy),
               tr.gates.middleCols(col, B), tr.h.middleCols(col, B),
               lstm ? Eigen::Ref<RMatrix>(tr.c.middleCols(col, B)) : Eigen::Ref<RMatrix>(dummy),
               lstm ? Eigen::Ref<RMatrix>(tr.tanh_c.middleCols(col, B)) : Eigen::Ref<RMatrix>(dummy),
               gru ? Eigen::Ref<RMatrix>(tr.rh.middleCols(col, B)) : Eigen::Ref<RMatrix>(dummy));
  }
}

// dH: P x TB gradient of the loss w.r.t. each step's output state (from the
// readout). Accumulates parameter gradients into g.
void cell_backward(const CellParams& p, const RMatrix& X, int T, int B, bool reverse, const Trace& tr,
                   const RMatrix& dH, CellParams& g) {
  const int P = p.hidden_dim();
  const int G = gate_count(p.kind);
  const Eigen::Index TB = static_cast<Eigen::Index>(T) * B;
  RMatrix dA(G * P, TB);
  RMatrix dh_next = RMatrix::Zero(P, B);  // gradient flowing from the later step
  RMatrix dc_next = RMatrix::Zero(P, B);
  for (int s = T - 1; s >= 0; --s) {
    const int t = reverse ? T - 1 - s : s;
    const Eigen::Index col = static_cast<Eigen::Index>(t) * B;
    const RMatrix dh = dH.middleCols(col, B) + dh_next;
    const auto gates = tr.gates.middleCols(col, B);
    const auto hp = tr.h_prev.middleCols(col, B);
    auto da = dA.middleCols(col, B);
    switch (p.kind) {
      case CellKind::SRNN: {
        const auto hv = gates.array();
        da = (dh.array() * hv * (1.0 - hv)).matrix();
        dh_next = p.U.transpose() * da;
        break;
      }
      case CellKind::LSTM: {
        const auto f = gates.topRows(P).array();
        const auto i = gates.middleRows(P, P).array();
        const auto gg = gates.middleRows(2 * P, P).array();
        const auto o = gates.bottomRows(P).array();
        const auto tc = tr.tanh_c.middleCols(col, B).array();
        const RMatrix dc = (dc_next.array() + dh.array() * o * (1.0 - tc * tc)).matrix();
        const auto dca = dc.array();
        da.topRows(P) = (dca * tr.c_prev.middleCols(col, B).array() * f * (1.0 - f)).matrix();
        da.middleRows(P, P) = (dca * gg * i * (1.0 - i)).matrix();
        da.middleRows(2 * P, P) = (dca * i * (1.0 - gg * gg)).matrix();
        da.bottomRows(P) = (dh.array() * tc * o * (1.0 - o)).matrix();
        dc_next = (dca * f).matrix();
        dh_next = p.U.transpose() * da;
        break;
      }
      case CellKind::GRU: {
        const auto r = gates.topRows(P).array();
        const auto z = gates.middleRows(P, P).array();
        const auto n = gates.bottomRows(P).array();
        const auto hpa = hp.array();
        da.bottomRows(P) = (dh.array() * z * (1.0 - n * n)).matrix();
        const RMatrix drh = p.U.bottomRows(P).transpose() * da.bottomRows(P);
        da.topRows(P) = (drh.array() * hpa * r * (1.0 - r)).matrix();
        da.middleRows(P, P) = (dh.array() * (n - hpa) * z * (1.0 - z)).matrix();
        dh_next = (dh.array() * (1.0 - z) + drh.array() * r).matrix();
        dh_next.noalias() += p.U.topRows(2 * P).transpose() * da.topRows(2 * P);
        break;
      }
    }
  }
  g.W.noalias() += dA * X.transpose();
  g.b.noalias() += dA.rowwise().sum();
  if (p.kind == CellKind::GRU) {
    g.U.topRows(2 * P).noalias() += dA.topRows(2 * P) * tr.h_prev.transpose();
    g.U.bottomRows(P).noalias() += dA.bottomRows(P) * tr.rh.transpose();
  } else {
    g.U.noalias() += dA * tr.h_prev.transpose();
  }
}

RMatrix readout_forward(const Readout& r, const RMatrix& hidden) {
  RMatrix y = (r.W * hidden).colwise() + r.b;
  if (r.activation == Activation::Sigmoid) y = sigmoid<RMatrix>(y);
  return y;
}

// Concatenated hidden states for the readout.
RMatrix readout_input(const NetworkModel& m, const Trace& fwd, const Trace* bwd) {
  if (!bwd) return fwd.h;
  RMatrix cat(m.readout_width(), fwd.h.cols());
  cat.topRows(m.hidden_dim()) = fwd.h;
  cat.bottomRows(m.hidden_dim()) = bwd->h;
  return cat;
}

}  // namespace

// --- single steps -----------------------------------------------------------

namespace {

void check_step_dims(const CellParams& p, CellKind want, const RVector& x, const RVector& h) {
  require(p.kind == want, std::string("step: cell is ") + to_string(p.kind));
  require(x.size() == p.input_dim(), "step: input dimension mismatch");
  require(h.size() == p.hidden_dim(), "step: hidden dimension mismatch");
}

}  // namespace

SrnnOutput srnn_step(const CellParams& p, const Readout& head, const RVector& x, const RVector& h_prev) {
  check_step_dims(p, CellKind::SRNN, x, h_prev);
  SrnnOutput out;
  out.h = sigmoid<RVector>(p.W * x + p.U * h_prev + p.b);
  out.o = apply_readout(head, out.h);
  return out;
}

LstmOutput lstm_step(const CellParams& p, const RVector& x, const RVector& h_prev, const RVector& c_prev) {
  check_step_dims(p, CellKind::LSTM, x, h_prev);
  require(c_prev.size() == p.hidden_dim(), "step: cell state dimension mismatch");
  const int P = p.hidden_dim();
  const RVector pre = p.W * x + p.b;
  RMatrix gates(4 * P, 1), tanh_c(P, 1), rh(P, 1);
  LstmOutput out;
  out.h.resize(P);
  out.c.resize(P);
  step_batch(p, pre, h_prev, c_prev, gates, out.h, out.c, tanh_c, rh);
  return out;
}

RVector gru_step(const CellParams& p, const RVector& x, const RVector& h_prev) {
  check_step_dims(p, CellKind::GRU, x, h_prev);
  const int P = p.hidden_dim();
  const RVector pre = p.W * x + p.b;
  RMatrix gates(3 * P, 1), c(P, 1), tanh_c(P, 1), rh(P, 1);
  RVector h(P);
  step_batch(p, pre, h_prev, c, gates, h, c, tanh_c, rh);
  return h;
}

RVector apply_readout(const Readout& r, const RVector& hidden) {
  require(hidden.size() == r.W.cols(), "readout: width mismatch");
  return readout_forward(r, hidden);
}

RMatrix run_sequence(const NetworkModel& model, const RMatrix& xs) {
  require(xs.cols() >= 1, "run_sequence: empty sequence");
  require(xs.rows() == model.input_dim(), "run_sequence: input dimension mismatch");
  const int T = static_cast<int>(xs.cols());
  Trace fwd, bwd;
  cell_forward(model.forward, xs, T, 1, false, fwd);
  if (model.backward) cell_forward(*model.backward, xs, T, 1, true, bwd);
  return readout_forward(model.readout, readout_input(model, fwd, model.backward ? &bwd : nullptr));
}

StreamingRunner::StreamingRunner(const NetworkModel& model) : model_(&model) {
  require(!model.bidirectional(), "StreamingRunner: bidirectional models are not causal");
  model.validate();
  reset();
}

void StreamingRunner::reset() {
  h_ = RVector::Zero(model_->hidden_dim());
  c_ = RVector::Zero(model_->hidden_dim());
}

RVector StreamingRunner::step(const RVector& x) {
  const auto& p = model_->forward;
  require(x.size() == p.input_dim(), "StreamingRunner: input dimension mismatch");
  const int P = p.hidden_dim();
  const RVector pre = p.W * x + p.b;
  RMatrix gates(gate_count(p.kind) * P, 1), tanh_c(P, 1), rh(P, 1);
  RVector h(P), c(P);
  step_batch(p, pre, h_, c_, gates, h, c, tanh_c, rh);
  h_ = std::move(h);
  if (p.kind == CellKind::LSTM) c_ = std::move(c);
  return readout_forward(model_->readout, h_);
}

// --- loss and gradients -----------------------------------------------------

void Dataset::validate(const NetworkModel& model) const {
  require(!samples.empty(), "dataset is empty");
  const int T = steps();
  require(T >= 1, "dataset: empty sequences");
  require(step_weights.empty() || static_cast<int>(step_weights.size()) == T, "dataset: step weight length");
  for (const auto& s : samples) {
    require(s.input.cols() == T && s.target.cols() == T, "dataset: all sequences must share a length");
    require(s.input.rows() == model.input_dim(), "dataset: input dimension does not match the model");
    require(s.target.rows() == model.out_dim(), "dataset: target dimension does not match the model");
  }
}

double mse_normalizer(const NetworkModel& model, const Dataset& data, std::size_t n_samples) {
  double wsum = 0.0;
  for (int t = 0; t < data.steps(); ++t) wsum += data.weight(t);
  return static_cast<double>(n_samples) * model.out_dim() * wsum;
}

LossGrad sse_batch(const NetworkModel& model, const Dataset& data, std::span<const std::size_t> indices) {
  require(!indices.empty(), "sse_batch: empty batch");
  const int T = data.steps();
  const int B = static_cast<int>(indices.size());
  const Eigen::Index TB = static_cast<Eigen::Index>(T) * B;
  RMatrix X(model.input_dim(), TB), Y(model.out_dim(), TB);
  for (int b = 0; b < B; ++b) {
    const auto& s = data.samples.at(indices[b]);
    for (int t = 0; t < T; ++t) {
      X.col(static_cast<Eigen::Index>(t) * B + b) = s.input.col(t).cast<double>();
      Y.col(static_cast<Eigen::Index>(t) * B + b) = s.target.col(t).cast<double>();
    }
  }

  Trace fwd, bwd;
  cell_forward(model.forward, X, T, B, false, fwd);
  if (model.backward) cell_forward(*model.backward, X, T, B, true, bwd);
  const RMatrix hidden = readout_input(model, fwd, model.backward ? &bwd : nullptr);
  const RMatrix out = readout_forward(model.readout, hidden);

  RMatrix dOut = out - Y;
  double loss = 0.0;
  for (int t = 0; t < T; ++t) {
    auto blk = dOut.middleCols(static_cast<Eigen::Index>(t) * B, B);
    const double w = data.weight(t);
    loss += w * blk.squaredNorm();
    blk *= 2.0 * w;
  }
  if (!std::isfinite(loss))
    throw RuntimeError("bptt: non-finite loss (exploding activations or bad inputs)");
  if (model.readout.activation == Activation::Sigmoid)
    dOut = (dOut.array() * out.array() * (1.0 - out.array())).matrix();

  LossGrad lg{loss, zeros_like(model)};
  lg.grad.readout.W.noalias() = dOut * hidden.transpose();
  lg.grad.readout.b = dOut.rowwise().sum();
  const RMatrix dHidden = model.readout.W.transpose() * dOut;
  const int P = model.hidden_dim();
  cell_backward(model.forward, X, T, B, false, fwd, model.backward ? RMatrix(dHidden.topRows(P)) : dHidden,
                lg.grad.forward);
  if (model.backward)
    cell_backward(*model.backward, X, T, B, true, bwd, dHidden.bottomRows(P), *lg.grad.backward);
  return lg;
}

LossGrad bptt_gradients(const NetworkModel& model, const Dataset& data, std::span<const std::size_t> indices,
                        Exec exec) {
  data.validate(model);
  require(!indices.empty(), "bptt_gradients: empty batch");
  LossGrad lg = exec == Exec::Serial ? kernels::sse_serial(model, data, indices)
                                     : kernels::sse_parallel(model, data, indices);
  const double n = mse_normalizer(model, data, indices.size());
  lg.loss /= n;
  for_each_tensor(lg.grad, [&](const char*, Eigen::Ref<RMatrix> t) { t /= n; });
  return lg;
}

LossGrad bptt_gradients(const NetworkModel& model, const Dataset& data, Exec exec) {
  std::vector<std::size_t> all(data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return bptt_gradients(model, data, all, exec);
}

double mse_loss(const NetworkModel& model, const Dataset& data) {
  return bptt_gradients(model, data, Exec::Parallel).loss;
}

}  // namespace dsce::rnn
