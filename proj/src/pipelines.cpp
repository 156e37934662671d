// SPDX-License-Identifier: Apache-2.0
#include "dsce/pipelines.hpp"

#include <cmath>

namespace dsce {

RVector stack_real(const CVector& h) {
  RVector v(2 * h.size());
  v << h.real(), h.imag();
  return v;
}

CVector unstack_real(const RVector& v) {
  if (v.size() % 2 != 0) throw InvalidArgument("unstack_real: odd length " + std::to_string(v.size()));
  const auto n = v.size() / 2;
  CVector h(n);
  h.real() = v.head(n);
  h.imag() = v.tail(n);
  return h;
}

Detection equalize_detect(const CVector& y, const CVector& hhat, const Constellation& c) {
  require(y.size() == hhat.size(), "equalize_detect: length mismatch");
  Detection d;
  std::vector<cplx> eq(static_cast<std::size_t>(y.size()));
  for (Eigen::Index k = 0; k < y.size(); ++k) {
    if (std::abs(hhat(k)) >= kDegenerateThreshold) {
      eq[static_cast<std::size_t>(k)] = y(k) / hhat(k);
    } else {
      d.degenerate.push_back(static_cast<int>(k));
      eq[static_cast<std::size_t>(k)] = 0.0;
    }
  }
  d.bits = demap_bits(eq, c);
  return d;
}

CMatrix reference_channel(const ReceivedFrame& rx, const FrameLayout& layout) {
  if (!rx.genie_H) throw InvalidArgument("reference_channel: frame carries no true channel");
  return (*rx.genie_H)(layout.data_rows, layout.data_columns());
}

FrameEstimate detect_frame(const ReceivedFrame& rx, const FrameLayout& layout, const Constellation& c,
                           CMatrix Hhat, std::string provenance) {
  const auto cols = layout.data_columns();
  require(Hhat.rows() == layout.kd() && Hhat.cols() == static_cast<Eigen::Index>(cols.size()),
          "detect_frame: estimate does not cover the data grid");
  FrameEstimate est;
  est.bits.reserve(payload_bits(layout, c));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    const CVector y = rx.Y(layout.data_rows, cols[j]);
    auto d = equalize_detect(y, Hhat.col(static_cast<Eigen::Index>(j)), c);
    est.bits.insert(est.bits.end(), d.bits.begin(), d.bits.end());
    est.degenerate += static_cast<int>(d.degenerate.size());
  }
  est.Hhat = std::move(Hhat);
  est.provenance = std::move(provenance);
  return est;
}

FrameEstimate genie_estimate_frame(const ReceivedFrame& rx, const FrameLayout& layout, const Constellation& c) {
  return detect_frame(rx, layout, c, reference_channel(rx, layout), "genie");
}

// --- symbol by symbol -------------------------------------------------------

SbsConfig SbsConfig::make(rnn::CellKind cell, const FrameLayout& layout, const Constellation& c) {
  SbsConfig cfg;
  cfg.cell = cell;
  cfg.hidden = cell == rnn::CellKind::LSTM ? 64 : 48;
  cfg.layout = layout;
  cfg.constellation = c;
  return cfg;
}

rnn::Architecture SbsConfig::architecture() const {
  return {cell, 2 * layout.kon(), hidden, 2 * layout.kd(), false, rnn::Activation::Linear};
}

void SbsConfig::validate() const {
  layout.validate();
  require(layout.mode == PilotMode::SbsComb, "SBS pipeline needs a comb-pilot layout");
  require(hidden >= 1, "SBS hidden size must be positive");
  require(alpha >= 1.0, "TA alpha must be at least 1");
}

CVector sbs_step_input(const FrameLayout& layout, const CVector& y_prev, const CVector& ta_prev) {
  require(ta_prev.size() == layout.kd(), "sbs_step_input: TA estimate length");
  const CVector pilots = pilot_sequence(layout);
  CVector in(layout.kon());
  in(layout.pilot_rows) = ls_pilot(y_prev(layout.pilot_rows), pilots(layout.pilot_rows));
  in(layout.data_rows) = ta_prev;
  return in;
}

FrameEstimate sbs_run(const ReceivedFrame& rx, const SbsConfig& cfg, const SbsPredictor& predictor,
                      std::string provenance) {
  cfg.validate();
  const auto& layout = cfg.layout;
  require(rx.Y.rows() == layout.kon() && rx.Y.cols() == layout.body_symbols(), "sbs_run: frame shape");
  const CVector pre_ls = ls_preamble(rx.rx_preamble, pilot_sequence(layout));
  CVector ta = pre_ls(layout.data_rows);

  FrameEstimate est;
  est.Hhat.resize(layout.kd(), layout.data_symbols);
  est.bits.reserve(payload_bits(layout, cfg.constellation));
  for (int i = 0; i < layout.data_symbols; ++i) {
    const CVector input = i == 0 ? pre_ls : sbs_step_input(layout, rx.Y.col(i - 1), ta);
    const CVector prior = predictor(i, input);
    require(prior.size() == layout.kd(), "sbs_run: predictor returned the wrong length");
    const CVector y = rx.Y(layout.data_rows, i);
    const auto dpa = dpa_step(y, prior, cfg.constellation, &ta);
    ta = ta_step(ta, dpa.estimate, cfg.alpha);
    est.Hhat.col(i) = ta;
    const auto b = demap_bits(std::span<const cplx>(dpa.symbols.data(), static_cast<std::size_t>(dpa.symbols.size())),
                              cfg.constellation);
    est.bits.insert(est.bits.end(), b.begin(), b.end());
    est.degenerate += static_cast<int>(dpa.degenerate.size());
  }
  est.provenance = std::move(provenance);
  return est;
}

FrameEstimate sbs_estimate_frame(const ReceivedFrame& rx, const rnn::NetworkModel& model, const SbsConfig& cfg) {
  const auto want = cfg.architecture();
  require(!model.bidirectional() && model.forward.kind == want.kind && model.input_dim() == want.input_dim &&
              model.out_dim() == want.out_dim,
          "sbs_estimate_frame: model does not match the pipeline configuration");
  rnn::StreamingRunner runner(model);
  return sbs_run(
      rx, cfg, [&](int, const CVector& input) { return unstack_real(runner.step(stack_real(input))); },
      std::string(rnn::to_string(cfg.cell)) + "-dpa-ta");
}

FrameEstimate dpa_estimate_frame(const ReceivedFrame& rx, const FrameLayout& layout, const Constellation& c) {
  SbsConfig cfg;
  cfg.layout = layout;
  cfg.constellation = c;
  cfg.alpha = 1.0;
  // with alpha = 1 the data rows of the step input hold the previous DPA estimate
  return sbs_run(
      rx, cfg, [&](int, const CVector& input) -> CVector { return input(layout.data_rows); }, "dpa");
}

rnn::Sample sbs_training_sample(const ReceivedFrame& rx, const FrameLayout& layout) {
  require(layout.mode == PilotMode::SbsComb, "sbs_training_sample: comb layout required");
  if (!rx.genie_H) throw InvalidArgument("sbs_training_sample: frame carries no true channel");
  const CMatrix& H = *rx.genie_H;
  const int I = layout.data_symbols;
  rnn::Sample s;
  s.input.resize(2 * layout.kon(), I);
  s.target.resize(2 * layout.kd(), I);
  const CVector pre_ls = ls_preamble(rx.rx_preamble, pilot_sequence(layout));
  for (int i = 0; i < I; ++i) {
    const CVector in = i == 0 ? pre_ls : sbs_step_input(layout, rx.Y.col(i - 1), H(layout.data_rows, i - 1));
    s.input.col(i) = stack_real(in).cast<float>();
    s.target.col(i) = stack_real(H(layout.data_rows, i)).cast<float>();
  }
  return s;
}

// --- frame by frame ---------------------------------------------------------

rnn::Architecture FbfConfig::architecture() const {
  return {rnn::CellKind::GRU, 2 * layout.kon(), hidden, 2 * layout.kon(), true, rnn::Activation::Linear};
}

void FbfConfig::validate() const {
  layout.validate();
  require(layout.mode == PilotMode::FbfBlock && layout.pilot_symbols >= 1,
          "FBF pipeline needs a layout with pilot symbols");
  require(hidden >= 1, "FBF hidden size must be positive");
  require(taps >= 1 && taps <= layout.kon(), "FBF tap count out of range");
}

RMatrix fbf_input_sequence(const ReceivedFrame& rx, const FbfConfig& cfg, const DftBasis& basis) {
  cfg.validate();
  const auto& layout = cfg.layout;
  require(rx.Y.rows() == layout.kon() && rx.Y.cols() == layout.body_symbols(), "fbf: frame shape");
  const auto knots = fbf_knot_estimates(rx, layout, &basis);
  const auto pilots = layout.pilot_columns();
  RMatrix seq = RMatrix::Zero(2 * layout.kon(), 1 + layout.body_symbols());
  seq.col(0) = stack_real(knots[0]);
  for (std::size_t q = 0; q < pilots.size(); ++q) seq.col(1 + pilots[q]) = stack_real(knots[q + 1]);
  return seq;
}

std::vector<double> fbf_step_weights(const FrameLayout& layout) {
  std::vector<double> w(static_cast<std::size_t>(1 + layout.body_symbols()), 0.0);
  for (int c : layout.data_columns()) w[static_cast<std::size_t>(1 + c)] = 1.0;
  return w;
}

FrameEstimate fbf_run(const ReceivedFrame& rx, const FbfConfig& cfg, const DftBasis& basis,
                      const FbfPredictor& predictor, std::string provenance) {
  const RMatrix in = fbf_input_sequence(rx, cfg, basis);
  const RMatrix out = predictor(in);
  require(out.rows() == in.rows() && out.cols() == in.cols(), "fbf_run: predictor output shape");
  const auto cols = cfg.layout.data_columns();
  CMatrix Hhat(cfg.layout.kon(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j)
    Hhat.col(static_cast<Eigen::Index>(j)) = unstack_real(out.col(1 + cols[j]));
  return detect_frame(rx, cfg.layout, cfg.constellation, std::move(Hhat), std::move(provenance));
}

FrameEstimate fbf_estimate_frame(const ReceivedFrame& rx, const rnn::NetworkModel& model, const FbfConfig& cfg,
                                 const DftBasis& basis) {
  const auto want = cfg.architecture();
  require(model.bidirectional() && model.input_dim() == want.input_dim && model.out_dim() == want.out_dim,
          "fbf_estimate_frame: model does not match the pipeline configuration");
  const std::string name = std::string("als-bi") + rnn::to_string(model.forward.kind);
  return fbf_run(
      rx, cfg, basis, [&](const RMatrix& in) { return rnn::run_sequence(model, in); }, name);
}

FrameEstimate wi_estimate_frame(const ReceivedFrame& rx, const FbfConfig& cfg, const DftBasis& basis,
                                const WiWeights& weights) {
  cfg.validate();
  auto grouping = build_subframes(fbf_knot_estimates(rx, cfg.layout, &basis), cfg.layout);
  return detect_frame(rx, cfg.layout, cfg.constellation, wi_interpolate(grouping, weights), "wi");
}

rnn::Sample fbf_training_sample(const ReceivedFrame& rx, const FbfConfig& cfg, const DftBasis& basis) {
  if (!rx.genie_H || !rx.genie_H_preamble)
    throw InvalidArgument("fbf_training_sample: frame carries no true channel");
  const RMatrix in = fbf_input_sequence(rx, cfg, basis);
  RMatrix target(in.rows(), in.cols());
  target.col(0) = stack_real(rx.genie_H_preamble->rightCols(1));
  for (Eigen::Index c = 0; c < rx.genie_H->cols(); ++c) target.col(1 + c) = stack_real(rx.genie_H->col(c));
  return {in.cast<float>(), target.cast<float>()};
}

}  // namespace dsce
