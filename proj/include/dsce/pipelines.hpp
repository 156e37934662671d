// SPDX-License-Identifier: Apache-2.0
// End-to-end estimators: the causal recurrent DPA-TA recursion, the
// frame-level ALS + bidirectional interpolator, and their classical baselines.
#pragma once

#include <functional>
#include <string>

#include "dsce/dft_basis.hpp"
#include "dsce/estimators.hpp"
#include "dsce/ofdm.hpp"
#include "dsce/rnn.hpp"

namespace dsce {

/// [Re(h); Im(h)].
RVector stack_real(const CVector& h);
/// Inverse of stack_real; throws on odd length.
CVector unstack_real(const RVector& v);

struct Detection {
  Bits bits;
  std::vector<int> degenerate;  ///< positions with |Hhat| below kDegenerateThreshold
};

/// bits = demap(y / Hhat). Degenerate positions are flagged and detected as y = 0.
Detection equalize_detect(const CVector& y, const CVector& hhat, const Constellation& c);

/// Channel estimate over the data grid plus the detected payload.
struct FrameEstimate {
  CMatrix Hhat;  ///< SBS: Kd x I; FBF: Kon x I (data columns in order)
  Bits bits;     ///< same order as Frame::tx_bits
  int degenerate = 0;
  std::string provenance;
};

/// The true channel on the grid a FrameEstimate covers.
CMatrix reference_channel(const ReceivedFrame& rx, const FrameLayout& layout);

/// Detects every data column of the frame with a data-grid estimate.
FrameEstimate detect_frame(const ReceivedFrame& rx, const FrameLayout& layout, const Constellation& c,
                           CMatrix Hhat, std::string provenance);

FrameEstimate genie_estimate_frame(const ReceivedFrame& rx, const FrameLayout& layout, const Constellation& c);

// --- symbol by symbol -------------------------------------------------------

struct SbsConfig {
  rnn::CellKind cell = rnn::CellKind::GRU;
  int hidden = 48;
  double alpha = 2.0;
  FrameLayout layout = FrameLayout::ieee80211p_sbs(100);
  Constellation constellation = build_constellation(4);

  /// Hidden size 64 for LSTM, 48 otherwise.
  static SbsConfig make(rnn::CellKind cell, const FrameLayout& layout, const Constellation& c);
  /// Input 2 Kon, output 2 Kd, linear readout.
  rnn::Architecture architecture() const;
  void validate() const;
};

/// Maps the step input (Kon, complex) of body column i to the prior at the data rows (Kd).
using SbsPredictor = std::function<CVector(int i, const CVector& input)>;

/// The input fed to the predictor at column i: preamble LS everywhere for
/// i = 0, else LS pilots of column i-1 at the pilot rows and the previous
/// TA estimate at the data rows.
CVector sbs_step_input(const FrameLayout& layout, const CVector& y_prev, const CVector& ta_prev);

/// DPA-TA recursion driven by an arbitrary prior predictor. Detection uses
/// the DPA decisions; Hhat holds the TA estimates.
FrameEstimate sbs_run(const ReceivedFrame& rx, const SbsConfig& cfg, const SbsPredictor& predictor,
                      std::string provenance);

FrameEstimate sbs_estimate_frame(const ReceivedFrame& rx, const rnn::NetworkModel& model, const SbsConfig& cfg);

/// DPA whose prior is the previous DPA estimate (alpha = 1, no network).
FrameEstimate dpa_estimate_frame(const ReceivedFrame& rx, const FrameLayout& layout, const Constellation& c);

/// Genie-forced training pair: inputs use noisy LS pilots and the true
/// channel of the previous column, target is the true channel at the data rows.
rnn::Sample sbs_training_sample(const ReceivedFrame& rx, const FrameLayout& layout);

// --- frame by frame ---------------------------------------------------------

struct FbfConfig {
  int hidden = 32;
  FrameLayout layout = FrameLayout::ieee80211p_fbf(100, 3);
  Constellation constellation = build_constellation(4);
  int taps = 8;  ///< L of the delay subspace used by ALS

  rnn::Architecture architecture() const;
  void validate() const;
};

/// 2 Kon x (1 + body): column 0 is the preamble ALS estimate, pilot columns
/// carry ALS estimates, data columns are zero.
RMatrix fbf_input_sequence(const ReceivedFrame& rx, const FbfConfig& cfg, const DftBasis& basis);

/// Per-step loss weights: 1 on data columns, 0 elsewhere.
std::vector<double> fbf_step_weights(const FrameLayout& layout);

using FbfPredictor = std::function<RMatrix(const RMatrix& inputs)>;

FrameEstimate fbf_run(const ReceivedFrame& rx, const FbfConfig& cfg, const DftBasis& basis,
                      const FbfPredictor& predictor, std::string provenance);

FrameEstimate fbf_estimate_frame(const ReceivedFrame& rx, const rnn::NetworkModel& model, const FbfConfig& cfg,
                                 const DftBasis& basis);

FrameEstimate wi_estimate_frame(const ReceivedFrame& rx, const FbfConfig& cfg, const DftBasis& basis,
                                const WiWeights& weights);

/// Target is the true channel at every step of the input sequence.
rnn::Sample fbf_training_sample(const ReceivedFrame& rx, const FbfConfig& cfg, const DftBasis& basis);

}  // namespace dsce
