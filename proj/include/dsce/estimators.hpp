// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "dsce/channel.hpp"
#include "dsce/dft_basis.hpp"
#include "dsce/ofdm.hpp"

namespace dsce {

/// A channel estimate surface over (subcarrier, symbol).
struct EstimateMatrix {
  CMatrix Hhat;
  std::string provenance;
  bool per_symbol = true;
};

/// Preamble least squares: sum_u y_u[k] / (P x_p[k]) over the P preamble columns.
CVector ls_preamble(const CMatrix& rx_preamble, const CVector& pilot_seq);

/// Single-symbol least squares at pilot positions: y[k] / x_p[k].
CVector ls_pilot(const CVector& y_pilots, const CVector& pilot_seq);

inline constexpr double kDegenerateThreshold = 1e-9;

struct DpaResult {
  CVector symbols;   ///< hard decisions
  CVector estimate;  ///< y / decisions
  std::vector<int> degenerate;  ///< positions where the prior was unusable
};

/// Data-pilot aided refresh: d = D(y / prior), h = y / d.
/// Where |prior| < kDegenerateThreshold the fallback (most recent valid
/// estimate) is divided instead; without a fallback such positions throw.
DpaResult dpa_step(const CVector& y, const CVector& prior, const Constellation& c,
                   const CVector* fallback = nullptr);

/// (1 - 1/alpha) prev + (1/alpha) cur. alpha may be +inf (frozen).
CVector ta_step(const CVector& prev, const CVector& cur, double alpha);

/// Residual AWGN power ratio after q alpha=2 averaging steps:
/// R_1 = 1, R_q = (4^(q-1) + 2) / (3 * 4^(q-1)).
double ta_noise_ratio(int q);

/// Simple LS on a full-pilot symbol.
CVector sls_pilot_symbol(const CVector& y, const CVector& pilot_seq);

/// SLS projected onto the L-tap delay subspace.
CVector als_pilot_symbol(const CVector& y, const CVector& pilot_seq, const DftBasis& basis);

/// L-tap impulse response fitted from a subset of rows (|rows| >= L), expanded to all Kon.
CVector dft_pilot_symbol(const CVector& y, const CVector& pilot_seq, const DftBasis& basis,
                         const std::vector<int>& rows);

struct Subframe {
  int left_knot = 0;   ///< index into SubframeGrouping::knots
  int right_knot = 1;
  std::vector<int> data_columns;  ///< body columns
};

/// Knot 0 is the preamble estimate, knot q the q-th pilot-symbol estimate;
/// subframe f spans the data symbols between knots f and f+1.
struct SubframeGrouping {
  std::vector<CVector> knots;
  std::vector<Subframe> subframes;
};

SubframeGrouping build_subframes(std::vector<CVector> knot_estimates, const FrameLayout& layout);

/// Subframe geometry without estimates.
std::vector<Subframe> subframe_geometry(const FrameLayout& layout);

struct WiWeights {
  std::vector<RMatrix> C;  ///< per subframe, 2 x I_f
  std::vector<Subframe> bounds;
};

enum class WiMethod { EmpiricalLs, JakesClosedForm };

/// How the knot estimates are produced; fixes their noise level.
struct WiSetup {
  FrameLayout layout;
  TapSet taps;
  FadingParams fading;
  double noise_var = 0.0;
  bool als_knots = true;
  double ridge = 1e-8;
  // empirical-LS only
  std::size_t training_realizations = 2000;
  std::uint64_t seed = 0;
};

/// empirical-LS: per data symbol, the real 2-vector c minimizing
/// sum |H_j - [h_left, h_right] c|^2 over simulated realizations and subcarriers.
/// jakes-closed-form: c = (R_kk + diag(noise)) ^-1 r_kj from J0 time correlations.
WiWeights wi_weights(const WiSetup& setup, WiMethod method);

/// Real MMSE weights for a Jakes process sampled at integer symbol times.
/// Each knot averages the channel over its time set and carries the given
/// noise variance; doppler_norm = fd * symbol_duration.
RMatrix jakes_interpolation_weights(const std::vector<int>& left_times,
                                    const std::vector<int>& right_times, double left_noise,
                                    double right_noise, const std::vector<int>& data_times,
                                    double doppler_norm, double ridge = 1e-8);

/// Kon x I estimate over the data columns in ascending order.
CMatrix wi_interpolate(const SubframeGrouping& grouping, const WiWeights& weights);

/// Knot estimates (preamble then pilot symbols) of a received FBF frame.
std::vector<CVector> fbf_knot_estimates(const ReceivedFrame& rx, const FrameLayout& layout,
                                        const DftBasis* als_basis);

}  // namespace dsce
