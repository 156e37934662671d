// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dsce/types.hpp"

namespace dsce {

class DftBasis;

struct PowerDelayProfile {
  std::string name;
  std::vector<double> path_gains_db;
  std::vector<double> path_delays_ns;
};

/// Vehicle-to-vehicle urban canyon, 12 paths.
PowerDelayProfile vtv_uc();
/// Vehicle-to-vehicle expressway same direction with wall, 12 paths.
PowerDelayProfile vtv_sdww();
/// Looks up a built-in profile by name ("VTV-UC", "VTV-SDWW"), case-insensitive.
PowerDelayProfile builtin_profile(const std::string& name);

/// Reads profiles from a plain-text table, one profile per line:
///
///   name  g1,g2,...  d1,d2,...
///
/// Gains are in dB, delays in ns. Blank lines and lines starting with '#' are skipped.
std::vector<PowerDelayProfile> parse_profiles(std::istream& in);

struct TapSet {
  std::vector<double> powers;      ///< linear, normalized to sum 1
  std::vector<double> raw_powers;  ///< linear, before normalization
  double sample_period_ns = 100.0;

  int count() const { return static_cast<int>(powers.size()); }
};

/// Rounds every path delay to the nearest sample, sums coinciding paths and
/// normalizes. Tap count is round(max_delay / Ts) + 1.
TapSet map_delays_to_taps(const PowerDelayProfile& pdp, double sample_period_ns = 100.0);

struct FadingParams {
  double doppler_hz = 0.0;
  double symbol_duration_s = 8e-6;
  int sinusoids = 32;
};

struct ChannelRealization {
  CMatrix g;  ///< L x S tap gains
  CMatrix H;  ///< Kon x S frequency response
  double doppler_hz = 0.0;
  double symbol_duration_s = 8e-6;

  int symbols() const { return static_cast<int>(H.cols()); }
};

/// One Clarke/Jakes realization per tap as a sum of sinusoids with random
/// arrival angles and phases:
///
///   g_l(t) = sqrt(p_l / N) * sum_n exp(j (2 pi fd cos(a_n) t + phi_n))
///
/// whose ensemble autocorrelation is p_l * J0(2 pi fd tau). Deterministic in seed.
ChannelRealization generate_channel(const TapSet& taps, const DftBasis& basis,
                                    const FadingParams& fading, int symbols, std::uint64_t seed);

/// H == 1 on every subcarrier and symbol (AWGN reference channel).
ChannelRealization unit_channel(int kon, int symbols);

struct CorrelationProfile {
  std::vector<double> psi;  ///< psi[i-1] for i = 1..I; psi[0] is the self term
  double doppler_hz = 0.0;
  int symbols = 0;
  std::size_t realizations = 0;
};

/// Streaming estimator of psi_i = Re E[h_1 . conj(h_i)], averaged over active
/// subcarriers and realizations, over the first `symbols` columns of H.
class CorrelationAccumulator {
 public:
  explicit CorrelationAccumulator(int symbols);
  void add(const ChannelRealization& ch);
  void merge(const CorrelationAccumulator& other);
  /// Divides by the i = 1 self term when normalize is set.
  CorrelationProfile finish(bool normalize) const;

 private:
  std::vector<double> sums_;
  double doppler_hz_ = 0.0;
  std::size_t count_ = 0;
};

CorrelationProfile average_correlation(std::span<const ChannelRealization> realizations,
                                       bool normalize);

}  // namespace dsce
