// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <vector>

#include "dsce/types.hpp"

namespace dsce {

struct ChannelRealization;

enum class PilotMode {
  SbsComb,   ///< a few pilot subcarriers in every symbol
  FbfBlock,  ///< full-pilot symbols inserted between data subframes
};

/// Subcarrier and symbol bookkeeping for one frame.
///
/// Only active subcarriers are materialized. Rows of every frame matrix are
/// indexed in `active` order (ascending signed subcarrier index), and
/// `data_rows` / `pilot_rows` index into that order. Columns of the frame body
/// are the data symbols, interleaved with the pilot symbols in FBF mode:
///
///   [preambles] [I_1 data] [pilot 1] [I_2 data] [pilot 2] ... [pilot Q]
struct FrameLayout {
  int fft_size = 64;
  std::vector<int> active;      ///< signed subcarrier index per active row
  std::vector<int> data_rows;   ///< rows of Kd
  std::vector<int> pilot_rows;  ///< rows of Kp (empty in FBF mode)
  int data_symbols = 100;       ///< I
  int n_preambles = 2;
  int pilot_symbols = 0;        ///< Q, FBF only
  PilotMode mode = PilotMode::SbsComb;

  int kon() const { return static_cast<int>(active.size()); }
  int kd() const { return static_cast<int>(data_rows.size()); }
  int kp() const { return static_cast<int>(pilot_rows.size()); }
  /// I, or I + Q in FBF mode.
  int body_symbols() const;
  int total_symbols() const { return n_preambles + body_symbols(); }
  /// FFT bins (0..K-1) that carry nothing.
  std::vector<int> null_bins() const;
  /// FFT bin of an active row.
  int bin_of_row(int row) const;
  /// Body columns holding full-pilot symbols, ascending (FBF only).
  std::vector<int> pilot_columns() const;
  /// Body columns holding data symbols, ascending.
  std::vector<int> data_columns() const;
  /// Data-symbol count of each subframe (FBF only); earlier subframes take the remainder.
  std::vector<int> subframe_sizes() const;

  /// Throws InvalidArgument when the index sets are inconsistent.
  void validate() const;

  /// 802.11p numerology: K=64, 52 active subcarriers, comb pilots at -21,-7,7,21.
  static FrameLayout ieee80211p_sbs(int data_symbols, int n_preambles = 2);
  /// 802.11p numerology with Q full-pilot symbols.
  static FrameLayout ieee80211p_fbf(int data_symbols, int pilot_symbols, int n_preambles = 2);
};

/// Gray-mapped square QAM with unit average energy.
///
/// The bit label of point `idx` is `idx` itself, most significant bit first;
/// the upper half of the label selects the in-phase level and the lower half
/// the quadrature level, each through a reflected Gray code.
struct Constellation {
  int order = 4;
  int bits_per_symbol = 2;
  std::vector<cplx> points;

  Bits label(std::size_t idx) const;
};

Constellation build_constellation(int order);

std::vector<cplx> modulate(std::span<const std::uint8_t> bits, const Constellation& c);

/// Euclidean-nearest point; ties go to the lowest index.
std::size_t demap_index(cplx y, const Constellation& c);
inline cplx demap(cplx y, const Constellation& c) { return c.points[demap_index(y, c)]; }
std::vector<cplx> demap(std::span<const cplx> y, const Constellation& c);
Bits demap_bits(std::span<const cplx> y, const Constellation& c);

/// Known unit-modulus sequence used on pilot subcarriers, pilot symbols and preambles.
CVector pilot_sequence(const FrameLayout& layout);

struct Frame {
  CMatrix X;         ///< Kon x body_symbols
  CMatrix preamble;  ///< Kon x n_preambles
  FrameLayout layout;
  Bits tx_bits;
};

struct ReceivedFrame {
  CMatrix Y;            ///< Kon x body_symbols
  CMatrix rx_preamble;  ///< Kon x n_preambles
  double noise_var = 0.0;
  std::optional<CMatrix> genie_H;           ///< true channel over the body
  std::optional<CMatrix> genie_H_preamble;  ///< true channel over the preambles
};

/// Payload bits required by a layout: Kd * I * log2(M).
std::size_t payload_bits(const FrameLayout& layout, const Constellation& c);

/// Data symbols are placed column by column (ascending data column), and
/// within a column by ascending data row.
Frame assemble_frame(std::span<const std::uint8_t> bits, const FrameLayout& layout,
                     const Constellation& c);

/// Data-row, data-column symbols of a body matrix in payload order.
std::vector<cplx> extract_data(const CMatrix& body, const FrameLayout& layout);

/// Noise variance for unit signal power.
inline double noise_variance(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

/// Y = H .* X + V with V ~ CN(0, sigma^2), sigma^2 = 10^(-snr/10).
/// The channel must span n_preambles + body symbols (preambles first).
/// A given noise_seed always draws the same unit-variance noise, scaled by sigma.
ReceivedFrame transmit(const Frame& f, const ChannelRealization& ch, double snr_db,
                       std::uint64_t noise_seed);

/// Noiseless variant (sigma^2 = 0).
ReceivedFrame transmit_noiseless(const Frame& f, const ChannelRealization& ch);

}  // namespace dsce
