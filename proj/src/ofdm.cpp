// SPDX-License-Identifier: Apache-2.0
#include "dsce/ofdm.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "dsce/channel.hpp"
#include "dsce/random.hpp"

namespace dsce {

namespace {

int gray_decode(int g) {
  int n = 0;
  for (; g; g >>= 1) n ^= g;
  return n;
}

std::vector<int> ieee80211p_active() {
  std::vector<int> active;
  for (int s = -26; s <= 26; ++s)
    if (s != 0) active.push_back(s);
  return active;
}

}  // namespace

int FrameLayout::body_symbols() const {
  return mode == PilotMode::FbfBlock ? data_symbols + pilot_symbols : data_symbols;
}

int FrameLayout::bin_of_row(int row) const {
  return ((active.at(row) % fft_size) + fft_size) % fft_size;
}

std::vector<int> FrameLayout::null_bins() const {
  std::set<int> used;
  for (int r = 0; r < kon(); ++r) used.insert(bin_of_row(r));
  std::vector<int> out;
  for (int b = 0; b < fft_size; ++b)
    if (!used.count(b)) out.push_back(b);
  return out;
}

std::vector<int> FrameLayout::subframe_sizes() const {
  if (mode != PilotMode::FbfBlock || pilot_symbols < 1) return {};
  std::vector<int> sizes(pilot_symbols, data_symbols / pilot_symbols);
  for (int f = 0; f < data_symbols % pilot_symbols; ++f) ++sizes[f];
  return sizes;
}

std::vector<int> FrameLayout::pilot_columns() const {
  std::vector<int> cols;
  int col = 0;
  for (int sz : subframe_sizes()) {
    col += sz;
    cols.push_back(col++);
  }
  return cols;
}

std::vector<int> FrameLayout::data_columns() const {
  const auto pilots = pilot_columns();
  std::vector<int> cols;
  for (int c = 0, p = 0; c < body_symbols(); ++c) {
    if (p < static_cast<int>(pilots.size()) && pilots[p] == c) {
      ++p;
      continue;
    }
    cols.push_back(c);
  }
  return cols;
}

void FrameLayout::validate() const {
  require(fft_size > 0, "FrameLayout: fft_size must be positive");
  require(kon() > 0 && kon() <= fft_size, "FrameLayout: active subcarrier count out of range");
  require(data_symbols >= 0, "FrameLayout: negative data symbol count");
  require(n_preambles >= 1, "FrameLayout: at least one preamble symbol is required");
  std::set<int> bins;
  for (int r = 0; r < kon(); ++r) bins.insert(bin_of_row(r));
  require(static_cast<int>(bins.size()) == kon(), "FrameLayout: duplicate active subcarrier");

  std::vector<int> seen(kon(), 0);
  for (int r : data_rows) {
    require(r >= 0 && r < kon(), "FrameLayout: data row out of range");
    ++seen[r];
  }
  for (int r : pilot_rows) {
    require(r >= 0 && r < kon(), "FrameLayout: pilot row out of range");
    ++seen[r];
  }
  for (int s : seen) require(s == 1, "FrameLayout: data and pilot rows must partition the active rows");
  require(std::is_sorted(data_rows.begin(), data_rows.end()), "FrameLayout: data rows must ascend");
  require(std::is_sorted(pilot_rows.begin(), pilot_rows.end()), "FrameLayout: pilot rows must ascend");

  if (mode == PilotMode::FbfBlock) {
    require(pilot_rows.empty(), "FrameLayout: FBF data symbols carry no pilot subcarriers");
    require(pilot_symbols >= 1, "FrameLayout: FBF mode needs at least one pilot symbol");
  } else {
    require(pilot_symbols == 0, "FrameLayout: pilot symbols are an FBF-only feature");
  }
}

FrameLayout FrameLayout::ieee80211p_sbs(int data_symbols, int n_preambles) {
  FrameLayout l;
  l.active = ieee80211p_active();
  const std::set<int> pilots{-21, -7, 7, 21};
  for (int r = 0; r < l.kon(); ++r) (pilots.count(l.active[r]) ? l.pilot_rows : l.data_rows).push_back(r);
  l.data_symbols = data_symbols;
  l.n_preambles = n_preambles;
  l.mode = PilotMode::SbsComb;
  l.validate();
  return l;
}

FrameLayout FrameLayout::ieee80211p_fbf(int data_symbols, int pilot_symbols, int n_preambles) {
  FrameLayout l;
  l.active = ieee80211p_active();
  for (int r = 0; r < l.kon(); ++r) l.data_rows.push_back(r);
  l.data_symbols = data_symbols;
  l.n_preambles = n_preambles;
  l.pilot_symbols = pilot_symbols;
  l.mode = PilotMode::FbfBlock;
  l.validate();
  return l;
}

Bits Constellation::label(std::size_t idx) const {
  Bits b(bits_per_symbol);
  for (int i = 0; i < bits_per_symbol; ++i) b[i] = (idx >> (bits_per_symbol - 1 - i)) & 1U;
  return b;
}

Constellation build_constellation(int order) {
  if (order != 4 && order != 16 && order != 64)
    throw InvalidArgument("unsupported modulation order " + std::to_string(order));
  Constellation c;
  c.order = order;
  c.bits_per_symbol = static_cast<int>(std::lround(std::log2(order)));
  const int half = c.bits_per_symbol / 2;
  const int side = 1 << half;
  const double scale = 1.0 / std::sqrt(2.0 * (order - 1) / 3.0);
  c.points.resize(order);
  for (int idx = 0; idx < order; ++idx) {
    const int vi = idx >> half;
    const int vq = idx & (side - 1);
    const double ai = (side - 1) - 2.0 * gray_decode(vi);
    const double aq = (side - 1) - 2.0 * gray_decode(vq);
    c.points[idx] = cplx(ai, aq) * scale;
  }
  return c;
}

std::vector<cplx> modulate(std::span<const std::uint8_t> bits, const Constellation& c) {
  const auto m = static_cast<std::size_t>(c.bits_per_symbol);
  if (bits.size() % m != 0)
    throw InvalidArgument("modulate: bit count " + std::to_string(bits.size()) +
                          " is not a multiple of " + std::to_string(m));
  std::vector<cplx> out(bits.size() / m);
  for (std::size_t s = 0; s < out.size(); ++s) {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < m; ++i) idx = (idx << 1) | (bits[s * m + i] & 1U);
    out[s] = c.points[idx];
  }
  return out;
}

std::size_t demap_index(cplx y, const Constellation& c) {
  std::size_t best = 0;
  double best_d = std::norm(y - c.points[0]);
  for (std::size_t i = 1; i < c.points.size(); ++i) {
    const double d = std::norm(y - c.points[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::vector<cplx> demap(std::span<const cplx> y, const Constellation& c) {
  std::vector<cplx> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = demap(y[i], c);
  return out;
}

Bits demap_bits(std::span<const cplx> y, const Constellation& c) {
  const auto m = static_cast<std::size_t>(c.bits_per_symbol);
  Bits out(y.size() * m);
  for (std::size_t s = 0; s < y.size(); ++s) {
    const std::size_t idx = demap_index(y[s], c);
    for (std::size_t i = 0; i < m; ++i) out[s * m + i] = (idx >> (m - 1 - i)) & 1U;
  }
  return out;
}

CVector pilot_sequence(const FrameLayout& layout) { return CVector::Ones(layout.kon()); }

std::size_t payload_bits(const FrameLayout& layout, const Constellation& c) {
  return static_cast<std::size_t>(layout.kd()) * layout.data_symbols * c.bits_per_symbol;
}

Frame assemble_frame(std::span<const std::uint8_t> bits, const FrameLayout& layout,
                     const Constellation& c) {
  layout.validate();
  const std::size_t need = payload_bits(layout, c);
  if (bits.size() != need)
    throw InvalidArgument("assemble_frame: payload has " + std::to_string(bits.size()) +
                          " bits, layout needs " + std::to_string(need));
  const auto symbols = modulate(bits, c);
  const CVector pilots = pilot_sequence(layout);

  Frame f;
  f.layout = layout;
  f.tx_bits.assign(bits.begin(), bits.end());
  f.preamble = pilots.replicate(1, layout.n_preambles);
  f.X = CMatrix::Zero(layout.kon(), layout.body_symbols());
  for (int col : layout.pilot_columns()) f.X.col(col) = pilots;
  std::size_t s = 0;
  for (int col : layout.data_columns()) {
    for (int r : layout.pilot_rows) f.X(r, col) = pilots(r);
    for (int r : layout.data_rows) f.X(r, col) = symbols[s++];
  }
  return f;
}

std::vector<cplx> extract_data(const CMatrix& body, const FrameLayout& layout) {
  std::vector<cplx> out;
  out.reserve(static_cast<std::size_t>(layout.kd()) * layout.data_symbols);
  for (int col : layout.data_columns())
    for (int r : layout.data_rows) out.push_back(body(r, col));
  return out;
}

namespace {

ReceivedFrame propagate(const Frame& f, const ChannelRealization& ch) {
  const auto& l = f.layout;
  if (ch.H.rows() != l.kon() || ch.H.cols() != l.total_symbols())
    throw InvalidArgument("transmit: channel is " + std::to_string(ch.H.rows()) + "x" +
                          std::to_string(ch.H.cols()) + ", frame needs " + std::to_string(l.kon()) +
                          "x" + std::to_string(l.total_symbols()));
  ReceivedFrame rx;
  rx.genie_H_preamble = ch.H.leftCols(l.n_preambles);
  rx.genie_H = ch.H.rightCols(l.body_symbols());
  rx.rx_preamble = rx.genie_H_preamble->cwiseProduct(f.preamble);
  rx.Y = rx.genie_H->cwiseProduct(f.X);
  return rx;
}

}  // namespace

ReceivedFrame transmit_noiseless(const Frame& f, const ChannelRealization& ch) {
  return propagate(f, ch);
}

ReceivedFrame transmit(const Frame& f, const ChannelRealization& ch, double snr_db,
                       std::uint64_t noise_seed) {
  if (!std::isfinite(snr_db)) throw InvalidArgument("transmit: snr_db must be finite");
  ReceivedFrame rx = propagate(f, ch);
  rx.noise_var = noise_variance(snr_db);
  const double sigma = std::sqrt(rx.noise_var);
  Rng rng(noise_seed);
  std::normal_distribution<double> n(0.0, std::sqrt(0.5));
  auto add_noise = [&](CMatrix& m) {
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const double re = n(rng);
        const double im = n(rng);
        m(r, c) += sigma * cplx(re, im);
      }
  };
  add_noise(rx.rx_preamble);
  add_noise(rx.Y);
  return rx;
}

}  // namespace dsce
