// SPDX-License-Identifier: Apache-2.0
#include "dsce/channel.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "dsce/dft_basis.hpp"
#include "dsce/random.hpp"

namespace dsce {

PowerDelayProfile vtv_uc() {
  return {"VTV-UC",
          {0, 0, -10, -10, -10, -17.8, -17.8, -17.8, -21.1, -21.1, -26.3, -26.3},
          {0, 1, 100, 101, 102, 200, 201, 202, 300, 301, 400, 401}};
}

PowerDelayProfile vtv_sdww() {
  return {"VTV-SDWW",
          {0, 0, -11.2, -11.2, -19, -21.9, -25.3, -25.3, -24.4, -28, -26.1, -26.1},
          {0, 1, 100, 101, 200, 300, 400, 401, 500, 600, 700, 701}};
}

namespace {

std::string upper(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return s;
}

std::vector<double> parse_list(const std::string& field) {
  std::vector<double> out;
  std::stringstream ss(field);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    out.push_back(std::stod(item, &used));
    if (used != item.size()) throw InvalidArgument("profile table: bad number '" + item + "'");
  }
  return out;
}

}  // namespace

PowerDelayProfile builtin_profile(const std::string& name) {
  const auto n = upper(name);
  if (n == "VTV-UC") return vtv_uc();
  if (n == "VTV-SDWW") return vtv_sdww();
  throw InvalidArgument("unknown power-delay profile '" + name + "'");
}

std::vector<PowerDelayProfile> parse_profiles(std::istream& in) {
  std::vector<PowerDelayProfile> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::stringstream ss(line);
    PowerDelayProfile p;
    std::string gains, delays, extra;
    if (!(ss >> p.name) || p.name.front() == '#') continue;
    if (!(ss >> gains >> delays) || (ss >> extra))
      throw InvalidArgument("profile table line " + std::to_string(lineno) +
                            ": expected 'name gains delays'");
    try {
      p.path_gains_db = parse_list(gains);
      p.path_delays_ns = parse_list(delays);
    } catch (const std::logic_error& e) {
      throw InvalidArgument("profile table line " + std::to_string(lineno) + ": " + e.what());
    }
    if (p.path_gains_db.size() != p.path_delays_ns.size())
      throw InvalidArgument("profile table line " + std::to_string(lineno) +
                            ": gain and delay lists differ in length");
    out.push_back(std::move(p));
  }
  return out;
}

TapSet map_delays_to_taps(const PowerDelayProfile& pdp, double sample_period_ns) {
  require(sample_period_ns > 0, "map_delays_to_taps: sample period must be positive");
  require(!pdp.path_delays_ns.empty(), "map_delays_to_taps: empty profile");
  require(pdp.path_delays_ns.size() == pdp.path_gains_db.size(),
          "map_delays_to_taps: gain and delay lists differ in length");
  for (double d : pdp.path_delays_ns) require(d >= 0, "map_delays_to_taps: negative delay");

  const double max_delay = *std::max_element(pdp.path_delays_ns.begin(), pdp.path_delays_ns.end());
  const int taps = static_cast<int>(std::floor(max_delay / sample_period_ns + 0.5)) + 1;
  TapSet t;
  t.sample_period_ns = sample_period_ns;
  t.raw_powers.assign(taps, 0.0);
  for (std::size_t p = 0; p < pdp.path_delays_ns.size(); ++p) {
    const auto tap = static_cast<std::size_t>(std::floor(pdp.path_delays_ns[p] / sample_period_ns + 0.5));
    t.raw_powers[tap] += std::pow(10.0, pdp.path_gains_db[p] / 10.0);
  }
  const double total = std::accumulate(t.raw_powers.begin(), t.raw_powers.end(), 0.0);
  t.powers.resize(taps);
  for (int l = 0; l < taps; ++l) t.powers[l] = t.raw_powers[l] / total;
  return t;
}

ChannelRealization generate_channel(const TapSet& taps, const DftBasis& basis,
                                    const FadingParams& fading, int symbols, std::uint64_t seed) {
  require(fading.doppler_hz >= 0, "generate_channel: Doppler must be non-negative");
  require(symbols >= 1, "generate_channel: need at least one symbol");
  require(fading.sinusoids >= 1, "generate_channel: need at least one sinusoid");
  require(basis.taps() == taps.count(), "generate_channel: basis and tap set disagree on L");

  const int L = taps.count();
  const int N = fading.sinusoids;
  constexpr double two_pi = 2.0 * std::numbers::pi;
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, two_pi);

  ChannelRealization ch;
  ch.doppler_hz = fading.doppler_hz;
  ch.symbol_duration_s = fading.symbol_duration_s;
  ch.g = CMatrix::Zero(L, symbols);
  std::vector<double> omega(N), phase(N);
  for (int l = 0; l < L; ++l) {
    // Draw for every tap, even zero-power ones, so tap l's stream does not depend on the others.
    for (int n = 0; n < N; ++n) {
      omega[n] = two_pi * fading.doppler_hz * std::cos(u(rng)) * fading.symbol_duration_s;
      phase[n] = u(rng);
    }
    if (taps.powers[l] == 0.0) continue;
    const double amp = std::sqrt(taps.powers[l] / N);
    for (int s = 0; s < symbols; ++s) {
      cplx acc = 0.0;
      for (int n = 0; n < N; ++n) acc += std::polar(1.0, omega[n] * s + phase[n]);
      ch.g(l, s) = amp * acc;
    }
  }
  ch.H = basis.f_on() * ch.g;
  return ch;
}

ChannelRealization unit_channel(int kon, int symbols) {
  ChannelRealization ch;
  ch.g = CMatrix::Ones(1, symbols);
  ch.H = CMatrix::Ones(kon, symbols);
  return ch;
}

CorrelationAccumulator::CorrelationAccumulator(int symbols) : sums_(symbols, 0.0) {
  require(symbols >= 2, "average_correlation: need at least two symbols");
}

void CorrelationAccumulator::add(const ChannelRealization& ch) {
  const auto n = static_cast<Eigen::Index>(sums_.size());
  require(ch.H.cols() >= n, "average_correlation: realization shorter than the profile");
  const auto first = ch.H.col(0);
  const double kon = static_cast<double>(ch.H.rows());
  for (Eigen::Index i = 0; i < n; ++i) sums_[i] += first.dot(ch.H.col(i)).real() / kon;
  doppler_hz_ = ch.doppler_hz;
  ++count_;
}

void CorrelationAccumulator::merge(const CorrelationAccumulator& other) {
  require(other.sums_.size() == sums_.size(), "CorrelationAccumulator: size mismatch");
  for (std::size_t i = 0; i < sums_.size(); ++i) sums_[i] += other.sums_[i];
  if (other.count_) doppler_hz_ = other.doppler_hz_;
  count_ += other.count_;
}

CorrelationProfile CorrelationAccumulator::finish(bool normalize) const {
  require(count_ > 0, "average_correlation: no realizations");
  CorrelationProfile p;
  p.doppler_hz = doppler_hz_;
  p.symbols = static_cast<int>(sums_.size());
  p.realizations = count_;
  p.psi.resize(sums_.size());
  const double norm = normalize ? sums_[0] : static_cast<double>(count_);
  for (std::size_t i = 0; i < sums_.size(); ++i) p.psi[i] = sums_[i] / norm;
  return p;
}

CorrelationProfile average_correlation(std::span<const ChannelRealization> realizations,
                                       bool normalize) {
  require(!realizations.empty(), "average_correlation: empty input");
  CorrelationAccumulator acc(realizations.front().symbols());
  for (const auto& ch : realizations) acc.add(ch);
  return acc.finish(normalize);
}

}  // namespace dsce
