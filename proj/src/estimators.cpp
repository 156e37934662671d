// SPDX-License-Identifier: Apache-2.0
#include "dsce/estimators.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "dsce/random.hpp"

namespace dsce {

namespace {

void require_nonzero(const CVector& v, const char* who) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (v(i) == cplx(0.0)) throw InvalidArgument(std::string(who) + ": zero pilot value");
}

}  // namespace

CVector ls_preamble(const CMatrix& rx_preamble, const CVector& pilot_seq) {
  require(rx_preamble.cols() >= 1, "ls_preamble: need at least one preamble symbol");
  require(rx_preamble.rows() == pilot_seq.size(), "ls_preamble: pilot length mismatch");
  require_nonzero(pilot_seq, "ls_preamble");
  const double p = static_cast<double>(rx_preamble.cols());
  return rx_preamble.rowwise().sum().cwiseQuotient(pilot_seq * p);
}

CVector ls_pilot(const CVector& y_pilots, const CVector& pilot_seq) {
  require(y_pilots.size() >= 1, "ls_pilot: need at least one pilot");
  require(y_pilots.size() == pilot_seq.size(), "ls_pilot: pilot length mismatch");
  require_nonzero(pilot_seq, "ls_pilot");
  return y_pilots.cwiseQuotient(pilot_seq);
}

DpaResult dpa_step(const CVector& y, const CVector& prior, const Constellation& c,
                   const CVector* fallback) {
  require(y.size() == prior.size(), "dpa_step: prior length mismatch");
  require(!fallback || fallback->size() == y.size(), "dpa_step: fallback length mismatch");
  DpaResult r;
  r.symbols.resize(y.size());
  r.estimate.resize(y.size());
  for (Eigen::Index k = 0; k < y.size(); ++k) {
    cplx p = prior(k);
    if (!(std::abs(p) >= kDegenerateThreshold)) {
      r.degenerate.push_back(static_cast<int>(k));
      if (!fallback || !(std::abs((*fallback)(k)) >= kDegenerateThreshold))
        throw RuntimeError("dpa_step: degenerate prior at subcarrier " + std::to_string(k) +
                           " and no usable fallback");
      p = (*fallback)(k);
    }
    r.symbols(k) = demap(y(k) / p, c);
    r.estimate(k) = y(k) / r.symbols(k);
  }
  return r;
}

CVector ta_step(const CVector& prev, const CVector& cur, double alpha) {
  require(alpha >= 1.0, "ta_step: alpha must be >= 1");
  require(prev.size() == cur.size(), "ta_step: length mismatch");
  const double w = std::isinf(alpha) ? 0.0 : 1.0 / alpha;
  return (1.0 - w) * prev + w * cur;
}

double ta_noise_ratio(int q) {
  require(q >= 1, "ta_noise_ratio: q must be >= 1");
  if (q == 1) return 1.0;
  const double p = std::pow(4.0, q - 1);
  return (p + 2.0) / (3.0 * p);
}

CVector sls_pilot_symbol(const CVector& y, const CVector& pilot_seq) {
  require(y.size() == pilot_seq.size(), "sls_pilot_symbol: pilot length mismatch");
  require_nonzero(pilot_seq, "sls_pilot_symbol");
  return y.cwiseQuotient(pilot_seq);
}

CVector als_pilot_symbol(const CVector& y, const CVector& pilot_seq, const DftBasis& basis) {
  require(y.size() == basis.rows(), "als_pilot_symbol: basis row mismatch");
  return basis.project(sls_pilot_symbol(y, pilot_seq));
}

CVector dft_pilot_symbol(const CVector& y, const CVector& pilot_seq, const DftBasis& basis,
                         const std::vector<int>& rows) {
  require(y.size() == basis.rows(), "dft_pilot_symbol: basis row mismatch");
  require(static_cast<int>(rows.size()) >= basis.taps(), "dft_pilot_symbol: fewer pilots than taps");
  const auto n = static_cast<Eigen::Index>(rows.size());
  CMatrix f(n, basis.taps());
  CVector ls(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    f.row(i) = basis.f_on().row(rows[i]);
    require(pilot_seq(rows[i]) != cplx(0.0), "dft_pilot_symbol: zero pilot value");
    ls(i) = y(rows[i]) / pilot_seq(rows[i]);
  }
  Eigen::ColPivHouseholderQR<CMatrix> qr(f);
  if (qr.rank() < basis.taps()) throw InvalidArgument("dft_pilot_symbol: pilot rows do not resolve L taps");
  return basis.response(qr.solve(ls));
}

std::vector<Subframe> subframe_geometry(const FrameLayout& layout) {
  require(layout.mode == PilotMode::FbfBlock && layout.pilot_symbols >= 1,
          "build_subframes: layout has no pilot symbols");
  std::vector<Subframe> out;
  const auto data = layout.data_columns();
  const auto pilots = layout.pilot_columns();
  std::size_t d = 0;
  for (std::size_t q = 0; q < pilots.size(); ++q) {
    Subframe s;
    s.left_knot = static_cast<int>(q);
    s.right_knot = static_cast<int>(q + 1);
    while (d < data.size() && data[d] < pilots[q]) s.data_columns.push_back(data[d++]);
    out.push_back(std::move(s));
  }
  return out;
}

SubframeGrouping build_subframes(std::vector<CVector> knot_estimates, const FrameLayout& layout) {
  auto geometry = subframe_geometry(layout);
  require(knot_estimates.size() == geometry.size() + 1,
          "build_subframes: expected the preamble estimate plus one estimate per pilot symbol");
  return {std::move(knot_estimates), std::move(geometry)};
}

std::vector<CVector> fbf_knot_estimates(const ReceivedFrame& rx, const FrameLayout& layout,
                                        const DftBasis* als_basis) {
  const CVector pilots = pilot_sequence(layout);
  std::vector<CVector> knots;
  CVector pre = ls_preamble(rx.rx_preamble, pilots);
  knots.push_back(als_basis ? als_basis->project(pre) : pre);
  for (int col : layout.pilot_columns()) {
    const CVector y = rx.Y.col(col);
    knots.push_back(als_basis ? als_pilot_symbol(y, pilots, *als_basis) : sls_pilot_symbol(y, pilots));
  }
  return knots;
}

RMatrix jakes_interpolation_weights(const std::vector<int>& left_times,
                                    const std::vector<int>& right_times, double left_noise,
                                    double right_noise, const std::vector<int>& data_times,
                                    double doppler_norm, double ridge) {
  require(!left_times.empty() && !right_times.empty(), "jakes_interpolation_weights: empty knot");
  const double scale = 2.0 * std::numbers::pi * doppler_norm;
  auto j0 = [&](double lag) { return std::cyl_bessel_j(0.0, scale * std::abs(lag)); };
  auto knot_knot = [&](const std::vector<int>& a, const std::vector<int>& b) {
    double acc = 0.0;
    for (int u : a)
      for (int v : b) acc += j0(u - v);
    return acc / static_cast<double>(a.size() * b.size());
  };
  auto knot_data = [&](const std::vector<int>& a, int t) {
    double acc = 0.0;
    for (int u : a) acc += j0(t - u);
    return acc / static_cast<double>(a.size());
  };
  Eigen::Matrix2d R;
  R << knot_knot(left_times, left_times) + left_noise, knot_knot(left_times, right_times),
      knot_knot(right_times, left_times), knot_knot(right_times, right_times) + right_noise;
  RMatrix r(2, static_cast<Eigen::Index>(data_times.size()));
  for (std::size_t j = 0; j < data_times.size(); ++j) {
    r(0, static_cast<Eigen::Index>(j)) = knot_data(left_times, data_times[j]);
    r(1, static_cast<Eigen::Index>(j)) = knot_data(right_times, data_times[j]);
  }
  return (R + ridge * Eigen::Matrix2d::Identity()).ldlt().solve(r);
}

namespace {

// Frame-time (symbol index incl. preambles) sets that each knot averages.
std::vector<std::vector<int>> knot_times(const FrameLayout& layout) {
  std::vector<std::vector<int>> t(1);
  for (int u = 0; u < layout.n_preambles; ++u) t[0].push_back(u);
  for (int col : layout.pilot_columns()) t.push_back({layout.n_preambles + col});
  return t;
}

RMatrix solve_ridge(const Eigen::Matrix2d& A, const RMatrix& B, double ridge) {
  const Eigen::Matrix2d Ar = A + ridge * Eigen::Matrix2d::Identity();
  return Ar.ldlt().solve(B);
}

WiWeights weights_jakes(const WiSetup& s) {
  const auto geometry = subframe_geometry(s.layout);
  const auto times = knot_times(s.layout);
  const double proj = s.als_knots ? static_cast<double>(s.taps.count()) / s.layout.kon() : 1.0;
  const double doppler_norm = s.fading.doppler_hz * s.fading.symbol_duration_s;

  WiWeights w;
  w.bounds = geometry;
  for (const auto& sf : geometry) {
    const auto& ta = times[sf.left_knot];
    const auto& tb = times[sf.right_knot];
    std::vector<int> data_times;
    for (int col : sf.data_columns) data_times.push_back(s.layout.n_preambles + col);
    w.C.push_back(jakes_interpolation_weights(ta, tb, s.noise_var * proj / ta.size(),
                                              s.noise_var * proj / tb.size(), data_times,
                                              doppler_norm, s.ridge));
  }
  return w;
}

WiWeights weights_empirical(const WiSetup& s) {
  require(s.training_realizations >= 1, "wi_weights: need training realizations");
  const auto geometry = subframe_geometry(s.layout);
  const DftBasis basis(s.layout, s.taps.count());
  const CVector pilots = pilot_sequence(s.layout);
  const int kon = s.layout.kon();
  const double sigma = std::sqrt(s.noise_var);

  std::vector<Eigen::Matrix2d> A(geometry.size(), Eigen::Matrix2d::Zero());
  std::vector<RMatrix> B;
  for (const auto& sf : geometry) B.push_back(RMatrix::Zero(2, static_cast<Eigen::Index>(sf.data_columns.size())));

  for (std::size_t n = 0; n < s.training_realizations; ++n) {
    const auto ch = generate_channel(s.taps, basis, s.fading, s.layout.total_symbols(),
                                     derive_seed(s.seed, {kStreamChannel, n}));
    Rng rng(derive_seed(s.seed, {kStreamNoise, n}));
    std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
    auto noisy = [&](const CVector& h) {
      CVector y = h;
      for (int k = 0; k < kon; ++k) {
        const double re = nd(rng);
        const double im = nd(rng);
        y(k) += sigma * cplx(re, im);
      }
      return y;
    };
    // Received pilot columns with unit pilots are channel plus noise.
    CMatrix pre(kon, s.layout.n_preambles);
    for (int u = 0; u < s.layout.n_preambles; ++u) pre.col(u) = noisy(ch.H.col(u));
    std::vector<CVector> knots;
    const CVector pre_ls = ls_preamble(pre, pilots);
    knots.push_back(s.als_knots ? basis.project(pre_ls) : pre_ls);
    for (int col : s.layout.pilot_columns()) {
      const CVector y = noisy(ch.H.col(s.layout.n_preambles + col));
      knots.push_back(s.als_knots ? als_pilot_symbol(y, pilots, basis) : sls_pilot_symbol(y, pilots));
    }
    for (std::size_t f = 0; f < geometry.size(); ++f) {
      const CVector& a = knots[geometry[f].left_knot];
      const CVector& b = knots[geometry[f].right_knot];
      A[f](0, 0) += a.squaredNorm();
      A[f](1, 1) += b.squaredNorm();
      const double ab = a.dot(b).real();
      A[f](0, 1) += ab;
      A[f](1, 0) += ab;
      for (std::size_t j = 0; j < geometry[f].data_columns.size(); ++j) {
        const auto h = ch.H.col(s.layout.n_preambles + geometry[f].data_columns[j]);
        B[f](0, static_cast<Eigen::Index>(j)) += a.dot(h).real();
        B[f](1, static_cast<Eigen::Index>(j)) += b.dot(h).real();
      }
    }
  }
  WiWeights w;
  w.bounds = geometry;
  // scale-free ridge: relative to the mean diagonal of the normal matrix
  for (std::size_t f = 0; f < geometry.size(); ++f)
    w.C.push_back(solve_ridge(A[f], B[f], s.ridge * A[f].trace() / 2.0));
  return w;
}

}  // namespace

WiWeights wi_weights(const WiSetup& setup, WiMethod method) {
  setup.layout.validate();
  require(setup.noise_var >= 0, "wi_weights: negative noise variance");
  return method == WiMethod::EmpiricalLs ? weights_empirical(setup) : weights_jakes(setup);
}

CMatrix wi_interpolate(const SubframeGrouping& grouping, const WiWeights& weights) {
  require(grouping.subframes.size() == weights.C.size(), "wi_interpolate: subframe count mismatch");
  require(!grouping.knots.empty(), "wi_interpolate: no knots");
  const auto kon = grouping.knots.front().size();
  Eigen::Index total = 0;
  for (std::size_t f = 0; f < grouping.subframes.size(); ++f) {
    const auto want = static_cast<Eigen::Index>(grouping.subframes[f].data_columns.size());
    require(weights.C[f].rows() == 2 && weights.C[f].cols() == want,
            "wi_interpolate: weights do not cover subframe " + std::to_string(f));
    total += want;
  }
  CMatrix out(kon, total);
  Eigen::Index col = 0;
  for (std::size_t f = 0; f < grouping.subframes.size(); ++f) {
    const auto& sf = grouping.subframes[f];
    CMatrix Hf(kon, 2);
    Hf.col(0) = grouping.knots.at(sf.left_knot);
    Hf.col(1) = grouping.knots.at(sf.right_knot);
    const auto n = weights.C[f].cols();
    out.middleCols(col, n) = Hf * weights.C[f].cast<cplx>();
    col += n;
  }
  return out;
}

}  // namespace dsce
