// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <limits>
#include <numeric>

#include "doctest.h"
#include "dsce/estimators.hpp"
#include "dsce/random.hpp"

using namespace dsce;

namespace {

CVector random_vector(Rng& rng, int n, double var = 1.0) {
  CVector v(n);
  for (auto& x : v) x = complex_gaussian(rng, var);
  return v;
}

// Straight-line DPA: divide, search every point, divide back.
std::pair<cplx, cplx> dpa_reference(cplx y, cplx prior, const Constellation& c) {
  const cplx z = y / prior;
  std::size_t best = 0;
  for (std::size_t i = 1; i < c.points.size(); ++i)
    if (std::norm(z - c.points[i]) < std::norm(z - c.points[best])) best = i;
  return {c.points[best], y / c.points[best]};
}

}  // namespace

TEST_CASE("ls_preamble") {
  const CVector ones = CVector::Ones(52);
  const CVector h0 = CVector::Constant(52, cplx(0.3, -1.2));
  CMatrix pre(52, 2);
  pre << h0, h0;
  CHECK((ls_preamble(pre, ones) - h0).cwiseAbs().maxCoeff() < 1e-15);

  SUBCASE("two preambles halve the noise") {
    Rng rng(1);
    double err = 0.0;
    const int trials = 100000;
    CMatrix y(1, 2);
    const CVector p = CVector::Ones(1);
    for (int t = 0; t < trials; ++t) {
      y(0, 0) = 1.0 + complex_gaussian(rng, 0.1);
      y(0, 1) = 1.0 + complex_gaussian(rng, 0.1);
      err += std::norm(ls_preamble(y, p)(0) - 1.0);
    }
    CHECK(std::abs(err / trials / 0.05 - 1.0) < 0.03);
  }
  SUBCASE("one preamble is a plain division") {
    Rng rng(2);
    const CVector x = random_vector(rng, 52) + CVector::Constant(52, 3.0);
    const CMatrix y = random_vector(rng, 52);
    CHECK((ls_preamble(y, x) - y.col(0).cwiseQuotient(x)).cwiseAbs().maxCoeff() < 1e-15);
  }
  CVector zero = ones;
  zero(3) = 0.0;
  CHECK_THROWS_AS(ls_preamble(pre, zero), InvalidArgument);
  CHECK_THROWS_AS(ls_preamble(CMatrix(52, 0), ones), InvalidArgument);
}

TEST_CASE("ls_pilot") {
  CHECK(ls_pilot(CVector::Constant(4, 2.0), CVector::Ones(4))(0) == cplx(2.0, 0.0));
  Rng rng(3);
  double err = 0.0;
  const int trials = 100000;
  const CVector p = CVector::Ones(1);
  for (int t = 0; t < trials; ++t) err += std::norm(ls_pilot(CVector::Constant(1, complex_gaussian(rng, 0.01)), p)(0));
  CHECK(std::abs(err / trials / 0.01 - 1.0) < 0.03);
  CHECK_THROWS_AS(ls_pilot(CVector(0), CVector(0)), InvalidArgument);
  CHECK_THROWS_AS(ls_pilot(CVector::Ones(2), CVector::Zero(2)), InvalidArgument);
}

TEST_CASE("dpa_step") {
  const auto qpsk = build_constellation(4);
  const double s = 1.0 / std::sqrt(2.0);
  SUBCASE("hand evaluation") {
    const auto r = dpa_step(CVector::Constant(1, cplx(s, s)), CVector::Ones(1), qpsk);
    CHECK(std::abs(r.symbols(0) - cplx(s, s)) < 1e-15);
    CHECK(std::abs(r.estimate(0) - 1.0) < 1e-15);
    CHECK(r.degenerate.empty());
  }
  SUBCASE("genie fixed point for every constellation") {
    for (int m : {4, 16, 64}) {
      const auto c = build_constellation(m);
      Rng rng(m);
      const CVector h = random_vector(rng, 48);
      CVector x(48);
      for (int k = 0; k < 48; ++k) x(k) = c.points[rng() % c.points.size()];
      const auto r = dpa_step(h.cwiseProduct(x), h, c);
      CHECK((r.symbols - x).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((r.estimate - h).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  SUBCASE("agrees with the straight-line reference") {
    Rng rng(4);
    const cplx g(0.8, 0.1);
    for (int t = 0; t < 10000; ++t) {
      const cplx y = cplx(s, s) * g + complex_gaussian(rng, 0.05);
      const cplx prior = 1.0 + complex_gaussian(rng, 0.1);
      const auto r = dpa_step(CVector::Constant(1, y), CVector::Constant(1, prior), qpsk);
      const auto [d, h] = dpa_reference(y, prior, qpsk);
      REQUIRE(r.symbols(0) == d);
      REQUIRE(std::abs(r.estimate(0) - h) < 1e-14);
    }
  }
  SUBCASE("degenerate prior uses the fallback") {
    CVector prior = CVector::Ones(3);
    prior(1) = 1e-12;
    const CVector fb = CVector::Constant(3, cplx(0.0, 1.0));
    const CVector y = CVector::Constant(3, cplx(s, s));
    const auto r = dpa_step(y, prior, qpsk, &fb);
    CHECK(r.degenerate == std::vector<int>{1});
    CHECK(r.symbols(1) == dpa_reference(y(1), fb(1), qpsk).first);
    CHECK_THROWS_AS(dpa_step(y, prior, qpsk), RuntimeError);
    prior(1) = std::numeric_limits<double>::quiet_NaN();
    CHECK(dpa_step(y, prior, qpsk, &fb).degenerate == std::vector<int>{1});
  }
  CHECK_THROWS_AS(dpa_step(CVector::Ones(2), CVector::Ones(3), qpsk), InvalidArgument);
}

TEST_CASE("ta_step") {
  Rng rng(5);
  const CVector prev = random_vector(rng, 10), cur = random_vector(rng, 10);
  CHECK(ta_step(prev, cur, 1.0) == cur);
  CHECK(ta_step(CVector::Zero(1), CVector::Constant(1, 2.0), 2.0)(0) == cplx(1.0, 0.0));
  CHECK(ta_step(prev, cur, std::numeric_limits<double>::infinity()) == prev);
  CHECK_THROWS_AS(ta_step(prev, cur, 0.5), InvalidArgument);

  // convex combination
  for (double alpha : {1.0, 1.5, 2.0, 7.0, 1e6}) {
    const CVector out = ta_step(prev, cur, alpha);
    for (int k = 0; k < 10; ++k) {
      const double span = std::abs(cur(k) - prev(k));
      CHECK(std::abs(std::abs(out(k) - prev(k)) + std::abs(cur(k) - out(k)) - span) < 1e-12);
    }
  }
}

TEST_CASE("ta_noise_ratio: closed form and Monte Carlo") {
  CHECK(ta_noise_ratio(1) == 1.0);
  CHECK(ta_noise_ratio(2) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(std::abs(ta_noise_ratio(60) - 1.0 / 3.0) < 1e-15);
  for (int q = 1; q < 24; ++q) {  // beyond this 4^(1-q) is below double resolution
    CHECK(ta_noise_ratio(q + 1) < ta_noise_ratio(q));
    CHECK(ta_noise_ratio(q) > 1.0 / 3.0);
  }
  CHECK_THROWS_AS(ta_noise_ratio(0), InvalidArgument);

  const int trials = 100000, qmax = 8;
  Rng rng(6);
  std::vector<double> power(qmax + 1, 0.0);
  const CVector zero = CVector::Zero(1);
  for (int t = 0; t < trials; ++t) {
    CVector ta = CVector::Constant(1, complex_gaussian(rng, 1.0));
    power[1] += std::norm(ta(0));
    for (int q = 2; q <= qmax; ++q) {
      ta = ta_step(ta, CVector::Constant(1, complex_gaussian(rng, 1.0)), 2.0);
      power[q] += std::norm(ta(0));
    }
  }
  for (int q = 1; q <= qmax; ++q) CHECK(std::abs(power[q] / trials / ta_noise_ratio(q) - 1.0) < 0.02);
}

TEST_CASE("SLS and ALS pilot-symbol estimates") {
  const auto layout = FrameLayout::ieee80211p_fbf(10, 1);
  const DftBasis basis(layout, 8);
  const CVector pilots = pilot_sequence(layout);
  Rng rng(7);
  CVector g = random_vector(rng, 8);
  const CVector h = basis.response(g);
  const CVector y = h.cwiseProduct(pilots);

  CHECK((sls_pilot_symbol(y, pilots) - h).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((als_pilot_symbol(y, pilots, basis) - h).cwiseAbs().maxCoeff() < 1e-12);

  const CVector noisy = random_vector(rng, 52);
  const CVector once = als_pilot_symbol(noisy, pilots, basis);
  CHECK((als_pilot_symbol(once.cwiseProduct(pilots), pilots, basis) - once).cwiseAbs().maxCoeff() < 1e-10);

  // the residual is orthogonal to the delay subspace
  const CVector resid = sls_pilot_symbol(noisy, pilots) - once;
  CHECK((basis.f_on().adjoint() * resid).cwiseAbs().maxCoeff() < 1e-10);

  SUBCASE("SLS noise equals the channel noise") {
    double err = 0.0;
    const int trials = 20000;
    for (int t = 0; t < trials; ++t) {
      const CVector yn = y + random_vector(rng, 52, 0.1);
      err += (sls_pilot_symbol(yn, pilots) - h).squaredNorm() / 52;
    }
    CHECK(std::abs(err / trials / 0.1 - 1.0) < 0.03);
  }

  SUBCASE("DFT estimate from the comb pilots of a two-tap channel") {
    const auto sbs = FrameLayout::ieee80211p_sbs(1);
    const DftBasis b2(sbs, 2);
    const CVector h2 = b2.response(random_vector(rng, 2));
    const CVector pseq = pilot_sequence(sbs);
    CHECK((dft_pilot_symbol(h2.cwiseProduct(pseq), pseq, b2, sbs.pilot_rows) - h2).cwiseAbs().maxCoeff() < 1e-12);
    const DftBasis b8(sbs, 8);
    CHECK_THROWS_AS(dft_pilot_symbol(h2, pseq, b8, sbs.pilot_rows), InvalidArgument);
  }
}

TEST_CASE("build_subframes partitions the data symbols") {
  SUBCASE("Q=1") {
    const auto layout = FrameLayout::ieee80211p_fbf(100, 1);
    const auto g = subframe_geometry(layout);
    REQUIRE(g.size() == 1);
    CHECK(g[0].data_columns.size() == 100);
    CHECK(g[0].left_knot == 0);
    CHECK(g[0].right_knot == 1);
  }
  SUBCASE("Q=3, I=99") {
    const auto g = subframe_geometry(FrameLayout::ieee80211p_fbf(99, 3));
    REQUIRE(g.size() == 3);
    for (const auto& s : g) CHECK(s.data_columns.size() == 33);
  }
  SUBCASE("Q=2, I=100") {
    const auto layout = FrameLayout::ieee80211p_fbf(100, 2);
    const auto g = subframe_geometry(layout);
    std::vector<int> all;
    for (const auto& s : g) all.insert(all.end(), s.data_columns.begin(), s.data_columns.end());
    CHECK(all == layout.data_columns());
    const auto pilots = layout.pilot_columns();
    for (std::size_t f = 0; f < g.size(); ++f)
      for (int col : g[f].data_columns) {
        CHECK(col < pilots[f]);
        if (f > 0) CHECK(col > pilots[f - 1]);
      }
  }
  CHECK_THROWS_AS(subframe_geometry(FrameLayout::ieee80211p_sbs(10)), InvalidArgument);
  CHECK_THROWS_AS(build_subframes({CVector::Ones(52)}, FrameLayout::ieee80211p_fbf(10, 1)), InvalidArgument);
}

TEST_CASE("wi_interpolate") {
  const auto layout = FrameLayout::ieee80211p_fbf(10, 2);
  Rng rng(8);
  const CVector a = random_vector(rng, 52), b = random_vector(rng, 52), c = random_vector(rng, 52);
  const auto grouping = build_subframes({a, b, c}, layout);
  WiWeights left, mid;
  for (const auto& sf : grouping.subframes) {
    RMatrix l = RMatrix::Zero(2, static_cast<Eigen::Index>(sf.data_columns.size()));
    l.row(0).setOnes();
    left.C.push_back(l);
    mid.C.push_back(RMatrix::Constant(2, l.cols(), 0.5));
  }
  const CMatrix out_left = wi_interpolate(grouping, left);
  REQUIRE(out_left.cols() == 10);
  for (int j = 0; j < 5; ++j) CHECK(out_left.col(j) == a);
  for (int j = 5; j < 10; ++j) CHECK(out_left.col(j) == b);
  const CMatrix out_mid = wi_interpolate(grouping, mid);
  CHECK((out_mid.col(0) - (a + b) / 2.0).cwiseAbs().maxCoeff() < 1e-15);

  // linear in the knots
  const CVector a2 = random_vector(rng, 52), b2 = random_vector(rng, 52), c2 = random_vector(rng, 52);
  WiWeights w;
  for (const auto& sf : grouping.subframes)
    w.C.push_back(RMatrix::Random(2, static_cast<Eigen::Index>(sf.data_columns.size())));
  const cplx s(0.3, -2.0);
  const CMatrix lhs = wi_interpolate(build_subframes({a + s * a2, b + s * b2, c + s * c2}, layout), w);
  const CMatrix rhs = wi_interpolate(grouping, w) + s * wi_interpolate(build_subframes({a2, b2, c2}, layout), w);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);

  WiWeights short_w = w;
  short_w.C.pop_back();
  CHECK_THROWS_AS(wi_interpolate(grouping, short_w), InvalidArgument);
  short_w = w;
  short_w.C[0] = RMatrix::Zero(2, 3);
  CHECK_THROWS_AS(wi_interpolate(grouping, short_w), InvalidArgument);
}

TEST_CASE("WI weights on a static noiseless channel") {
  WiSetup s{FrameLayout::ieee80211p_fbf(30, 2), map_delays_to_taps(vtv_sdww()), FadingParams{0.0}, 0.0};
  s.training_realizations = 200;
  s.seed = 3;
  for (auto method : {WiMethod::EmpiricalLs, WiMethod::JakesClosedForm}) {
    const auto w = wi_weights(s, method);
    REQUIRE(w.C.size() == 2);
    for (const auto& C : w.C)
      for (Eigen::Index j = 0; j < C.cols(); ++j) CHECK(std::abs(C.col(j).sum() - 1.0) < 1e-6);

    const DftBasis basis(s.layout, s.taps.count());
    const auto ch = generate_channel(s.taps, basis, s.fading, s.layout.total_symbols(), 77);
    std::vector<CVector> knots(3, ch.H.col(0));
    const CMatrix out = wi_interpolate(build_subframes(knots, s.layout), w);
    for (Eigen::Index j = 0; j < out.cols(); ++j) CHECK((out.col(j) - ch.H.col(0)).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("Jakes weights at a knot") {
  // data time coincides with the right knot
  const RMatrix c = jakes_interpolation_weights({0}, {10}, 0.0, 0.0, {10, 0, 5}, 0.008, 1e-12);
  CHECK(std::abs(c(0, 0)) < 1e-5);
  CHECK(std::abs(c(1, 0) - 1.0) < 1e-5);
  CHECK(std::abs(c(0, 1) - 1.0) < 1e-5);
  CHECK(std::abs(c(1, 2) - c(0, 2)) < 1e-9);
}

TEST_CASE("empirical and Jakes WI weights agree") {
  WiSetup s{FrameLayout::ieee80211p_fbf(100, 2), map_delays_to_taps(vtv_sdww()), FadingParams{500.0},
            noise_variance(20.0)};
  s.training_realizations = 10000;
  s.seed = 11;
  const auto emp = wi_weights(s, WiMethod::EmpiricalLs);
  const auto jak = wi_weights(s, WiMethod::JakesClosedForm);
  REQUIRE(emp.C.size() == jak.C.size());
  for (std::size_t f = 0; f < emp.C.size(); ++f) {
    const RMatrix rel = (emp.C[f] - jak.C[f]).cwiseAbs().cwiseQuotient(jak.C[f].cwiseAbs().cwiseMax(0.05));
    CHECK(rel.maxCoeff() < 0.05);
  }
}
