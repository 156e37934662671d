// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cstring>
#include <numeric>
#include <random>

#include <omp.h>

#include "doctest.h"
#include "dsce/kernels.hpp"

using namespace dsce;
using namespace dsce::rnn;

namespace {

Dataset make_data(const NetworkModel& m, int n, int T, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> nd(0.0f, 1.0f);
  Dataset d;
  for (int s = 0; s < n; ++s) {
    Sample smp{Eigen::MatrixXf(m.input_dim(), T), Eigen::MatrixXf(m.out_dim(), T)};
    for (Eigen::Index i = 0; i < smp.input.size(); ++i) smp.input.data()[i] = nd(rng);
    for (Eigen::Index i = 0; i < smp.target.size(); ++i) smp.target.data()[i] = nd(rng);
    d.samples.push_back(std::move(smp));
  }
  return d;
}

bool identical(const RVector& a, const RVector& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

TEST_CASE("parallel gradients agree with the serial reference") {
  for (auto kind : {CellKind::SRNN, CellKind::LSTM, CellKind::GRU})
    for (bool bidir : {false, true}) {
      const auto m = init_model({kind, 6, 5, 4, bidir}, 3);
      const auto d = make_data(m, 37, 9, 4);
      std::vector<std::size_t> idx(37);
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      std::reverse(idx.begin(), idx.end());
      const auto s = kernels::sse_serial(m, d, idx);
      const auto p = kernels::sse_parallel(m, d, idx);
      CHECK(p.loss == doctest::Approx(s.loss).epsilon(1e-12));
      const RVector gs = flatten(s.grad), gp = flatten(p.grad);
      CHECK((gs - gp).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, gs.cwiseAbs().maxCoeff()));
      const auto b = sse_batch(m, d, idx);
      CHECK((flatten(b.grad) - gs).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, gs.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("parallel gradients are independent of the thread count") {
  const auto m = init_model({CellKind::GRU, 6, 5, 4, true}, 3);
  const auto d = make_data(m, 50, 7, 8);
  std::vector<std::size_t> idx(50);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto one = kernels::sse_parallel(m, d, idx);
  omp_set_num_threads(4);
  const auto four = kernels::sse_parallel(m, d, idx);
  omp_set_num_threads(saved);
  CHECK(one.loss == four.loss);
  CHECK(identical(flatten(one.grad), flatten(four.grad)));
}

TEST_CASE("chunk size only regroups the sum") {
  const auto m = init_model({CellKind::LSTM, 4, 3, 2, false}, 1);
  const auto d = make_data(m, 20, 4, 2);
  std::vector<std::size_t> idx(20);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto a = kernels::sse_parallel(m, d, idx, 1);
  const auto b = kernels::sse_parallel(m, d, idx, 7);
  const auto c = kernels::sse_parallel(m, d, idx, 64);
  CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-12));
  CHECK(a.loss == doctest::Approx(c.loss).epsilon(1e-12));
  CHECK((flatten(a.grad) - flatten(c.grad)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK_THROWS_AS(kernels::sse_parallel(m, d, idx, 0), InvalidArgument);
}

TEST_CASE("accumulate adds tensor by tensor") {
  const auto a = init_model({CellKind::GRU, 3, 2, 2, true}, 1);
  const auto b = init_model({CellKind::GRU, 3, 2, 2, true}, 2);
  auto acc = a;
  kernels::accumulate(acc, b);
  CHECK((flatten(acc) - flatten(a) - flatten(b)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("map_indexed: order, equality across modes, exceptions") {
  const auto f = [](std::size_t i) { return static_cast<double>(i * i) + 0.5; };
  const auto s = kernels::map_indexed<double>(100, f, Exec::Serial);
  const auto p = kernels::map_indexed<double>(100, f, Exec::Parallel);
  CHECK(s == p);
  CHECK(s[7] == 49.5);
  CHECK(kernels::map_indexed<int>(0, [](std::size_t) { return 1; }, Exec::Parallel).empty());
  CHECK(kernels::max_threads() >= 1);

  const auto boom = [](std::size_t i) -> int {
    if (i == 13) throw InvalidArgument("item 13");
    return 0;
  };
  CHECK_THROWS_AS(kernels::map_indexed<int>(40, boom, Exec::Parallel), InvalidArgument);
  CHECK_THROWS_AS(kernels::map_indexed<int>(40, boom, Exec::Serial), InvalidArgument);
}
