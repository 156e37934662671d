// SPDX-License-Identifier: Apache-2.0
#include "dsce/kernels.hpp"

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dsce::kernels {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void accumulate(rnn::NetworkModel& acc, const rnn::NetworkModel& g) {
  acc.forward.W += g.forward.W;
  acc.forward.U += g.forward.U;
  acc.forward.b += g.forward.b;
  if (acc.backward) {
    acc.backward->W += g.backward->W;
    acc.backward->U += g.backward->U;
    acc.backward->b += g.backward->b;
  }
  acc.readout.W += g.readout.W;
  acc.readout.b += g.readout.b;
}

rnn::LossGrad sse_serial(const rnn::NetworkModel& model, const rnn::Dataset& data,
                         std::span<const std::size_t> indices) {
  rnn::LossGrad total{0.0, rnn::zeros_like(model)};
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto one = rnn::sse_batch(model, data, indices.subspan(i, 1));
    total.loss += one.loss;
    accumulate(total.grad, one.grad);
  }
  return total;
}

rnn::LossGrad sse_parallel(const rnn::NetworkModel& model, const rnn::Dataset& data,
                           std::span<const std::size_t> indices, std::size_t chunk) {
  require(chunk >= 1, "sse_parallel: chunk must be positive");
  const std::size_t n_chunks = (indices.size() + chunk - 1) / chunk;
  auto parts = map_indexed<rnn::LossGrad>(
      n_chunks,
      [&](std::size_t c) {
        const std::size_t lo = c * chunk;
        const std::size_t len = std::min(chunk, indices.size() - lo);
        return rnn::sse_batch(model, data, indices.subspan(lo, len));
      },
      rnn::Exec::Parallel);
  rnn::LossGrad total{0.0, rnn::zeros_like(model)};
  for (const auto& p : parts) {
    total.loss += p.loss;
    accumulate(total.grad, p.grad);
  }
  return total;
}

}  // namespace dsce::kernels
