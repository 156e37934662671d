// SPDX-License-Identifier: Apache-2.0
// Serial reference kernels and their OpenMP counterparts.
//
// The parallel versions partition work into fixed chunks and reduce in chunk
// order, so output is bit-identical for any thread count. The serial versions
// are kept as the testing reference.
#pragma once

#include <cstddef>
#include <exception>
#include <span>
#include <vector>

#include "dsce/rnn.hpp"

namespace dsce::kernels {

inline constexpr std::size_t kGradientChunk = 16;

/// Reference: one sequence at a time, accumulated in list order.
rnn::LossGrad sse_serial(const rnn::NetworkModel& model, const rnn::Dataset& data,
                         std::span<const std::size_t> indices);

/// Chunks of `chunk` sequences run as batched GEMMs across threads.
rnn::LossGrad sse_parallel(const rnn::NetworkModel& model, const rnn::Dataset& data,
                           std::span<const std::size_t> indices, std::size_t chunk = kGradientChunk);

/// acc += g, tensor by tensor.
void accumulate(rnn::NetworkModel& acc, const rnn::NetworkModel& g);

int max_threads();

/// out[i] = fn(i) for i in [0, n). Items are independent; the first exception
/// thrown by any item is rethrown on the calling thread.
template <class T, class Fn>
std::vector<T> map_indexed(std::size_t n, Fn&& fn, rnn::Exec exec) {
  std::vector<T> out(n);
  if (exec == rnn::Exec::Serial) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::exception_ptr err;
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = fn(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(dsce_map_indexed)
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  return out;
}

}  // namespace dsce::kernels
