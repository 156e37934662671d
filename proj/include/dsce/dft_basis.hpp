// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "dsce/types.hpp"

namespace dsce {

struct FrameLayout;

/// Truncated K-point DFT: Kon active rows and the first L columns,
/// F[k, l] = exp(-j 2 pi bin(k) l / K), together with its left pseudo-inverse.
class DftBasis {
 public:
  DftBasis(const FrameLayout& layout, int taps);

  int taps() const { return static_cast<int>(f_on_.cols()); }
  int rows() const { return static_cast<int>(f_on_.rows()); }
  const CMatrix& f_on() const { return f_on_; }
  const CMatrix& f_pinv() const { return f_pinv_; }

  /// Frequency response of an impulse response.
  CVector response(const CVector& taps) const { return f_on_ * taps; }
  /// Least-squares projection onto the L-tap subspace.
  CVector project(const CVector& h) const { return f_on_ * (f_pinv_ * h); }

 private:
  CMatrix f_on_;
  CMatrix f_pinv_;
};

}  // namespace dsce
