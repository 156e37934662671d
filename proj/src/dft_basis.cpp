// SPDX-License-Identifier: Apache-2.0
#include "dsce/dft_basis.hpp"

#include <cmath>
#include <numbers>

#include "dsce/ofdm.hpp"

namespace dsce {

DftBasis::DftBasis(const FrameLayout& layout, int taps) {
  require(taps >= 1, "DftBasis: need at least one tap");
  require(taps <= layout.kon(), "DftBasis: L exceeds the active subcarrier count");
  const int kon = layout.kon();
  f_on_.resize(kon, taps);
  for (int r = 0; r < kon; ++r) {
    const int bin = layout.bin_of_row(r);
    for (int l = 0; l < taps; ++l) {
      // reduce the exponent modulo K before scaling to keep the phase exact
      const int e = (bin * l) % layout.fft_size;
      f_on_(r, l) = std::polar(1.0, -2.0 * std::numbers::pi * e / layout.fft_size);
    }
  }
  const CMatrix gram = f_on_.adjoint() * f_on_;
  Eigen::LDLT<CMatrix> ldlt(gram);
  const double min_diag = ldlt.vectorD().real().minCoeff();
  if (ldlt.info() != Eigen::Success || !(min_diag > 1e-9 * kon))
    throw InvalidArgument("DftBasis: truncated DFT basis is rank deficient");
  f_pinv_ = ldlt.solve(f_on_.adjoint());
}

}  // namespace dsce
