// SPDX-License-Identifier: Apache-2.0
// Frame simulation and training corpora.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "dsce/channel.hpp"
#include "dsce/dft_basis.hpp"
#include "dsce/ofdm.hpp"
#include "dsce/pipelines.hpp"

namespace dsce {

/// Everything needed to draw a frame except the SNR and the seed.
struct Scenario {
  FrameLayout layout;
  Constellation constellation;
  PowerDelayProfile profile;
  TapSet taps;
  FadingParams fading;

  static Scenario make(const FrameLayout& layout, int modulation_order, const PowerDelayProfile& profile,
                       double doppler_hz);
  DftBasis basis() const { return DftBasis(layout, taps.count()); }
};

struct SimulatedFrame {
  Frame tx;
  ReceivedFrame rx;
};

/// Frame `index` under `seed`: channel, payload and unit noise come from
/// independent derived streams, so every SNR sees the same realization
/// (common random numbers). A non-finite snr_db means noiseless.
SimulatedFrame simulate_frame(const Scenario& sc, const DftBasis& basis, double snr_db, std::uint64_t seed,
                              std::uint64_t index);

/// A set of simulated frames stored with the true channel.
struct Corpus {
  std::string profile;
  int mode = 0;  ///< PilotMode
  int data_symbols = 0;
  int pilot_symbols = 0;
  int n_preambles = 0;
  int modulation_order = 4;
  double doppler_hz = 0.0;
  double snr_db = 0.0;
  std::uint64_t seed = 0;
  std::vector<ReceivedFrame> frames;
  std::vector<Bits> bits;
};

inline constexpr char kCorpusMagic[8] = {'D', 'S', 'C', 'E', 'C', 'O', 'R', 'P'};
inline constexpr std::uint32_t kCorpusVersion = 1;

/// n_frames frames drawn from a stream keyed by (seed, stream). Frames are
/// simulated in parallel; contents do not depend on the thread count.
Corpus gen_dataset(const Scenario& sc, std::size_t n_frames, double snr_db, std::uint64_t seed,
                   std::uint64_t stream);

/// Layout: magic "DSCECORP", u32 version, u32 mode, u32 I, u32 Q, u32 preambles,
/// u32 modulation order, u32 profile-name length + bytes, f64 fd, f64 snr,
/// u64 seed, u64 frames, u32 Kon; per frame f64 noise_var, then complex
/// matrices (re, im pairs, column-major) rx preamble, Y, true H preamble,
/// true H body, then u64 bit count and one byte per bit. Little-endian.
void write_corpus(const Corpus& c, std::ostream& out);
Corpus read_corpus(std::istream& in);
void save_corpus(const Corpus& c, const std::filesystem::path& path);
Corpus load_corpus(const std::filesystem::path& path);

rnn::Dataset sbs_dataset(const Corpus& c, const FrameLayout& layout);
rnn::Dataset fbf_dataset(const Corpus& c, const FbfConfig& cfg, const DftBasis& basis);

}  // namespace dsce
