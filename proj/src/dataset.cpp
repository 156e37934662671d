// SPDX-License-Identifier: Apache-2.0
#include "dsce/dataset.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>

#include "dsce/kernels.hpp"
#include "dsce/random.hpp"

namespace dsce {

Scenario Scenario::make(const FrameLayout& layout, int modulation_order, const PowerDelayProfile& profile,
                        double doppler_hz) {
  layout.validate();
  Scenario s;
  s.layout = layout;
  s.constellation = build_constellation(modulation_order);
  s.profile = profile;
  s.taps = map_delays_to_taps(profile);
  s.fading.doppler_hz = doppler_hz;
  return s;
}

SimulatedFrame simulate_frame(const Scenario& sc, const DftBasis& basis, double snr_db, std::uint64_t seed,
                              std::uint64_t index) {
  const auto ch = generate_channel(sc.taps, basis, sc.fading, sc.layout.total_symbols(),
                                   derive_seed(seed, {kStreamChannel, index}));
  Rng bit_rng(derive_seed(seed, {kStreamBits, index}));
  Bits bits(payload_bits(sc.layout, sc.constellation));
  for (auto& b : bits) b = static_cast<std::uint8_t>(bit_rng() >> 63);
  SimulatedFrame f;
  f.tx = assemble_frame(bits, sc.layout, sc.constellation);
  f.rx = std::isfinite(snr_db) ? transmit(f.tx, ch, snr_db, derive_seed(seed, {kStreamNoise, index}))
                               : transmit_noiseless(f.tx, ch);
  return f;
}

Corpus gen_dataset(const Scenario& sc, std::size_t n_frames, double snr_db, std::uint64_t seed,
                   std::uint64_t stream) {
  Corpus c;
  c.profile = sc.profile.name;
  c.mode = static_cast<int>(sc.layout.mode);
  c.data_symbols = sc.layout.data_symbols;
  c.pilot_symbols = sc.layout.pilot_symbols;
  c.n_preambles = sc.layout.n_preambles;
  c.modulation_order = sc.constellation.order;
  c.doppler_hz = sc.fading.doppler_hz;
  c.snr_db = snr_db;
  c.seed = seed;
  const DftBasis basis = sc.basis();
  const std::uint64_t stream_seed = derive_seed(seed, {stream});
  auto frames = kernels::map_indexed<SimulatedFrame>(
      n_frames, [&](std::size_t i) { return simulate_frame(sc, basis, snr_db, stream_seed, i); },
      rnn::Exec::Parallel);
  for (auto& f : frames) {
    c.frames.push_back(std::move(f.rx));
    c.bits.push_back(std::move(f.tx.tx_bits));
  }
  return c;
}

// --- file format ------------------------------------------------------------

static_assert(std::endian::native == std::endian::little, "corpus files assume a little-endian host");

namespace {

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw RuntimeError("corpus file truncated");
  return v;
}

void put_matrix(std::ostream& out, const CMatrix& m) {
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      put<double>(out, m(r, c).real());
      put<double>(out, m(r, c).imag());
    }
}

CMatrix get_matrix(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
  CMatrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) {
      const double re = get<double>(in);
      const double im = get<double>(in);
      m(r, c) = {re, im};
    }
  return m;
}

FrameLayout corpus_layout(const Corpus& c) {
  return c.mode == static_cast<int>(PilotMode::FbfBlock)
             ? FrameLayout::ieee80211p_fbf(c.data_symbols, c.pilot_symbols, c.n_preambles)
             : FrameLayout::ieee80211p_sbs(c.data_symbols, c.n_preambles);
}

}  // namespace

void write_corpus(const Corpus& c, std::ostream& out) {
  const FrameLayout layout = corpus_layout(c);
  require(c.frames.size() == c.bits.size(), "write_corpus: frames and payloads disagree");
  out.write(kCorpusMagic, sizeof kCorpusMagic);
  put<std::uint32_t>(out, kCorpusVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.mode));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.data_symbols));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.pilot_symbols));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.n_preambles));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.modulation_order));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.profile.size()));
  out.write(c.profile.data(), static_cast<std::streamsize>(c.profile.size()));
  put<double>(out, c.doppler_hz);
  put<double>(out, c.snr_db);
  put<std::uint64_t>(out, c.seed);
  put<std::uint64_t>(out, c.frames.size());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(layout.kon()));
  for (std::size_t i = 0; i < c.frames.size(); ++i) {
    const auto& f = c.frames[i];
    require(f.genie_H && f.genie_H_preamble, "write_corpus: frames must carry the true channel");
    put<double>(out, f.noise_var);
    put_matrix(out, f.rx_preamble);
    put_matrix(out, f.Y);
    put_matrix(out, *f.genie_H_preamble);
    put_matrix(out, *f.genie_H);
    put<std::uint64_t>(out, c.bits[i].size());
    out.write(reinterpret_cast<const char*>(c.bits[i].data()), static_cast<std::streamsize>(c.bits[i].size()));
  }
  if (!out) throw RuntimeError("failed writing corpus");
}

Corpus read_corpus(std::istream& in) {
  char magic[sizeof kCorpusMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCorpusMagic, sizeof magic) != 0)
    throw RuntimeError("not a corpus file (bad magic)");
  const auto version = get<std::uint32_t>(in);
  if (version != kCorpusVersion) throw RuntimeError("unsupported corpus version " + std::to_string(version));
  Corpus c;
  c.mode = static_cast<int>(get<std::uint32_t>(in));
  c.data_symbols = static_cast<int>(get<std::uint32_t>(in));
  c.pilot_symbols = static_cast<int>(get<std::uint32_t>(in));
  c.n_preambles = static_cast<int>(get<std::uint32_t>(in));
  c.modulation_order = static_cast<int>(get<std::uint32_t>(in));
  const auto name_len = get<std::uint32_t>(in);
  if (name_len > 4096) throw RuntimeError("corpus header: profile name too long");
  c.profile.resize(name_len);
  if (!in.read(c.profile.data(), name_len)) throw RuntimeError("corpus file truncated");
  c.doppler_hz = get<double>(in);
  c.snr_db = get<double>(in);
  c.seed = get<std::uint64_t>(in);
  const auto n = get<std::uint64_t>(in);
  const auto kon = get<std::uint32_t>(in);
  FrameLayout layout;
  try {
    layout = corpus_layout(c);
  } catch (const InvalidArgument& e) {
    throw RuntimeError(std::string("corpus header: ") + e.what());
  }
  if (kon != static_cast<std::uint32_t>(layout.kon())) throw RuntimeError("corpus header: subcarrier count");
  for (std::uint64_t i = 0; i < n; ++i) {
    ReceivedFrame f;
    f.noise_var = get<double>(in);
    f.rx_preamble = get_matrix(in, kon, layout.n_preambles);
    f.Y = get_matrix(in, kon, layout.body_symbols());
    f.genie_H_preamble = get_matrix(in, kon, layout.n_preambles);
    f.genie_H = get_matrix(in, kon, layout.body_symbols());
    const auto nb = get<std::uint64_t>(in);
    if (nb > (1ull << 32)) throw RuntimeError("corpus frame: bit count too large");
    Bits b(nb);
    if (!in.read(reinterpret_cast<char*>(b.data()), static_cast<std::streamsize>(nb)))
      throw RuntimeError("corpus file truncated");
    c.frames.push_back(std::move(f));
    c.bits.push_back(std::move(b));
  }
  return c;
}

void save_corpus(const Corpus& c, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot open " + path.string() + " for writing");
  write_corpus(c, out);
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeError("cannot open " + path.string());
  return read_corpus(in);
}

rnn::Dataset sbs_dataset(const Corpus& c, const FrameLayout& layout) {
  rnn::Dataset d;
  d.samples.reserve(c.frames.size());
  for (const auto& f : c.frames) d.samples.push_back(sbs_training_sample(f, layout));
  return d;
}

rnn::Dataset fbf_dataset(const Corpus& c, const FbfConfig& cfg, const DftBasis& basis) {
  rnn::Dataset d;
  d.samples.reserve(c.frames.size());
  for (const auto& f : c.frames) d.samples.push_back(fbf_training_sample(f, cfg, basis));
  d.step_weights = fbf_step_weights(cfg.layout);
  return d;
}

}  // namespace dsce
