// SPDX-License-Identifier: Apache-2.0
#include "dsce/harness.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>

#include "dsce/kernels.hpp"
#include "dsce/random.hpp"

namespace dsce {

// --- scenarios --------------------------------------------------------------

const std::vector<MobilityPreset>& mobility_presets() {
  static const std::vector<MobilityPreset> presets = {
      {"low", 250.0, "VTV-UC", 1},
      {"high", 500.0, "VTV-SDWW", 2},
      {"very-high", 1000.0, "VTV-SDWW", 3},
  };
  return presets;
}

const MobilityPreset& mobility_preset(const std::string& name) {
  for (const auto& p : mobility_presets())
    if (p.name == name) return p;
  throw InvalidArgument("unknown mobility preset '" + name + "' (low, high, very-high)");
}

const std::vector<EstimatorInfo>& estimators() {
  static const std::vector<EstimatorInfo> list = {
      {"genie", EstimatorFamily::Sbs, false},       {"dpa", EstimatorFamily::Sbs, false},
      {"srnn-dpa-ta", EstimatorFamily::Sbs, true},  {"gru-dpa-ta", EstimatorFamily::Sbs, true},
      {"lstm-dpa-ta", EstimatorFamily::Sbs, true},  {"genie-fbf", EstimatorFamily::Fbf, false},
      {"wi", EstimatorFamily::Fbf, false},          {"als-bigru", EstimatorFamily::Fbf, true},
  };
  return list;
}

const EstimatorInfo& estimator_info(const std::string& name) {
  for (const auto& e : estimators())
    if (e.name == name) return e;
  std::string known;
  for (const auto& e : estimators()) known += (known.empty() ? "" : ", ") + e.name;
  throw InvalidArgument("unknown estimator '" + name + "' (" + known + ")");
}

Scenario LinkConfig::scenario(EstimatorFamily family) const {
  const FrameLayout layout = family == EstimatorFamily::Sbs
                                 ? FrameLayout::ieee80211p_sbs(data_symbols)
                                 : FrameLayout::ieee80211p_fbf(data_symbols, pilot_symbols);
  return Scenario::make(layout, modulation_order, builtin_profile(profile), doppler_hz);
}

namespace {

rnn::CellKind sbs_cell(const std::string& estimator) {
  if (estimator == "srnn-dpa-ta") return rnn::CellKind::SRNN;
  if (estimator == "gru-dpa-ta") return rnn::CellKind::GRU;
  if (estimator == "lstm-dpa-ta") return rnn::CellKind::LSTM;
  throw InvalidArgument("'" + estimator + "' is not a recurrent symbol-by-symbol estimator");
}

FbfConfig fbf_config(const Scenario& sc) {
  FbfConfig cfg;
  cfg.layout = sc.layout;
  cfg.constellation = sc.constellation;
  cfg.taps = sc.taps.count();
  return cfg;
}

}  // namespace

// --- training ---------------------------------------------------------------

rnn::TrainConfig desk_scale_training() {
  rnn::TrainConfig cfg;
  cfg.n_train = 2000;
  cfg.n_test = 200;
  cfg.epochs = 100;
  // same number of optimizer steps per epoch as 16000 frames in batches of 128
  cfg.batch_size = 16;
  return cfg;
}

rnn::TrainConfig paper_scale_training() { return rnn::TrainConfig{}; }

TrainOutcome train_estimator(const std::string& estimator, const TrainPlan& plan,
                             const rnn::EpochCallback& on_epoch) {
  const auto& info = estimator_info(estimator);
  require(info.neural, "estimator '" + estimator + "' has nothing to train");
  plan.train.validate();
  std::vector<double> dopplers = plan.dopplers;
  if (dopplers.empty()) dopplers.push_back(plan.link.doppler_hz);

  TrainOutcome out;
  std::vector<rnn::NetworkModel> models;
  for (std::size_t d = 0; d < dopplers.size(); ++d) {
    LinkConfig link = plan.link;
    link.doppler_hz = dopplers[d];
    const Scenario sc = link.scenario(info.family);
    const DftBasis basis = sc.basis();
    const std::uint64_t corpus_seed = derive_seed(plan.seed, {kStreamTrainCorpus, d});
    const std::uint64_t stream_seed = derive_seed(corpus_seed, {kStreamTrainCorpus});

    rnn::Architecture arch;
    rnn::Dataset data;
    if (info.family == EstimatorFamily::Sbs) {
      const auto cfg = SbsConfig::make(sbs_cell(estimator), sc.layout, sc.constellation);
      arch = cfg.architecture();
      data.samples = kernels::map_indexed<rnn::Sample>(
          static_cast<std::size_t>(plan.train.n_train),
          [&](std::size_t i) {
            const auto f = simulate_frame(sc, basis, plan.train.train_snr_db, stream_seed, i);
            return sbs_training_sample(f.rx, sc.layout);
          },
          rnn::Exec::Parallel);
    } else {
      const auto cfg = fbf_config(sc);
      arch = cfg.architecture();
      data.samples = kernels::map_indexed<rnn::Sample>(
          static_cast<std::size_t>(plan.train.n_train),
          [&](std::size_t i) {
            const auto f = simulate_frame(sc, basis, plan.train.train_snr_db, stream_seed, i);
            return fbf_training_sample(f.rx, cfg, basis);
          },
          rnn::Exec::Parallel);
      data.step_weights = fbf_step_weights(sc.layout);
    }

    auto init = rnn::init_model(arch, derive_seed(plan.seed, {kStreamInit, d}));
    auto res = rnn::train(std::move(init), data, plan.train, derive_seed(plan.seed, {kStreamShuffle, d}),
                          on_epoch);
    if (res.diverged) {
      out.diverged = true;
      out.message += (out.message.empty() ? "" : "; ") + res.message;
    }
    out.loss_history.push_back(std::move(res.loss_history));
    models.push_back(std::move(res.model));
  }
  out.model = models.size() == 1 ? std::move(models.front()) : rnn::ensemble_average(models);
  return out;
}

// --- sweeps -----------------------------------------------------------------

void SweepConfig::validate() const {
  require(!snr_db.empty(), "sweep: SNR list is empty");
  for (double s : snr_db) require(std::isfinite(s), "sweep: SNR values must be finite");
  require(!estimators.empty(), "sweep: no estimators");
  for (const auto& e : estimators) estimator_info(e);
  require(link.data_symbols >= 1, "sweep: I must be positive");
}

FrameTally tally_frame(const FrameEstimate& est, const Bits& tx_bits, const CMatrix& reference,
                       int bits_per_symbol) {
  require(est.bits.size() == tx_bits.size(), "tally_frame: payload length mismatch");
  require(bits_per_symbol >= 1 && tx_bits.size() % static_cast<std::size_t>(bits_per_symbol) == 0,
          "tally_frame: payload is not a whole number of symbols");
  FrameTally t;
  t.bits = tx_bits.size();
  t.symbols = tx_bits.size() / static_cast<std::size_t>(bits_per_symbol);
  for (std::size_t s = 0; s < t.symbols; ++s) {
    int wrong = 0;
    for (int b = 0; b < bits_per_symbol; ++b) {
      const std::size_t k = s * static_cast<std::size_t>(bits_per_symbol) + static_cast<std::size_t>(b);
      wrong += est.bits[k] != tx_bits[k];
    }
    t.bit_errors += static_cast<std::uint64_t>(wrong);
    t.correct_symbols += wrong == 0;
  }
  const double ref = reference.squaredNorm();
  t.nmse = ref > 0.0 ? (est.Hhat - reference).squaredNorm() / ref : 0.0;
  return t;
}

double throughput(std::uint64_t correct_symbols, std::uint64_t symbols) {
  return symbols == 0 ? 0.0 : static_cast<double>(correct_symbols) / static_cast<double>(symbols);
}

std::vector<ResultRow> run_ber_sweep(const SweepConfig& cfg, const ModelSet& models) {
  cfg.validate();
  for (const auto& name : cfg.estimators) {
    if (estimator_info(name).neural && !models.count(name))
      throw InvalidArgument("missing trained model for estimator '" + name + "'");
  }
  std::vector<ResultRow> rows;
  if (cfg.n_frames == 0) return rows;

  // tallies[estimator][snr] accumulated in frame order
  std::vector<std::vector<ResultRow>> table(cfg.estimators.size(), std::vector<ResultRow>(cfg.snr_db.size()));

  for (auto family : {EstimatorFamily::Sbs, EstimatorFamily::Fbf}) {
    std::vector<std::size_t> members;
    for (std::size_t e = 0; e < cfg.estimators.size(); ++e)
      if (estimator_info(cfg.estimators[e]).family == family) members.push_back(e);
    if (members.empty()) continue;

    const Scenario sc = cfg.link.scenario(family);
    const DftBasis basis = sc.basis();
    const FbfConfig fcfg = family == EstimatorFamily::Fbf ? fbf_config(sc) : FbfConfig{};
    const std::uint64_t frame_seed = derive_seed(cfg.seed, {kStreamTestCorpus, static_cast<std::uint64_t>(family)});

    for (std::size_t s = 0; s < cfg.snr_db.size(); ++s) {
      const double snr = cfg.snr_db[s];
      bool need_wi = false;
      for (auto e : members) need_wi |= cfg.estimators[e] == "wi";
      WiWeights wi;
      if (need_wi) {
        WiSetup ws{sc.layout, sc.taps, sc.fading, noise_variance(snr)};
        ws.training_realizations = cfg.wi_training_realizations;
        ws.seed = derive_seed(cfg.seed, {kStreamWiTraining, s});
        wi = wi_weights(ws, WiMethod::EmpiricalLs);
      }

      auto per_frame = kernels::map_indexed<std::vector<FrameTally>>(
          cfg.n_frames,
          [&](std::size_t f) {
            const auto sim = simulate_frame(sc, basis, snr, frame_seed, f);
            const CMatrix ref = reference_channel(sim.rx, sc.layout);
            std::vector<FrameTally> out;
            for (auto e : members) {
              const auto& name = cfg.estimators[e];
              FrameEstimate est;
              if (name == "genie" || name == "genie-fbf") {
                est = genie_estimate_frame(sim.rx, sc.layout, sc.constellation);
              } else if (name == "dpa") {
                est = dpa_estimate_frame(sim.rx, sc.layout, sc.constellation);
              } else if (name == "wi") {
                est = wi_estimate_frame(sim.rx, fcfg, basis, wi);
              } else if (name == "als-bigru") {
                est = fbf_estimate_frame(sim.rx, models.at(name), fcfg, basis);
              } else {
                est = sbs_estimate_frame(sim.rx, models.at(name),
                                         SbsConfig::make(sbs_cell(name), sc.layout, sc.constellation));
              }
              out.push_back(tally_frame(est, sim.tx.tx_bits, ref, sc.constellation.bits_per_symbol));
            }
            return out;
          },
          rnn::Exec::Parallel);

      for (std::size_t m = 0; m < members.size(); ++m) {
        ResultRow& r = table[members[m]][s];
        r.estimator = cfg.estimators[members[m]];
        r.snr_db = snr;
        r.doppler_hz = cfg.link.doppler_hz;
        r.modulation_order = cfg.link.modulation_order;
        r.data_symbols = cfg.link.data_symbols;
        r.n_frames = cfg.n_frames;
        r.seed = cfg.seed;
        double nmse = 0.0;
        for (const auto& frame : per_frame) {
          const auto& t = frame[m];
          r.bit_errors += t.bit_errors;
          r.bits += t.bits;
          r.correct_symbols += t.correct_symbols;
          r.symbols += t.symbols;
          nmse += t.nmse;
        }
        r.ber = static_cast<double>(r.bit_errors) / static_cast<double>(r.bits);
        r.nmse = nmse / static_cast<double>(cfg.n_frames);
        r.throughput = throughput(r.correct_symbols, r.symbols);
      }
    }
  }
  for (auto& per_estimator : table)
    for (auto& r : per_estimator) rows.push_back(std::move(r));
  return rows;
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_results_csv(const std::vector<ResultRow>& rows, std::ostream& out) {
  out << kResultsHeader << '\n';
  for (const auto& r : rows) {
    out << r.estimator << ',' << fmt17(r.snr_db) << ',' << fmt17(r.doppler_hz) << ',' << r.modulation_order << ','
        << r.data_symbols << ',' << fmt17(r.ber) << ',' << fmt17(r.nmse) << ',' << fmt17(r.throughput) << ','
        << r.n_frames << ',' << r.seed << '\n';
  }
}

// --- correlation ------------------------------------------------------------

CorrelationProfile run_correlation(const std::string& profile, double doppler_hz, int symbols,
                                   std::size_t realizations, std::uint64_t seed, bool normalize) {
  require(realizations >= 1, "correlate: need at least one realization");
  const auto layout = FrameLayout::ieee80211p_sbs(symbols);
  const TapSet taps = map_delays_to_taps(builtin_profile(profile));
  const DftBasis basis(layout, taps.count());
  FadingParams fading;
  fading.doppler_hz = doppler_hz;

  constexpr std::size_t kChunk = 64;
  const std::size_t n_chunks = (realizations + kChunk - 1) / kChunk;
  auto parts = kernels::map_indexed<std::optional<CorrelationAccumulator>>(
      n_chunks,
      [&](std::size_t c) {
        CorrelationAccumulator acc(symbols);
        const std::size_t hi = std::min(realizations, (c + 1) * kChunk);
        for (std::size_t r = c * kChunk; r < hi; ++r)
          acc.add(generate_channel(taps, basis, fading, symbols, derive_seed(seed, {kStreamChannel, r})));
        return std::optional<CorrelationAccumulator>(std::move(acc));
      },
      rnn::Exec::Parallel);
  CorrelationAccumulator total(symbols);
  for (const auto& p : parts) total.merge(*p);
  return total.finish(normalize);
}

void write_psi_csv(const CorrelationProfile& p, std::ostream& out) {
  out << "# dsce psi v1 fd_hz=" << fmt17(p.doppler_hz) << " realizations=" << p.realizations << '\n';
  out << "i,psi\n";
  for (std::size_t i = 0; i < p.psi.size(); ++i) out << (i + 1) << ',' << fmt17(p.psi[i]) << '\n';
}

// --- operation counts -------------------------------------------------------

OpStage rnn_cell_ops(rnn::CellKind kind, std::int64_t P, std::int64_t K) {
  switch (kind) {
    case rnn::CellKind::SRNN: return {"srnn", P * K + 2 * P * P, P * K + 2 * P * P};
    case rnn::CellKind::LSTM: return {"lstm", 4 * P * K + 4 * P * P + 3 * P, 4 * P * K + 4 * P * P + P};
    case rnn::CellKind::GRU: return {"gru", 3 * P * K + 3 * P * P + 3 * P, 3 * P * K + 3 * P * P + 2 * P};
  }
  throw InvalidArgument("bad cell kind");
}

OpStage dpa_ta_ops(std::int64_t kon) { return {"dpa-ta", 18 * kon, 8 * kon}; }

OpStage als_ops(std::int64_t kon, std::int64_t Q) {
  return {"als", 4 * kon * kon * Q + 2 * kon * Q + 2 * kon, 5 * kon * kon * Q};
}

OpStage readout_ops(std::int64_t width, std::int64_t out) { return {"readout", out * width, out * width}; }

std::vector<std::string> op_estimators() {
  return {"srnn-dpa-ta", "gru-dpa-ta", "lstm-dpa-ta", "als-bisrnn", "als-bigru", "als-bilstm"};
}

OpCount count_ops(const OpConfig& cfg) {
  require(cfg.kon >= 1 && cfg.kd >= 1 && cfg.kd <= cfg.kon, "count_ops: bad subcarrier counts");
  require(cfg.data_symbols >= 1 && cfg.pilot_symbols >= 1, "count_ops: bad frame shape");
  require(cfg.hidden >= 0, "count_ops: bad hidden size");
  const std::int64_t kon = cfg.kon;
  const bool paper = cfg.mode == OpMode::Paper;
  OpCount oc;

  const std::string& e = cfg.estimator;
  if (e == "srnn-dpa-ta" || e == "gru-dpa-ta" || e == "lstm-dpa-ta") {
    const auto kind = sbs_cell(e);
    const std::int64_t P = cfg.hidden ? cfg.hidden : (kind == rnn::CellKind::LSTM ? 64 : 48);
    oc.breakdown.push_back(rnn_cell_ops(kind, P, 2 * kon));
    auto head = readout_ops(P, 2 * std::int64_t{cfg.kd});
    head.counted = !paper;
    oc.breakdown.push_back(head);
    oc.breakdown.push_back(dpa_ta_ops(kon));
  } else if (e == "als-bisrnn" || e == "als-bigru" || e == "als-bilstm") {
    const auto kind = e == "als-bisrnn" ? rnn::CellKind::SRNN
                      : e == "als-bigru" ? rnn::CellKind::GRU
                                         : rnn::CellKind::LSTM;
    const std::int64_t P = cfg.hidden ? cfg.hidden : 32;
    auto als = als_ops(kon, cfg.pilot_symbols);
    als.counted = !paper;
    oc.breakdown.push_back(als);
    if (paper) {
      // one frame-wide input vector per direction
      const std::int64_t kin = 2 * kon * (cfg.data_symbols + cfg.pilot_symbols);
      auto fwd = rnn_cell_ops(kind, P, kin);
      fwd.name += "-forward";
      auto bwd = rnn_cell_ops(kind, P, kin);
      bwd.name += "-backward";
      oc.breakdown.push_back(fwd);
      oc.breakdown.push_back(bwd);
      auto head = readout_ops(2 * P, 2 * kon);
      head.counted = false;
      oc.breakdown.push_back(head);
    } else {
      // sequence of preamble, data and pilot columns, 2 Kon wide each
      const std::int64_t T = 1 + cfg.data_symbols + cfg.pilot_symbols;
      const auto step = rnn_cell_ops(kind, P, 2 * kon);
      oc.breakdown.push_back({step.name + "-forward", T * step.mults, T * step.adds});
      oc.breakdown.push_back({step.name + "-backward", T * step.mults, T * step.adds});
      const auto head = readout_ops(2 * P, 2 * kon);
      oc.breakdown.push_back({"readout", T * head.mults, T * head.adds});
    }
  } else {
    throw InvalidArgument("count_ops: unknown estimator '" + e + "'");
  }
  for (const auto& s : oc.breakdown) {
    if (!s.counted) continue;
    oc.mults += s.mults;
    oc.adds += s.adds;
  }
  return oc;
}

void write_opcounts_csv(const std::vector<std::pair<OpConfig, OpCount>>& counts, std::ostream& out) {
  out << "# dsce opcounts v1\nestimator,mode,stage,mults,adds,counted\n";
  for (const auto& [cfg, oc] : counts) {
    const char* mode = cfg.mode == OpMode::Paper ? "paper" : "full";
    for (const auto& s : oc.breakdown)
      out << cfg.estimator << ',' << mode << ',' << s.name << ',' << s.mults << ',' << s.adds << ','
          << (s.counted ? 1 : 0) << '\n';
    out << cfg.estimator << ',' << mode << ",total," << oc.mults << ',' << oc.adds << ",1\n";
  }
}

void write_manifest(const std::map<std::string, std::string>& entries, std::ostream& out) {
  for (const auto& [k, v] : entries) out << k << '=' << v << '\n';
}

}  // namespace dsce
