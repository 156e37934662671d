// SPDX-License-Identifier: Apache-2.0
// Training orchestration, Monte Carlo sweeps, correlation profiling and
// operation counting.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "dsce/channel.hpp"
#include "dsce/dataset.hpp"
#include "dsce/rnn.hpp"

namespace dsce {

// --- scenarios --------------------------------------------------------------

struct MobilityPreset {
  std::string name;
  double doppler_hz;
  std::string profile;
  int pilot_symbols;  ///< Q for frame-by-frame layouts
};

/// low: 250 Hz VTV-UC Q=1; high: 500 Hz VTV-SDWW Q=2; very-high: 1000 Hz VTV-SDWW Q=3.
const std::vector<MobilityPreset>& mobility_presets();
const MobilityPreset& mobility_preset(const std::string& name);

enum class EstimatorFamily { Sbs, Fbf };

struct EstimatorInfo {
  std::string name;
  EstimatorFamily family;
  bool neural;
};

/// genie, dpa, srnn-dpa-ta, gru-dpa-ta, lstm-dpa-ta (symbol by symbol);
/// genie-fbf, wi, als-bigru (frame by frame).
const std::vector<EstimatorInfo>& estimators();
const EstimatorInfo& estimator_info(const std::string& name);

struct LinkConfig {
  std::string profile = "VTV-SDWW";
  double doppler_hz = 1000.0;
  int modulation_order = 4;
  int data_symbols = 100;
  int pilot_symbols = 3;

  Scenario scenario(EstimatorFamily family) const;
};

// --- training ---------------------------------------------------------------

struct TrainPlan {
  LinkConfig link;
  std::vector<double> dopplers;  ///< one model per entry, weight-averaged when several
  rnn::TrainConfig train;
  std::uint64_t seed = 1;
};

/// Desk scale: 2000 training frames, 100 epochs, batch 16. Paper scale: 16000, 500, batch 128.
rnn::TrainConfig desk_scale_training();
rnn::TrainConfig paper_scale_training();

struct TrainOutcome {
  rnn::NetworkModel model;
  std::vector<std::vector<double>> loss_history;  ///< per Doppler
  bool diverged = false;
  std::string message;
};

TrainOutcome train_estimator(const std::string& estimator, const TrainPlan& plan,
                             const rnn::EpochCallback& on_epoch = {});

// --- sweeps -----------------------------------------------------------------

struct SweepConfig {
  std::vector<double> snr_db = {0, 5, 10, 15, 20, 25, 30, 35, 40};
  std::size_t n_frames = 200;
  LinkConfig link;
  std::vector<std::string> estimators = {"genie", "dpa", "gru-dpa-ta"};
  std::uint64_t seed = 1;
  std::size_t wi_training_realizations = 2000;

  void validate() const;
};

struct ResultRow {
  std::string estimator;
  double snr_db = 0.0;
  double doppler_hz = 0.0;
  int modulation_order = 4;
  int data_symbols = 0;
  double ber = 0.0;
  double nmse = 0.0;
  double throughput = 0.0;
  std::size_t n_frames = 0;
  std::uint64_t seed = 0;
  // raw tallies behind the ratios
  std::uint64_t bit_errors = 0;
  std::uint64_t bits = 0;
  std::uint64_t correct_symbols = 0;
  std::uint64_t symbols = 0;
};

/// Per-frame tallies of one estimator.
struct FrameTally {
  std::uint64_t bit_errors = 0;
  std::uint64_t bits = 0;
  std::uint64_t correct_symbols = 0;
  std::uint64_t symbols = 0;
  double nmse = 0.0;
};

FrameTally tally_frame(const FrameEstimate& est, const Bits& tx_bits, const CMatrix& reference,
                       int bits_per_symbol);

/// Fraction of data bits carried by correctly demapped symbols.
double throughput(std::uint64_t correct_symbols, std::uint64_t symbols);

using ModelSet = std::map<std::string, rnn::NetworkModel>;

/// Rows ordered by estimator (as listed) then SNR. Frame f at every SNR
/// point and for every estimator of a family sees the same channel, payload
/// and unit-variance noise.
std::vector<ResultRow> run_ber_sweep(const SweepConfig& cfg, const ModelSet& models);

inline constexpr const char* kResultsHeader =
    "# dsce results v1\nestimator,snr_db,fd_hz,modulation,I,ber,nmse,throughput,n_frames,seed";
void write_results_csv(const std::vector<ResultRow>& rows, std::ostream& out);

// --- correlation ------------------------------------------------------------

CorrelationProfile run_correlation(const std::string& profile, double doppler_hz, int symbols,
                                   std::size_t realizations, std::uint64_t seed, bool normalize = true);
void write_psi_csv(const CorrelationProfile& p, std::ostream& out);

// --- operation counts -------------------------------------------------------

struct OpStage {
  std::string name;
  std::int64_t mults = 0;
  std::int64_t adds = 0;
  bool counted = true;  ///< false: listed for reference, excluded from the totals
};

struct OpCount {
  std::int64_t mults = 0;
  std::int64_t adds = 0;
  std::vector<OpStage> breakdown;
};

enum class OpMode { Paper, Full };

struct OpConfig {
  std::string estimator = "gru-dpa-ta";
  OpMode mode = OpMode::Paper;
  int kon = 52;
  int kd = 48;
  int hidden = 0;           ///< 0: estimator default (48 SBS GRU/SRNN, 64 LSTM, 32 FBF)
  int data_symbols = 100;   ///< I
  int pilot_symbols = 4;    ///< Q
};

/// SBS estimators count per received symbol; FBF estimators per frame.
/// Paper mode keeps only the recurrent stage (plus DPA-TA for SBS) and
/// treats the frame-level network input as one vector of 2 Kon (I + Q).
/// Full mode counts what the implementation executes, readout included.
OpCount count_ops(const OpConfig& cfg);

/// Estimators count_ops understands.
std::vector<std::string> op_estimators();

OpStage rnn_cell_ops(rnn::CellKind kind, std::int64_t hidden, std::int64_t input);
OpStage dpa_ta_ops(std::int64_t kon);
OpStage als_ops(std::int64_t kon, std::int64_t pilot_symbols);
OpStage readout_ops(std::int64_t width, std::int64_t out);

void write_opcounts_csv(const std::vector<std::pair<OpConfig, OpCount>>& counts, std::ostream& out);

// --- output helpers ---------------------------------------------------------

/// printf "%.17g".
std::string fmt17(double v);

/// key=value lines in sorted key order.
void write_manifest(const std::map<std::string, std::string>& entries, std::ostream& out);

}  // namespace dsce
