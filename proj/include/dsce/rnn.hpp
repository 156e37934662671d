// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dsce/types.hpp"

namespace dsce::rnn {

enum class CellKind { SRNN = 0, LSTM = 1, GRU = 2 };
enum class Activation { Linear = 0, Sigmoid = 1 };

const char* to_string(CellKind kind);
CellKind parse_cell_kind(const std::string& name);

/// Gate blocks per cell: SRNN 1 (hidden), LSTM 4, GRU 3.
int gate_count(CellKind kind);

/// Recurrent cell parameters with gate blocks stacked row-wise.
///
/// Block order, each P rows:
///   SRNN  hidden
///   LSTM  forget, input, candidate, output
///   GRU   reset, update, candidate
///
/// `W` multiplies the input, `U` the previous hidden state (for the GRU
/// candidate block: the reset-gated hidden state).
struct CellParams {
  CellKind kind = CellKind::GRU;
  RMatrix W;  ///< G*P x K_in
  RMatrix U;  ///< G*P x P
  RVector b;  ///< G*P

  int input_dim() const { return static_cast<int>(W.cols()); }
  int hidden_dim() const { return static_cast<int>(U.cols()); }

  auto W_gate(int g) { return W.middleRows(g * hidden_dim(), hidden_dim()); }
  auto U_gate(int g) { return U.middleRows(g * hidden_dim(), hidden_dim()); }
  auto b_gate(int g) { return b.segment(g * hidden_dim(), hidden_dim()); }
  auto W_gate(int g) const { return W.middleRows(g * hidden_dim(), hidden_dim()); }
  auto U_gate(int g) const { return U.middleRows(g * hidden_dim(), hidden_dim()); }
  auto b_gate(int g) const { return b.segment(g * hidden_dim(), hidden_dim()); }
};

/// Affine map from the (concatenated) hidden state to the output.
struct Readout {
  RMatrix W;  ///< out x width
  RVector b;  ///< out
  Activation activation = Activation::Linear;
};

struct NetworkModel {
  CellParams forward;
  std::optional<CellParams> backward;  ///< present for bidirectional models
  Readout readout;

  bool bidirectional() const { return backward.has_value(); }
  int input_dim() const { return forward.input_dim(); }
  int hidden_dim() const { return forward.hidden_dim(); }
  int out_dim() const { return static_cast<int>(readout.W.rows()); }
  int readout_width() const { return bidirectional() ? 2 * hidden_dim() : hidden_dim(); }

  /// Throws InvalidArgument on inconsistent shapes or non-finite values.
  void validate() const;
};

struct Architecture {
  CellKind kind = CellKind::GRU;
  int input_dim = 0;
  int hidden_dim = 0;
  int out_dim = 0;
  bool bidirectional = false;
  Activation readout_activation = Activation::Linear;
};

Architecture architecture_of(const NetworkModel& m);
bool same_architecture(const NetworkModel& a, const NetworkModel& b);

/// Weights uniform in [-1/sqrt(fan), 1/sqrt(fan)] (fan = P for the cells,
/// the readout width for the head), zero biases.
NetworkModel init_model(const Architecture& arch, std::uint64_t seed);
NetworkModel zeros_like(const NetworkModel& m);

/// Visits every tensor in file order: forward W, U, b; backward W, U, b;
/// readout W, b. The callback receives (name, Eigen::Ref<RMatrix>) for
/// matrices and vectors alike (vectors as one column).
void for_each_tensor(NetworkModel& m, const std::function<void(const char*, Eigen::Ref<RMatrix>)>& fn);
void for_each_tensor(const NetworkModel& m,
                     const std::function<void(const char*, const Eigen::Ref<const RMatrix>&)>& fn);

std::size_t parameter_count(const NetworkModel& m);
RVector flatten(const NetworkModel& m);
void unflatten(NetworkModel& m, const RVector& theta);

// --- single steps -------------------------------------------------------

struct SrnnOutput {
  RVector h;
  RVector o;
};
/// h = sigma(W x + U h_prev + b); o = head(h).
SrnnOutput srnn_step(const CellParams& p, const Readout& head, const RVector& x, const RVector& h_prev);

struct LstmOutput {
  RVector h;
  RVector c;
};
LstmOutput lstm_step(const CellParams& p, const RVector& x, const RVector& h_prev, const RVector& c_prev);

RVector gru_step(const CellParams& p, const RVector& x, const RVector& h_prev);

RVector apply_readout(const Readout& r, const RVector& hidden);

// --- sequences ----------------------------------------------------------

/// xs: K_in x T (one column per step). Returns out x T.
/// Bidirectional models concatenate [h_fwd; h_bwd] per step before the readout.
RMatrix run_sequence(const NetworkModel& model, const RMatrix& xs);

/// Causal step-by-step execution of a unidirectional model.
class StreamingRunner {
 public:
  explicit StreamingRunner(const NetworkModel& model);
  void reset();
  RVector step(const RVector& x);

 private:
  const NetworkModel* model_;
  RVector h_, c_;
};

// --- training data and gradients ----------------------------------------

struct Sample {
  Eigen::MatrixXf input;   ///< K_in x T
  Eigen::MatrixXf target;  ///< out x T
};

struct Dataset {
  std::vector<Sample> samples;
  /// Per-step loss weight (length T); empty means every step counts once.
  std::vector<double> step_weights;

  std::size_t size() const { return samples.size(); }
  int steps() const { return samples.empty() ? 0 : static_cast<int>(samples.front().input.cols()); }
  double weight(int t) const { return step_weights.empty() ? 1.0 : step_weights[static_cast<std::size_t>(t)]; }
  void validate(const NetworkModel& model) const;
};

struct LossGrad {
  double loss = 0.0;  ///< mean squared error over weighted entries
  NetworkModel grad;
};

/// Sum of weighted squared errors over the listed samples and its exact
/// gradient, computed for the whole list as one time-major batch.
/// Throws RuntimeError if the loss is not finite.
LossGrad sse_batch(const NetworkModel& model, const Dataset& data, std::span<const std::size_t> indices);

/// Number of squared-error terms the listed samples contribute (weighted).
double mse_normalizer(const NetworkModel& model, const Dataset& data, std::size_t n_samples);

enum class Exec { Serial, Parallel };

/// Mean squared error and its exact gradient via backpropagation through time.
/// Parallel execution splits the batch into fixed-size chunks, so results do
/// not depend on the thread count.
LossGrad bptt_gradients(const NetworkModel& model, const Dataset& data,
                        std::span<const std::size_t> indices, Exec exec = Exec::Parallel);
LossGrad bptt_gradients(const NetworkModel& model, const Dataset& data, Exec exec = Exec::Parallel);

double mse_loss(const NetworkModel& model, const Dataset& data);

// --- optimization -------------------------------------------------------

struct TrainConfig {
  int epochs = 500;
  int batch_size = 128;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 5.0;  ///< global gradient-norm clip; <= 0 disables
  double train_snr_db = 40.0;
  int n_train = 16000;
  int n_test = 2000;

  void validate() const;
};

struct AdamState {
  NetworkModel m;
  NetworkModel v;
  std::int64_t step = 0;

  explicit AdamState(const NetworkModel& like);
};

void adam_update(NetworkModel& params, const NetworkModel& grad, AdamState& state, const TrainConfig& cfg);

/// Scales the gradient in place so its global L2 norm is at most max_norm; returns the original norm.
double clip_global_norm(NetworkModel& grad, double max_norm);

struct TrainResult {
  NetworkModel model;
  std::vector<double> loss_history;  ///< mean minibatch loss per epoch
  bool diverged = false;             ///< model holds the last finite checkpoint
  std::string message;
};

using EpochCallback = std::function<void(int epoch, double loss)>;

/// Minibatch Adam on the MSE loss. Shuffling is seeded; identical inputs and
/// seed give bit-identical weights.
TrainResult train(NetworkModel model, const Dataset& data, const TrainConfig& cfg, std::uint64_t seed,
                  const EpochCallback& on_epoch = {});

/// Elementwise mean of all parameters of same-architecture models.
NetworkModel ensemble_average(std::span<const NetworkModel> models);

// --- serialization ------------------------------------------------------

inline constexpr char kModelMagic[8] = {'D', 'S', 'C', 'E', 'R', 'N', 'N', '\0'};
inline constexpr std::uint32_t kModelVersion = 1;

/// Layout (all integers and floats little-endian):
///   magic[8] "DSCERNN\0", u32 version, u32 cell kind (0 SRNN, 1 LSTM, 2 GRU),
///   u32 bidirectional, u32 readout activation (0 linear, 1 sigmoid),
///   u32 input_dim, u32 hidden_dim, u32 out_dim, u64 parameter count,
///   then f64 tensors row-major in for_each_tensor order.
void write_model(const NetworkModel& m, std::ostream& out);
NetworkModel read_model(std::istream& in);
void save_model(const NetworkModel& m, const std::filesystem::path& path);
NetworkModel load_model(const std::filesystem::path& path);

}  // namespace dsce::rnn
