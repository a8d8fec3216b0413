#pragma once

// Second-order recurrent network:
//
//   h'_i = sigmoid( sum_j W[i][j][k] * h_j )     k = one-hot index of the input
//
// Inputs are the binary symbols 0 and 1 plus an end-of-string stop symbol.
// After the stop symbol, hidden unit 0 (the response neuron) is the readout and
// is trained towards 1 for accepted strings and 0 for rejected ones.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dfaforge/tomita.hpp"

namespace dfaforge {

inline constexpr int kStopSymbol = 2;
inline constexpr int kInputSize = 3;
inline constexpr double kDecisionThreshold = 0.5;

class SecondOrderRnn {
 public:
  SecondOrderRnn() = default;
  // Zero weights, h_init = (1, 0, ..., 0).
  explicit SecondOrderRnn(int hidden);

  // Weights uniform in [-scale, scale] drawn from `seed`.
  static SecondOrderRnn random(int hidden, double scale, std::uint64_t seed);

  int hidden() const { return hidden_; }
  int inputs() const { return kInputSize; }
  int response_index() const { return 0; }

  // Layout is symbol-major: W[k] is a contiguous row-major N x N matrix.
  double& weight(int i, int j, int k) { return weights_[index(i, j, k)]; }
  double weight(int i, int j, int k) const { return weights_[index(i, j, k)]; }
  std::span<const double> matrix(int k) const {
    return {weights_.data() + static_cast<std::size_t>(k) * hidden_ * hidden_,
            static_cast<std::size_t>(hidden_) * hidden_};
  }
  std::vector<double>& weights() { return weights_; }
  const std::vector<double>& weights() const { return weights_; }

  const std::vector<double>& initial_state() const { return h_init_; }
  // Entries must lie in [0, 1]; throws UsageError otherwise.
  void set_initial_state(std::vector<double> h);

  std::uint64_t seed() const { return seed_; }
  void set_seed(std::uint64_t s) { seed_ = s; }

  bool operator==(const SecondOrderRnn&) const = default;

 private:
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * hidden_ + i) * hidden_ + j;
  }

  int hidden_ = 0;
  std::vector<double> weights_;
  std::vector<double> h_init_;
  std::uint64_t seed_ = 0;
};

double sigmoid(double x);

// One transition. `out` must have hidden() entries and must not alias `h`.
void step(const SecondOrderRnn& rnn, std::span<const double> h, int symbol,
          std::span<double> out);
std::vector<double> step(const SecondOrderRnn& rnn, std::span<const double> h, int symbol);

// d step(h)_i / d h_j, row-major N x N.
std::vector<double> step_jacobian(const SecondOrderRnn& rnn, std::span<const double> h,
                                  int symbol);

struct RunResult {
  int hidden = 0;
  // (|s| + 2) x N, row-major: h_init, one state per symbol, post-stop state.
  std::vector<double> trace;
  double readout = 0.0;

  std::size_t length() const { return hidden == 0 ? 0 : trace.size() / hidden; }
  std::span<const double> state(std::size_t t) const {
    return {trace.data() + t * hidden, static_cast<std::size_t>(hidden)};
  }
};

RunResult run(const SecondOrderRnn& rnn, std::string_view s);
double readout(const SecondOrderRnn& rnn, std::string_view s);

// 0.5 * (y - readout)^2
double loss(double readout, bool label);
// d loss / d readout
double loss_gradient(double readout, bool label);

// Loss of one string and its gradient with respect to every weight, by
// backpropagation through the unrolled sequence (stop step included).
struct Gradient {
  double loss = 0.0;
  std::vector<double> weights;
};
Gradient gradient(const SecondOrderRnn& rnn, std::string_view s, bool label);

bool classify(const SecondOrderRnn& rnn, std::string_view s);
// Fraction of items classified as labelled. Empty data gives 1.
double accuracy(const SecondOrderRnn& rnn, const LabeledDataset& data);
double accuracy_serial(const SecondOrderRnn& rnn, const LabeledDataset& data);

struct TrainConfig {
  int epochs = 100;
  double learning_rate = 0.01;
  double rms_decay = 0.99;
  double rms_epsilon = 1e-8;
  double weight_init_scale = 0.5;
  std::uint64_t seed = 1;
  bool shuffle_each_epoch = true;
  // Each epoch also replays minority-class strings, drawn with replacement,
  // until both labels occur equally often.
  bool balance_classes = true;

  // Throws UsageError on invalid values.
  void validate() const;
};

struct Snapshot {
  int epoch = 0;
  SecondOrderRnn model;
};

struct TrainResult {
  SecondOrderRnn model;
  std::vector<Snapshot> snapshots;
  // Mean per-string loss of each epoch, measured during the pass.
  std::vector<double> loss_curve;
  int epochs_run = 0;
};

// Called after every epoch (1-based); returning true stops training early.
using EpochHook = std::function<bool(int epoch, const SecondOrderRnn& model, double loss)>;

// Per-string RMSprop over data for cfg.epochs passes. Snapshots are taken after
// each epoch listed in `checkpoints`. Throws DivergedLoss if an epoch's loss is
// not finite.
TrainResult train(SecondOrderRnn rnn, const LabeledDataset& data, const TrainConfig& cfg,
                  const std::vector<int>& checkpoints = {}, const EpochHook& hook = {});

// Versioned text dump; weights are written with round-trip precision.
std::string serialize(const SecondOrderRnn& rnn);
SecondOrderRnn parse_model(std::string_view text);
void save_model(const SecondOrderRnn& rnn, const std::string& path);
SecondOrderRnn load_model(const std::string& path);

}  // namespace dfaforge
