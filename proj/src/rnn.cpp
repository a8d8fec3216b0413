#include "dfaforge/rnn.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "dfaforge/errors.hpp"

namespace dfaforge {

SecondOrderRnn::SecondOrderRnn(int hidden)
    : hidden_(hidden),
      weights_(static_cast<std::size_t>(hidden) * hidden * kInputSize, 0.0),
      h_init_(hidden, 0.0) {
  if (hidden <= 0) throw UsageError("hidden size must be positive");
  h_init_[0] = 1.0;
}

SecondOrderRnn SecondOrderRnn::random(int hidden, double scale, std::uint64_t seed) {
  SecondOrderRnn rnn(hidden);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (double& w : rnn.weights_) w = dist(rng);
  rnn.seed_ = seed;
  return rnn;
}

void SecondOrderRnn::set_initial_state(std::vector<double> h) {
  if (static_cast<int>(h.size()) != hidden_)
    throw UsageError("initial state has the wrong dimension");
  for (double v : h)
    if (!(v >= 0.0 && v <= 1.0)) throw UsageError("initial state entries must lie in [0, 1]");
  h_init_ = std::move(h);
}

double sigmoid(double x) {
  // Clamped so activations stay strictly inside (0, 1) in double precision.
  x = std::clamp(x, -30.0, 30.0);
  return 1.0 / (1.0 + std::exp(-x));
}

void step(const SecondOrderRnn& rnn, std::span<const double> h, int symbol,
          std::span<double> out) {
  const int n = rnn.hidden();
  const double* w = rnn.matrix(symbol).data();
  for (int i = 0; i < n; ++i) {
    const double* row = w + static_cast<std::size_t>(i) * n;
    double z = 0.0;
    for (int j = 0; j < n; ++j) z += row[j] * h[j];
    out[i] = sigmoid(z);
  }
}

std::vector<double> step(const SecondOrderRnn& rnn, std::span<const double> h, int symbol) {
  std::vector<double> out(rnn.hidden());
  step(rnn, h, symbol, out);
  return out;
}

std::vector<double> step_jacobian(const SecondOrderRnn& rnn, std::span<const double> h,
                                  int symbol) {
  const int n = rnn.hidden();
  std::vector<double> next = step(rnn, h, symbol);
  std::vector<double> jac(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    const double d = next[i] * (1.0 - next[i]);
    for (int j = 0; j < n; ++j) jac[i * n + j] = d * rnn.weight(i, j, symbol);
  }
  return jac;
}

RunResult run(const SecondOrderRnn& rnn, std::string_view s) {
  const int n = rnn.hidden();
  RunResult r;
  r.hidden = n;
  r.trace.resize((s.size() + 2) * n);
  std::copy(rnn.initial_state().begin(), rnn.initial_state().end(), r.trace.begin());
  for (std::size_t t = 0; t <= s.size(); ++t) {
    int symbol = t < s.size() ? symbol_index(s[t]) : kStopSymbol;
    std::span<const double> prev(r.trace.data() + t * n, n);
    std::span<double> next(r.trace.data() + (t + 1) * n, n);
    step(rnn, prev, symbol, next);
  }
  r.readout = r.trace[(s.size() + 1) * n + rnn.response_index()];
  return r;
}

double readout(const SecondOrderRnn& rnn, std::string_view s) {
  const int n = rnn.hidden();
  std::vector<double> a(rnn.initial_state()), b(n);
  for (char c : s) {
    step(rnn, a, symbol_index(c), b);
    a.swap(b);
  }
  step(rnn, a, kStopSymbol, b);
  return b[rnn.response_index()];
}

double loss(double readout, bool label) {
  const double y = label ? 1.0 : 0.0;
  return 0.5 * (y - readout) * (y - readout);
}

double loss_gradient(double readout, bool label) { return readout - (label ? 1.0 : 0.0); }

namespace {

// Reusable buffers for backpropagation through time.
struct Workspace {
  std::vector<int> symbols;
  std::vector<double> states;
  std::vector<double> delta, dz;
};

// Adds d loss / d W into grad and returns the loss.
double accumulate_gradient(const SecondOrderRnn& rnn, std::string_view s, bool label,
                           Workspace& ws, double* grad) {
  const int n = rnn.hidden();
  const std::size_t steps = s.size() + 1;
  ws.symbols.resize(steps);
  for (std::size_t t = 0; t < s.size(); ++t) ws.symbols[t] = symbol_index(s[t]);
  ws.symbols[s.size()] = kStopSymbol;

  ws.states.resize((steps + 1) * n);
  std::copy(rnn.initial_state().begin(), rnn.initial_state().end(), ws.states.begin());
  for (std::size_t t = 0; t < steps; ++t)
    step(rnn, std::span<const double>(ws.states.data() + t * n, n), ws.symbols[t],
         std::span<double>(ws.states.data() + (t + 1) * n, n));

  const double out = ws.states[steps * n + rnn.response_index()];
  ws.delta.assign(n, 0.0);
  ws.delta[rnn.response_index()] = loss_gradient(out, label);
  ws.dz.resize(n);

  for (std::size_t t = steps; t-- > 0;) {
    const double* prev = ws.states.data() + t * n;
    const double* cur = ws.states.data() + (t + 1) * n;
    const int k = ws.symbols[t];
    const double* w = rnn.matrix(k).data();
    double* g = grad + static_cast<std::size_t>(k) * n * n;
    for (int i = 0; i < n; ++i) ws.dz[i] = ws.delta[i] * cur[i] * (1.0 - cur[i]);
    for (int i = 0; i < n; ++i) {
      const double dzi = ws.dz[i];
      double* grow = g + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) grow[j] += dzi * prev[j];
    }
    if (t == 0) break;
    std::fill(ws.delta.begin(), ws.delta.end(), 0.0);
    for (int i = 0; i < n; ++i) {
      const double dzi = ws.dz[i];
      const double* wrow = w + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) ws.delta[j] += wrow[j] * dzi;
    }
  }
  return loss(out, label);
}

}  // namespace

Gradient gradient(const SecondOrderRnn& rnn, std::string_view s, bool label) {
  Workspace ws;
  Gradient g;
  g.weights.assign(rnn.weights().size(), 0.0);
  g.loss = accumulate_gradient(rnn, s, label, ws, g.weights.data());
  return g;
}

bool classify(const SecondOrderRnn& rnn, std::string_view s) {
  return readout(rnn, s) > kDecisionThreshold;
}

double accuracy_serial(const SecondOrderRnn& rnn, const LabeledDataset& data) {
  if (data.empty()) return 1.0;
  std::size_t hits = 0;
  for (const auto& item : data.items)
    if (classify(rnn, item.text) == item.label) ++hits;
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

double accuracy(const SecondOrderRnn& rnn, const LabeledDataset& data) {
  if (data.empty()) return 1.0;
  const auto count = static_cast<std::ptrdiff_t>(data.size());
  std::size_t hits = 0;
#pragma omp parallel for reduction(+ : hits) schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i)
    if (classify(rnn, data.items[i].text) == data.items[i].label) ++hits;
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

void TrainConfig::validate() const {
  if (epochs < 1) throw UsageError("epochs must be at least 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw UsageError("learning rate must be finite and non-negative");
  if (!(rms_decay > 0.0 && rms_decay < 1.0)) throw UsageError("rms decay must lie in (0, 1)");
  if (!(rms_epsilon > 0.0)) throw UsageError("rms epsilon must be positive");
  if (!(weight_init_scale >= 0.0)) throw UsageError("weight init scale must be non-negative");
}

TrainResult train(SecondOrderRnn rnn, const LabeledDataset& data, const TrainConfig& cfg,
                  const std::vector<int>& checkpoints, const EpochHook& hook) {
  cfg.validate();
  if (data.empty()) throw UsageError("training data is empty");

  TrainResult result;
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> base(data.size());
  std::iota(base.begin(), base.end(), 0);
  std::vector<std::size_t> minority;
  std::size_t deficit = 0;
  if (cfg.balance_classes) {
    const std::size_t pos = data.positives(), neg = data.size() - pos;
    if (pos > 0 && neg > 0 && pos != neg) {
      const bool minority_label = pos < neg;
      for (std::size_t i = 0; i < data.size(); ++i)
        if (data.items[i].label == minority_label) minority.push_back(i);
      deficit = (pos < neg ? neg - pos : pos - neg);
    }
  }
  std::vector<std::size_t> order;

  const std::size_t params = rnn.weights().size();
  std::vector<double> grad(params), mean_sq(params, 0.0);
  const double lr = cfg.learning_rate, rho = cfg.rms_decay, eps = cfg.rms_epsilon;
  Workspace ws;
  double* w = rnn.weights().data();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    order = base;
    if (deficit > 0) {
      std::uniform_int_distribution<std::size_t> pick(0, minority.size() - 1);
      for (std::size_t r = 0; r < deficit; ++r) order.push_back(minority[pick(rng)]);
    }
    if (cfg.shuffle_each_epoch) std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t idx : order) {
      const auto& item = data.items[idx];
      std::fill(grad.begin(), grad.end(), 0.0);
      total += accumulate_gradient(rnn, item.text, item.label, ws, grad.data());
      for (std::size_t p = 0; p < params; ++p) {
        const double g = grad[p];
        mean_sq[p] = rho * mean_sq[p] + (1.0 - rho) * g * g;
        w[p] -= lr * g / std::sqrt(mean_sq[p] + eps);
      }
    }
    const double epoch_loss = total / static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss))
      throw DivergedLoss("training loss became non-finite at epoch " + std::to_string(epoch));
    result.loss_curve.push_back(epoch_loss);
    result.epochs_run = epoch;
    if (std::find(checkpoints.begin(), checkpoints.end(), epoch) != checkpoints.end())
      result.snapshots.push_back({epoch, rnn});
    if (hook && hook(epoch, rnn, epoch_loss)) break;
  }
  result.model = std::move(rnn);
  return result;
}

namespace {

void put_double(std::ostream& os, double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  os.write(buf, end - buf);
}

double get_double(std::istream& is) {
  std::string tok;
  if (!(is >> tok)) throw ParseError("model: expected a number");
  double v = 0.0;
  auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || end != tok.data() + tok.size() || !std::isfinite(v))
    throw ParseError("model: bad number '" + tok + "'");
  return v;
}

void expect(std::istream& is, const char* word) {
  std::string tok;
  if (!(is >> tok) || tok != word) throw ParseError(std::string("model: expected '") + word + "'");
}

}  // namespace

std::string serialize(const SecondOrderRnn& rnn) {
  std::ostringstream os;
  const int n = rnn.hidden();
  os << "dfaforge-rnn 1\n";
  os << "hidden " << n << " inputs " << kInputSize << " response " << rnn.response_index()
     << " seed " << rnn.seed() << "\n";
  os << "h_init";
  for (double v : rnn.initial_state()) {
    os << ' ';
    put_double(os, v);
  }
  os << "\n";
  for (int k = 0; k < kInputSize; ++k)
    for (int i = 0; i < n; ++i) {
      os << "w " << k << ' ' << i;
      for (int j = 0; j < n; ++j) {
        os << ' ';
        put_double(os, rnn.weight(i, j, k));
      }
      os << "\n";
    }
  return os.str();
}

SecondOrderRnn parse_model(std::string_view text) {
  std::istringstream is{std::string(text)};
  expect(is, "dfaforge-rnn");
  int version = 0;
  if (!(is >> version) || version != 1) throw ParseError("model: unsupported version");
  int n = 0, inputs = 0, response = -1;
  std::uint64_t seed = 0;
  expect(is, "hidden");
  is >> n;
  expect(is, "inputs");
  is >> inputs;
  expect(is, "response");
  is >> response;
  expect(is, "seed");
  is >> seed;
  if (!is || n <= 0 || n > 4096 || inputs != kInputSize || response != 0)
    throw ParseError("model: bad header");
  SecondOrderRnn rnn(n);
  rnn.set_seed(seed);
  expect(is, "h_init");
  std::vector<double> h(n);
  for (double& v : h) v = get_double(is);
  try {
    rnn.set_initial_state(std::move(h));
  } catch (const UsageError& e) {
    throw ParseError(std::string("model: ") + e.what());
  }
  for (int k = 0; k < kInputSize; ++k)
    for (int i = 0; i < n; ++i) {
      expect(is, "w");
      int kk = -1, ii = -1;
      is >> kk >> ii;
      if (kk != k || ii != i) throw ParseError("model: weight rows out of order");
      for (int j = 0; j < n; ++j) rnn.weight(i, j, k) = get_double(is);
    }
  std::string extra;
  if (is >> extra) throw ParseError("model: trailing data");
  return rnn;
}

void save_model(const SecondOrderRnn& rnn, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path, "cannot open for writing");
  out << serialize(rnn);
  if (!out) throw IoError(path, "write failed");
}

SecondOrderRnn load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str());
}

}  // namespace dfaforge
