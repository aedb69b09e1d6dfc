#include "riskminer/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>

#include "riskminer/errors.hpp"
#include "riskminer/rng.hpp"

namespace riskminer {

namespace {

constexpr char kMagic[8] = {'R', 'M', 'P', 'O', 'L', 'I', 'C', 'Y'};
constexpr std::uint32_t kVersion = 1;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// y += W x, W is rows x cols row-major starting at w.
void matvec_add(const double* w, std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* wr = w + i * cols;
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) acc += wr[j] * x[j];
    y[i] += acc;
  }
}

// y += W^T d
void matvec_t_add(const double* w, std::size_t rows, std::size_t cols, const double* d, double* y) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* wr = w + i * cols;
    const double di = d[i];
    if (di == 0.0) continue;
    for (std::size_t j = 0; j < cols; ++j) y[j] += wr[j] * di;
  }
}

// G += d x^T
void outer_add(double* g, std::size_t rows, std::size_t cols, const double* d, const double* x) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double di = d[i];
    if (di == 0.0) continue;
    double* gr = g + i * cols;
    for (std::size_t j = 0; j < cols; ++j) gr[j] += di * x[j];
  }
}

// Masked softmax over `legal`; returns probabilities in legal order.
std::vector<double> masked_softmax(const std::vector<double>& logits, std::span<const Token> legal) {
  std::vector<double> p(legal.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (Token t : legal) mx = std::max(mx, logits[t.index()]);
  double total = 0.0;
  for (std::size_t i = 0; i < legal.size(); ++i) {
    p[i] = std::exp(logits[legal[i].index()] - mx);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

}  // namespace

struct Policy::Trace {
  struct Cell {
    std::vector<double> x, h_prev, r, z, n, hn, h;
  };
  std::vector<std::vector<Cell>> steps;  // [time][layer], only when keep_all
  std::vector<std::vector<double>> top;  // top-layer output per time step
};

Policy::Policy(PolicyConfig config, std::uint64_t seed) : config_(std::move(config)) {
  if (config_.embed_dim == 0 || config_.hidden_dim == 0 || config_.layers == 0) {
    throw ArgumentError("policy dimensions must be positive");
  }
  build_layout();
  Rng rng(seed);
  for (const Block& b : blocks_) {
    double scale = 0.0;
    if (b.name == "embedding") {
      scale = 1.0;
    } else if (b.name.rfind("gru", 0) == 0) {
      scale = 1.0 / std::sqrt(static_cast<double>(config_.hidden_dim));
    } else {
      // head weights and biases: fan-in of the layer
      const std::size_t j = b.name.rfind("out", 0) == 0
                                ? layout_.head.size() - 1
                                : static_cast<std::size_t>(std::stoul(b.name.substr(4)));
      scale = 1.0 / std::sqrt(static_cast<double>(layout_.head[j].in));
    }
    for (std::size_t i = 0; i < b.size; ++i) theta_[b.offset + i] = rng.uniform(-scale, scale);
  }
}

void Policy::build_layout() {
  const std::size_t v = kVocabularySize;
  const std::size_t h = config_.hidden_dim;
  std::size_t offset = 0;
  auto add = [&](std::string name, std::size_t size) {
    blocks_.push_back({std::move(name), offset, size});
    offset += size;
    return offset - size;
  };
  layout_.embedding = add("embedding", v * config_.embed_dim);
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::size_t in = l == 0 ? config_.embed_dim : h;
    const std::string p = "gru" + std::to_string(l);
    Layout::Gru g{};
    g.input = in;
    g.w_ih = add(p + ".w_ih", 3 * h * in);
    g.w_hh = add(p + ".w_hh", 3 * h * h);
    g.b_ih = add(p + ".b_ih", 3 * h);
    g.b_hh = add(p + ".b_hh", 3 * h);
    layout_.gru.push_back(g);
  }
  std::size_t prev = h;
  for (std::size_t j = 0; j < config_.head_dims.size(); ++j) {
    const std::size_t out = config_.head_dims[j];
    const std::string p = "head" + std::to_string(j);
    Layout::Dense d{};
    d.in = prev;
    d.out = out;
    d.w = add(p + ".w", out * prev);
    d.b = add(p + ".b", out);
    layout_.head.push_back(d);
    prev = out;
  }
  Layout::Dense o{};
  o.in = prev;
  o.out = v;
  o.w = add("out.w", v * prev);
  o.b = add("out.b", v);
  layout_.head.push_back(o);
  theta_.assign(offset, 0.0);
}

void Policy::gru_layer(std::size_t l, const double* x, const double* h_prev, GruScratch& s) const {
  const std::size_t h = config_.hidden_dim;
  const double* th = theta_.data();
  const auto& g = layout_.gru[l];
  s.gi.assign(th + g.b_ih, th + g.b_ih + 3 * h);
  s.gh.assign(th + g.b_hh, th + g.b_hh + 3 * h);
  matvec_add(th + g.w_ih, 3 * h, g.input, x, s.gi.data());
  matvec_add(th + g.w_hh, 3 * h, h, h_prev, s.gh.data());
  s.r.resize(h);
  s.z.resize(h);
  s.n.resize(h);
  s.h.resize(h);
  for (std::size_t k = 0; k < h; ++k) {
    s.r[k] = sigmoid(s.gi[k] + s.gh[k]);
    s.z[k] = sigmoid(s.gi[h + k] + s.gh[h + k]);
    s.n[k] = std::tanh(s.gi[2 * h + k] + s.r[k] * s.gh[2 * h + k]);
    s.h[k] = (1.0 - s.z[k]) * s.n[k] + s.z[k] * h_prev[k];
  }
}

Policy::Trace Policy::run(std::span<const Token> tokens, bool keep_all) const {
  const std::size_t h = config_.hidden_dim;
  Trace trace;
  Encoding state = initial_encoding();
  GruScratch s;
  for (Token tok : tokens) {
    std::vector<double> x = embedding_of(tok);
    if (keep_all) trace.steps.emplace_back();
    for (std::size_t l = 0; l < config_.layers; ++l) {
      gru_layer(l, x.data(), state[l].data(), s);
      if (keep_all) {
        Trace::Cell cell;
        cell.x = x;
        cell.h_prev = state[l];
        cell.r = s.r;
        cell.z = s.z;
        cell.n = s.n;
        cell.hn.assign(s.gh.begin() + 2 * static_cast<std::ptrdiff_t>(h), s.gh.end());
        cell.h = s.h;
        trace.steps.back().push_back(std::move(cell));
      }
      state[l] = s.h;
      x = s.h;
    }
    trace.top.push_back(x);
  }
  return trace;
}

std::vector<double> Policy::embedding_of(Token token) const {
  const std::size_t e = config_.embed_dim;
  const double* row = theta_.data() + layout_.embedding + token.index() * e;
  return {row, row + e};
}

Policy::Encoding Policy::initial_encoding() const {
  return Encoding(config_.layers, std::vector<double>(config_.hidden_dim, 0.0));
}

void Policy::advance(Encoding& encoding, Token token) const {
  std::vector<double> x = embedding_of(token);
  GruScratch s;
  for (std::size_t l = 0; l < config_.layers; ++l) {
    gru_layer(l, x.data(), encoding[l].data(), s);
    encoding[l] = s.h;
    x = s.h;
  }
}

std::vector<double> Policy::probabilities_from(const Encoding& encoding, std::span<const Token> legal) const {
  if (legal.empty()) throw ArgumentError("empty action mask");
  if (legal.size() == 1) return {1.0};
  return masked_softmax(head_forward(encoding.back(), nullptr), legal);
}

std::vector<double> Policy::head_forward(std::span<const double> top,
                                         std::vector<std::vector<double>>* acts) const {
  const double* th = theta_.data();
  std::vector<double> a(top.begin(), top.end());
  if (acts) acts->push_back(a);
  for (std::size_t j = 0; j < layout_.head.size(); ++j) {
    const auto& d = layout_.head[j];
    std::vector<double> out(th + d.b, th + d.b + d.out);
    matvec_add(th + d.w, d.out, d.in, a.data(), out.data());
    const bool last = j + 1 == layout_.head.size();
    if (!last) {
      for (double& v : out) v = std::tanh(v);
      if (acts) acts->push_back(out);
    }
    a = std::move(out);
  }
  return a;
}

std::vector<double> Policy::logits(std::span<const Token> prefix) const {
  if (prefix.empty()) throw ArgumentError("policy needs a non-empty prefix");
  const Trace t = run(prefix, false);
  return head_forward(t.top.back(), nullptr);
}

std::vector<double> Policy::probabilities(const MdpState& state, std::span<const Token> legal) const {
  if (legal.empty()) throw ArgumentError("empty action mask");
  if (legal.size() == 1) return {1.0};
  return masked_softmax(logits(state.tokens), legal);
}

namespace {

// Token sequence whose prefixes are the trajectory's states, and the position
// of each transition's state within it.
std::vector<Token> trajectory_inputs(const Trajectory& trajectory, std::size_t& first_position) {
  const auto& first = trajectory.transitions.front().state.tokens;
  std::vector<Token> seq(first.begin(), first.end());
  first_position = seq.size() - 1;
  for (std::size_t i = 0; i + 1 < trajectory.transitions.size(); ++i) {
    seq.push_back(trajectory.transitions[i].action);
  }
  return seq;
}

}  // namespace

double Policy::log_prob(const Trajectory& trajectory) const {
  if (trajectory.transitions.empty()) return 0.0;
  std::size_t first = 0;
  const auto seq = trajectory_inputs(trajectory, first);
  const Trace t = run(seq, false);
  double total = 0.0;
  for (std::size_t i = 0; i < trajectory.transitions.size(); ++i) {
    const Transition& tr = trajectory.transitions[i];
    const auto lg = head_forward(t.top[first + i], nullptr);
    double mx = -std::numeric_limits<double>::infinity();
    for (Token tok : tr.legal) mx = std::max(mx, lg[tok.index()]);
    double z = 0.0;
    for (Token tok : tr.legal) z += std::exp(lg[tok.index()] - mx);
    total += lg[tr.action.index()] - mx - std::log(z);
  }
  return total;
}

std::vector<double> Policy::log_prob_gradient(const Trajectory& trajectory) const {
  std::vector<double> grad(theta_.size(), 0.0);
  if (trajectory.transitions.empty()) return grad;
  const std::size_t h = config_.hidden_dim;
  const std::size_t e = config_.embed_dim;
  const double* th = theta_.data();
  double* gr = grad.data();

  std::size_t first = 0;
  const auto seq = trajectory_inputs(trajectory, first);
  const Trace trace = run(seq, true);
  const std::size_t steps = seq.size();

  // Head backward at every scored position; collect d(top) per time step.
  std::vector<std::vector<double>> dtop(steps, std::vector<double>(h, 0.0));
  for (std::size_t i = 0; i < trajectory.transitions.size(); ++i) {
    const Transition& tr = trajectory.transitions[i];
    if (tr.legal.size() <= 1) continue;  // log 1 = 0 contributes nothing
    const std::size_t pos = first + i;
    std::vector<std::vector<double>> acts;
    const auto lg = head_forward(trace.top[pos], &acts);
    const auto p = masked_softmax(lg, tr.legal);
    std::vector<double> d(kVocabularySize, 0.0);
    for (std::size_t k = 0; k < tr.legal.size(); ++k) d[tr.legal[k].index()] = -p[k];
    d[tr.action.index()] += 1.0;

    for (std::size_t j = layout_.head.size(); j-- > 0;) {
      const auto& L = layout_.head[j];
      const std::vector<double>& input = acts[j];
      outer_add(gr + L.w, L.out, L.in, d.data(), input.data());
      for (std::size_t k = 0; k < L.out; ++k) gr[L.b + k] += d[k];
      std::vector<double> din(L.in, 0.0);
      matvec_t_add(th + L.w, L.out, L.in, d.data(), din.data());
      if (j > 0) {
        for (std::size_t k = 0; k < L.in; ++k) din[k] *= 1.0 - input[k] * input[k];
      }
      d = std::move(din);
    }
    for (std::size_t k = 0; k < h; ++k) dtop[pos][k] += d[k];
  }

  // Backprop through time.
  std::vector<std::vector<double>> carry(config_.layers, std::vector<double>(h, 0.0));
  std::vector<double> dgi(3 * h), dgh(3 * h);
  for (std::size_t t = steps; t-- > 0;) {
    std::vector<double> dout = dtop[t];
    for (std::size_t l = config_.layers; l-- > 0;) {
      const auto& g = layout_.gru[l];
      const auto& c = trace.steps[t][l];
      std::vector<double> dh(h);
      for (std::size_t k = 0; k < h; ++k) dh[k] = dout[k] + carry[l][k];

      std::vector<double> dh_prev(h);
      for (std::size_t k = 0; k < h; ++k) {
        const double dn = dh[k] * (1.0 - c.z[k]);
        const double dz = dh[k] * (c.h_prev[k] - c.n[k]);
        dh_prev[k] = dh[k] * c.z[k];
        const double da_n = dn * (1.0 - c.n[k] * c.n[k]);
        const double dr = da_n * c.hn[k];
        dgi[k] = dr * c.r[k] * (1.0 - c.r[k]);
        dgi[h + k] = dz * c.z[k] * (1.0 - c.z[k]);
        dgi[2 * h + k] = da_n;
        dgh[k] = dgi[k];
        dgh[h + k] = dgi[h + k];
        dgh[2 * h + k] = da_n * c.r[k];
      }
      outer_add(gr + g.w_ih, 3 * h, g.input, dgi.data(), c.x.data());
      outer_add(gr + g.w_hh, 3 * h, h, dgh.data(), c.h_prev.data());
      for (std::size_t k = 0; k < 3 * h; ++k) {
        gr[g.b_ih + k] += dgi[k];
        gr[g.b_hh + k] += dgh[k];
      }
      matvec_t_add(th + g.w_hh, 3 * h, h, dgh.data(), dh_prev.data());
      carry[l] = std::move(dh_prev);

      std::vector<double> dx(g.input, 0.0);
      matvec_t_add(th + g.w_ih, 3 * h, g.input, dgi.data(), dx.data());
      dout = std::move(dx);
    }
    double* demb = gr + layout_.embedding + seq[t].index() * e;
    for (std::size_t k = 0; k < e; ++k) demb[k] += dout[k];
  }
  return grad;
}

void Policy::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  auto put_u64 = [&](std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); };
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof kVersion);
  put_u64(kVocabularySize);
  put_u64(config_.embed_dim);
  put_u64(config_.hidden_dim);
  put_u64(config_.layers);
  put_u64(config_.head_dims.size());
  for (std::size_t d : config_.head_dims) put_u64(d);
  put_u64(theta_.size());
  out.write(reinterpret_cast<const char*>(theta_.data()),
            static_cast<std::streamsize>(theta_.size() * sizeof(double)));
  if (!out) throw IoError("failed writing " + path.string());
}

Policy Policy::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const auto fail = [&](const std::string& what) {
    throw CheckpointError(path.string() + ": " + what);
  };
  auto get_u64 = [&]() {
    std::uint64_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) fail("truncated header");
    return v;
  };
  char magic[8];
  std::uint32_t version = 0;
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    fail("not a policy checkpoint");
  }
  if (!in.read(reinterpret_cast<char*>(&version), sizeof version) || version != kVersion) {
    fail("unsupported policy checkpoint version");
  }
  if (get_u64() != kVocabularySize) fail("vocabulary size mismatch");
  PolicyConfig cfg;
  cfg.embed_dim = get_u64();
  cfg.hidden_dim = get_u64();
  cfg.layers = get_u64();
  const std::uint64_t heads = get_u64();
  if (heads > 64) fail("implausible head depth");
  cfg.head_dims.clear();
  for (std::uint64_t i = 0; i < heads; ++i) cfg.head_dims.push_back(get_u64());
  Policy policy(cfg, 0);
  if (get_u64() != policy.theta_.size()) fail("parameter count mismatch");
  if (!in.read(reinterpret_cast<char*>(policy.theta_.data()),
               static_cast<std::streamsize>(policy.theta_.size() * sizeof(double)))) {
    fail("truncated parameters");
  }
  return policy;
}

// ------------------------------------------------------- risk-seeking update

std::vector<double> risk_gradient(const Policy& policy, const Trajectory& trajectory,
                                  const QuantileTracker& tracker) {
  if (trajectory.cumulative_reward() > tracker.q) {
    return std::vector<double>(policy.parameter_count(), 0.0);
  }
  std::vector<double> d = policy.log_prob_gradient(trajectory);
  for (double& v : d) v = -v;
  return d;
}

void apply_update(Policy& policy, std::span<const double> estimate, double lr) {
  auto theta = policy.parameters();
  if (estimate.size() != theta.size()) throw ArgumentError("gradient size mismatch");
  for (double v : estimate) {
    if (!std::isfinite(v)) throw NonFiniteGradient("gradient estimate has a non-finite entry");
  }
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += lr * estimate[i];
}

TrainStats train_epoch(Policy& policy, const ReplayBuffer& buffer, QuantileTracker& tracker,
                       double lr, UpdateMode mode) {
  TrainStats stats;
  if (buffer.empty()) {
    stats.final_q = tracker.q;
    return stats;
  }
  std::vector<double> batch;
  if (mode == UpdateMode::Batch) batch.assign(policy.parameter_count(), 0.0);
  std::size_t below = 0;
  for (const Trajectory& tau : buffer.trajectories()) {
    const double ret = tau.cumulative_reward();
    tracker.update(ret);
    if (ret <= tracker.q) ++below;
    const std::vector<double> d = risk_gradient(policy, tau, tracker);
    double sq = 0.0;
    for (double v : d) sq += v * v;
    stats.gradient_norms.push_back(std::sqrt(sq));
    if (mode == UpdateMode::PerTrajectory) {
      apply_update(policy, d, lr);
    } else {
      for (std::size_t i = 0; i < d.size(); ++i) batch[i] += d[i];
    }
  }
  if (mode == UpdateMode::Batch) {
    for (double& v : batch) v /= static_cast<double>(buffer.size());
    apply_update(policy, batch, lr);
  }
  stats.final_q = tracker.q;
  stats.fraction_below = static_cast<double>(below) / static_cast<double>(buffer.size());
  return stats;
}

CachedPolicyPrior::CachedPolicyPrior(const Policy& policy) : policy_(policy) {}

std::vector<double> CachedPolicyPrior::probabilities(const MdpState& state,
                                                     std::span<const Token> legal) const {
  if (legal.empty()) throw ArgumentError("empty action mask");
  if (legal.size() == 1) return {1.0};
  if (state.tokens.empty()) throw ArgumentError("policy needs a non-empty prefix");
  const Policy::Encoding& enc = encoding(state.tokens);
  return policy_.probabilities_from(enc, legal);
}

const Policy::Encoding& CachedPolicyPrior::encoding(const std::vector<Token>& prefix) const {
  std::vector<std::uint8_t> key(prefix.size());
  for (std::size_t i = 0; i < prefix.size(); ++i) key[i] = static_cast<std::uint8_t>(prefix[i].index());
  std::lock_guard<std::mutex> lock(mutex_);
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  // Find the longest cached prefix, then encode the rest token by token.
  std::size_t known = key.size();
  Policy::Encoding enc;
  while (known > 0) {
    auto it = cache_.find(std::vector<std::uint8_t>(key.begin(), key.begin() + static_cast<std::ptrdiff_t>(known)));
    if (it != cache_.end()) {
      enc = it->second;
      break;
    }
    --known;
  }
  if (known == 0) enc = policy_.initial_encoding();
  for (std::size_t i = known; i < key.size(); ++i) {
    policy_.advance(enc, prefix[i]);
    cache_.emplace(std::vector<std::uint8_t>(key.begin(), key.begin() + static_cast<std::ptrdiff_t>(i + 1)), enc);
  }
  return cache_.at(key);
}

}  // namespace riskminer
