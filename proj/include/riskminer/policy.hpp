#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "riskminer/env.hpp"
#include "riskminer/mcts.hpp"
#include "riskminer/token.hpp"

namespace riskminer {

struct PolicyConfig {
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 64;
  std::size_t layers = 4;
  std::vector<std::size_t> head_dims{32, 32};

  friend bool operator==(const PolicyConfig&, const PolicyConfig&) = default;
};

/// Token-prefix policy: embedding -> stacked GRU -> tanh MLP head -> masked
/// softmax over the vocabulary. All parameters live in one flat vector.
class Policy : public ActionPrior {
 public:
  /// Named slice of the parameter vector.
  struct Block {
    std::string name;  // "embedding", "gru<l>.w_ih", ..., "head<j>.w", "out.b"
    std::size_t offset = 0;
    std::size_t size = 0;
  };

  explicit Policy(PolicyConfig config = {}, std::uint64_t seed = 0);

  /// Masked distribution over `legal` (same order), conditioned on the whole
  /// token sequence of `state` including BEG.
  std::vector<double> probabilities(const MdpState& state,
                                    std::span<const Token> legal) const override;

  /// Per-layer hidden state after encoding a token prefix.
  using Encoding = std::vector<std::vector<double>>;
  Encoding initial_encoding() const;
  /// Feeds one more token into `encoding`.
  void advance(Encoding& encoding, Token token) const;
  /// Same distribution as probabilities() for the prefix that produced `encoding`.
  std::vector<double> probabilities_from(const Encoding& encoding, std::span<const Token> legal) const;

  /// Unmasked logits for the prefix (one per vocabulary entry).
  std::vector<double> logits(std::span<const Token> prefix) const;

  /// sum_t log pi(a_t | s_{t-1}) using each transition's recorded mask.
  double log_prob(const Trajectory& trajectory) const;

  /// Gradient of log_prob with respect to the parameter vector. Masked-out
  /// logits receive no gradient.
  std::vector<double> log_prob_gradient(const Trajectory& trajectory) const;

  std::span<double> parameters() noexcept { return theta_; }
  std::span<const double> parameters() const noexcept { return theta_; }
  std::size_t parameter_count() const noexcept { return theta_.size(); }
  const std::vector<Block>& blocks() const noexcept { return blocks_; }
  const PolicyConfig& config() const noexcept { return config_; }

  /// Binary checkpoint: magic, version, architecture, raw little-endian doubles.
  void save(const std::filesystem::path& path) const;
  static Policy load(const std::filesystem::path& path);

  friend bool operator==(const Policy& a, const Policy& b) {
    return a.config_ == b.config_ && a.theta_ == b.theta_;
  }

 private:
  struct Layout {
    std::size_t embedding = 0;
    struct Gru {
      std::size_t w_ih, w_hh, b_ih, b_hh, input;
    };
    std::vector<Gru> gru;
    struct Dense {
      std::size_t w, b, in, out;
    };
    std::vector<Dense> head;  // hidden layers followed by the output layer
  };

  struct Trace;  // forward activations kept for backprop
  struct GruScratch {
    std::vector<double> gi, gh, r, z, n, h;
  };

  void gru_layer(std::size_t layer, const double* x, const double* h_prev, GruScratch& s) const;
  std::vector<double> embedding_of(Token token) const;

  void build_layout();
  Trace run(std::span<const Token> tokens, bool keep_all) const;
  std::vector<double> head_forward(std::span<const double> top, std::vector<std::vector<double>>* acts) const;

  PolicyConfig config_;
  Layout layout_;
  std::vector<Block> blocks_;
  std::vector<double> theta_;
};

/// Policy prior that remembers prefix encodings, so extending a prefix by one
/// token costs one recurrent step. Valid only while the policy's parameters
/// are unchanged; build a fresh one after every update.
class CachedPolicyPrior : public ActionPrior {
 public:
  explicit CachedPolicyPrior(const Policy& policy);
  std::vector<double> probabilities(const MdpState& state,
                                    std::span<const Token> legal) const override;

 private:
  const Policy::Encoding& encoding(const std::vector<Token>& prefix) const;

  const Policy& policy_;
  mutable std::mutex mutex_;
  mutable std::map<std::vector<std::uint8_t>, Policy::Encoding> cache_;
};

/// Tracks the level-`level` quantile of returns:
///   q <- q + beta * (level - 1{R <= q}).
struct QuantileTracker {
  double q = 0.0;
  double level = 0.85;
  double beta = 0.01;

  void update(double trajectory_return) {
    q += beta * (level - (trajectory_return <= q ? 1.0 : 0.0));
  }
};

/// -1{R <= q} * grad log Pi(trajectory); the zero vector when R > q.
std::vector<double> risk_gradient(const Policy& policy, const Trajectory& trajectory,
                                  const QuantileTracker& tracker);

/// theta <- theta + lr * estimate. Throws NonFiniteGradient on NaN/inf input.
void apply_update(Policy& policy, std::span<const double> estimate, double lr);

enum class UpdateMode {
  PerTrajectory,  // one ascent step per trajectory, in buffer order
  Batch,          // average the estimates over the buffer, one step
};

struct TrainStats {
  double final_q = 0.0;
  double fraction_below = 0.0;  // share of trajectories with R <= q at their update
  std::vector<double> gradient_norms;
};

/// One pass over the buffer: for each trajectory update the tracker with its
/// return, then take the risk-seeking gradient at the updated q.
TrainStats train_epoch(Policy& policy, const ReplayBuffer& buffer, QuantileTracker& tracker,
                       double lr, UpdateMode mode = UpdateMode::PerTrajectory);

}  // namespace riskminer
