#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "riskminer/grammar.hpp"
#include "riskminer/matrix.hpp"
#include "riskminer/pool.hpp"
#include "riskminer/token.hpp"

namespace riskminer {

class Rng;

/// Token sequence starting at BEG. step() counts every token including BEG,
/// so a fresh state has step 1 and the episode cap bounds step().
struct MdpState {
  std::vector<Token> tokens{Token::beg()};
  bool done = false;

  std::size_t step() const noexcept { return tokens.size(); }
  /// Tokens after BEG, excluding a trailing END.
  std::span<const Token> body() const noexcept;

  friend bool operator==(const MdpState&, const MdpState&) = default;
};

struct Transition {
  MdpState state;
  Token action;
  double reward = 0.0;
  MdpState next_state;
  std::vector<Token> legal;  // action mask at `state`, in vocabulary order
  bool valid_body = false;   // the body after a non-END action is a complete alpha
  bool rejected = false;     // END on an alpha with no usable cell; not pooled
};

struct Trajectory {
  std::vector<Transition> transitions;

  double cumulative_reward() const noexcept;
  std::vector<Token> actions() const;
};

/// Deterministic token MDP.
class Env {
 public:
  virtual ~Env() = default;
  /// Legal actions; throws TerminalState on a finished state.
  virtual std::vector<Token> actions(const MdpState& state) const = 0;
  /// Applies `action`; throws IllegalAction when it is not in actions(state).
  virtual Transition step(const MdpState& state, Token action) = 0;
};

/// IC - lambda * mean(mut_ics); the penalty is 0 when the pool is empty.
double dense_reward(double ic, std::span<const double> mut_ics, double lambda);

struct EnvConfig {
  double lambda = 0.1;
  std::size_t max_episode_len = 30;  // tokens, counting BEG and END
  std::size_t cache_capacity = 2048; // evaluated alphas kept between steps
};

/// The alpha-mining MDP. Non-END steps whose body is a complete alpha earn
/// the dense reward computed on the training window; END adds the alpha to
/// the pool and earns the composite IC after the pool update.
///
/// An END on an alpha without any usable training cell (for example a
/// cross-sectionally constant one) earns 0 and leaves the pool untouched.
class AlphaMiningEnv : public Env {
 public:
  AlphaMiningEnv(AlphaPool& pool, Grammar grammar, EnvConfig config, Rng& rng);

  std::vector<Token> actions(const MdpState& state) const override;
  Transition step(const MdpState& state, Token action) override;

  /// Dense reward of `expr` against the current pool.
  double intermediate_reward(const Expression& expr);

  const AlphaPool& pool() const noexcept { return pool_; }
  const Grammar& grammar() const noexcept { return grammar_; }
  const EnvConfig& config() const noexcept { return config_; }

 private:
  struct Evaluated {
    std::shared_ptr<const Matrix> standardized;
    double ic = 0.0;
    bool usable = false;
  };
  const Evaluated& evaluated(const Expression& expr);

  AlphaPool& pool_;
  Grammar grammar_;
  EnvConfig config_;
  Rng& rng_;
  std::unordered_map<std::string, Evaluated> cache_;
};

}  // namespace riskminer
