#include "riskminer/env.hpp"

#include <algorithm>

#include "riskminer/errors.hpp"
#include "riskminer/metrics.hpp"
#include "riskminer/rng.hpp"

namespace riskminer {

std::span<const Token> MdpState::body() const noexcept {
  std::span<const Token> all(tokens);
  if (!all.empty() && all.front() == Token::beg()) all = all.subspan(1);
  if (!all.empty() && all.back() == Token::end()) all = all.first(all.size() - 1);
  return all;
}

double Trajectory::cumulative_reward() const noexcept {
  double total = 0.0;
  for (const auto& t : transitions) total += t.reward;
  return total;
}

std::vector<Token> Trajectory::actions() const {
  std::vector<Token> out;
  out.reserve(transitions.size());
  for (const auto& t : transitions) out.push_back(t.action);
  return out;
}

double dense_reward(double ic, std::span<const double> mut_ics, double lambda) {
  if (mut_ics.empty()) return ic;
  double sum = 0.0;
  for (double m : mut_ics) sum += m;
  return ic - lambda * (sum / static_cast<double>(mut_ics.size()));
}

AlphaMiningEnv::AlphaMiningEnv(AlphaPool& pool, Grammar grammar, EnvConfig config, Rng& rng)
    : pool_(pool), grammar_(std::move(grammar)), config_(config), rng_(rng) {
  if (config_.max_episode_len < 3) throw ArgumentError("episode length must allow BEG, one token and END");
}

std::vector<Token> AlphaMiningEnv::actions(const MdpState& state) const {
  if (state.done) throw TerminalState("no actions from a finished episode");
  const std::size_t used = state.step();
  const std::size_t budget = config_.max_episode_len > used + 1 ? config_.max_episode_len - used - 1 : 0;
  return grammar_.legal_next(state.body(), std::min(budget, kMaxExpressionLength));
}

const AlphaMiningEnv::Evaluated& AlphaMiningEnv::evaluated(const Expression& expr) {
  const std::string key = to_rpn_string(expr.tokens());
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  if (cache_.size() >= config_.cache_capacity) cache_.clear();

  const Panel& panel = *pool_.panel();
  Evaluated ev;
  ev.standardized = std::make_shared<const Matrix>(standardize(evaluate(expr, panel), panel.tradable_mask()));
  try {
    ev.ic = compute_ic(*ev.standardized, pool_.target(), pool_.train_range(), panel.tradable_mask()).ic;
    ev.usable = true;
  } catch (const EmptyOverlap&) {
    ev.ic = 0.0;
    ev.usable = false;
  }
  return cache_.emplace(key, std::move(ev)).first->second;
}

double AlphaMiningEnv::intermediate_reward(const Expression& expr) {
  const Evaluated& ev = evaluated(expr);
  if (!ev.usable) return 0.0;
  const auto mut = pool_.mut_ics(*ev.standardized);
  return dense_reward(ev.ic, mut, config_.lambda);
}

Transition AlphaMiningEnv::step(const MdpState& state, Token action) {
  Transition t;
  t.legal = actions(state);
  if (std::find(t.legal.begin(), t.legal.end(), action) == t.legal.end()) {
    throw IllegalAction("token '" + std::string(action.name()) + "' is not legal after '" +
                        to_rpn_string(state.tokens) + "'");
  }
  t.state = state;
  t.action = action;
  t.next_state = state;
  t.next_state.tokens.push_back(action);

  if (action == Token::end()) {
    t.next_state.done = true;
    const Expression expr = Expression::from_tokens({state.body().begin(), state.body().end()});
    const Evaluated& ev = evaluated(expr);
    if (!ev.usable) {
      t.rejected = true;
      t.reward = 0.0;
      return t;
    }
    const auto standardized = ev.standardized;  // `ev` may be invalidated by the pool update
    t.reward = pool_.add_alpha(expr, standardized, rng_).composite_ic;
    return t;
  }

  const auto stack = type_stack(t.next_state.body());
  if (stack && is_complete(*stack)) {
    t.valid_body = true;
    const Expression expr = Expression::from_tokens({t.next_state.body().begin(), t.next_state.body().end()});
    t.reward = intermediate_reward(expr);
  }
  return t;
}

}  // namespace riskminer
