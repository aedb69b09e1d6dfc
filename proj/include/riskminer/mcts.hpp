#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <span>
#include <vector>

#include "riskminer/env.hpp"
#include "riskminer/token.hpp"

namespace riskminer {

class Rng;

/// Source of action priors: a distribution over `legal` (same order),
/// non-negative and summing to 1.
class ActionPrior {
 public:
  virtual ~ActionPrior() = default;
  virtual std::vector<double> probabilities(const MdpState& state,
                                            std::span<const Token> legal) const = 0;
};

/// Equal probability on every legal action.
class UniformPrior : public ActionPrior {
 public:
  std::vector<double> probabilities(const MdpState& state,
                                    std::span<const Token> legal) const override;
};

struct Edge {
  Token action;
  std::uint32_t visits = 0;  // N
  double prior = 0.0;        // P
  double value = 0.0;        // Q, running mean of backed-up returns
  double reward = 0.0;       // R, last intermediate reward seen on this edge
  std::int32_t child = -1;   // node index, -1 until first traversal
};

struct Node {
  MdpState state;
  std::int32_t parent = -1;
  bool expanded = false;
  std::vector<Edge> edges;  // in vocabulary order once expanded
};

/// Search tree rooted at [BEG]. Nodes live in a flat arena; node 0 is the root.
class SearchTree {
 public:
  SearchTree();

  Node& node(std::size_t i) { return nodes_[i]; }
  const Node& node(std::size_t i) const { return nodes_[i]; }
  Node& root() { return nodes_.front(); }
  const Node& root() const { return nodes_.front(); }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Node reached through `edge` of `parent`, created on first use.
  std::size_t child(std::size_t parent, std::size_t edge);

  /// One line per edge:
  ///   <depth>\t<rpn prefix>\t<action>\tN=<n>\tP=<p>\tQ=<q>\tR=<r>
  /// in depth-first order, children in vocabulary order.
  void dump(std::ostream& out) const;

 private:
  std::vector<Node> nodes_;
};

struct MctsConfig {
  double c_puct = 1.0;    // multiplier on the exploration term
  double discount = 1.0;  // gamma in the backed-up returns
};

struct PathStep {
  std::size_t node = 0;  // node the edge leaves from
  std::size_t edge = 0;  // index into node.edges
};

/// PUCT descent from the root: argmax Q + c * P * sqrt(sum_b N_b) / (1 + N).
/// Ties go to the higher prior, then the lower vocabulary index. Stops after
/// the first edge leading to an unexpanded node or to END. Requires an
/// expanded root.
std::vector<PathStep> select(const SearchTree& tree, const MctsConfig& config = {});

/// Expands `node_index` with edges for `legal`, priors from `prior`
/// renormalized over the legal set; N = Q = R = 0.
void expand(SearchTree& tree, std::size_t node_index, const ActionPrior& prior,
            std::span<const Token> legal);

struct RolloutResult {
  std::vector<Transition> tail;
  double value = 0.0;  // sum of rewards along the tail (intermediate + END)
};

/// Samples prior-weighted actions from `state` until the episode ends.
RolloutResult rollout(const MdpState& state, const ActionPrior& prior, Env& env, Rng& rng);

/// Backs up a path with per-edge rewards r_1..r_l and leaf value v. The edge
/// at depth k (1-based) receives the return from its own reward onwards,
///   G = sum_{i>=k} gamma^(i-k) r_i + v,
/// folded into Q as a running mean; N is incremented.
void backpropagate(SearchTree& tree, std::span<const PathStep> path,
                   std::span<const double> rewards, double leaf_value, double discount = 1.0);

/// Bounded FIFO of complete episodes.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Trajectory trajectory);
  void clear() { items_.clear(); }
  std::size_t size() const noexcept { return items_.size(); }
  bool empty() const noexcept { return items_.empty(); }
  std::size_t capacity() const noexcept { return capacity_; }
  const std::deque<Trajectory>& trajectories() const noexcept { return items_; }

 private:
  std::size_t capacity_;
  std::deque<Trajectory> items_;
};

/// One select / expand / rollout / backpropagate cycle. Steps the environment
/// along the selected path (refreshing each edge's stored R when its body is
/// a complete alpha), appends the full BEG..END episode to `buffer`, and
/// returns it.
Trajectory search_cycle(SearchTree& tree, const ActionPrior& prior, Env& env,
                        ReplayBuffer& buffer, Rng& rng, const MctsConfig& config = {});

}  // namespace riskminer
