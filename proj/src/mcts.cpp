#include "riskminer/mcts.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "riskminer/errors.hpp"
#include "riskminer/rng.hpp"

namespace riskminer {

std::vector<double> UniformPrior::probabilities(const MdpState&, std::span<const Token> legal) const {
  if (legal.empty()) return {};
  return std::vector<double>(legal.size(), 1.0 / static_cast<double>(legal.size()));
}

SearchTree::SearchTree() { nodes_.push_back(Node{}); }

std::size_t SearchTree::child(std::size_t parent, std::size_t edge) {
  if (nodes_[parent].edges[edge].child >= 0) {
    return static_cast<std::size_t>(nodes_[parent].edges[edge].child);
  }
  Node next;
  next.state = nodes_[parent].state;
  const Token action = nodes_[parent].edges[edge].action;
  next.state.tokens.push_back(action);
  next.state.done = action == Token::end();
  next.parent = static_cast<std::int32_t>(parent);
  nodes_.push_back(std::move(next));
  const auto index = nodes_.size() - 1;
  nodes_[parent].edges[edge].child = static_cast<std::int32_t>(index);
  return index;
}

void SearchTree::dump(std::ostream& out) const {
  struct Item {
    std::size_t node;
    std::size_t depth;
  };
  std::vector<Item> stack{{0, 0}};
  while (!stack.empty()) {
    const Item item = stack.back();
    stack.pop_back();
    const Node& n = nodes_[item.node];
    std::string prefix = to_rpn_string(n.state.tokens);
    for (const Edge& e : n.edges) {
      out << item.depth << '\t' << prefix << '\t' << e.action.name() << "\tN=" << e.visits
          << "\tP=" << e.prior << "\tQ=" << e.value << "\tR=" << e.reward << '\n';
    }
    for (auto it = n.edges.rbegin(); it != n.edges.rend(); ++it) {
      if (it->child >= 0) stack.push_back({static_cast<std::size_t>(it->child), item.depth + 1});
    }
  }
}

std::vector<PathStep> select(const SearchTree& tree, const MctsConfig& config) {
  std::vector<PathStep> path;
  std::size_t current = 0;
  while (true) {
    const Node& n = tree.node(current);
    if (!n.expanded || n.state.done || n.edges.empty()) break;
    double total_visits = 0.0;
    for (const Edge& e : n.edges) total_visits += e.visits;
    const double sqrt_total = std::sqrt(total_visits);

    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n.edges.size(); ++i) {
      const Edge& e = n.edges[i];
      const double score = e.value + config.c_puct * e.prior * sqrt_total / (1.0 + e.visits);
      // Edges are in vocabulary order, so keeping the earlier edge on a full
      // tie prefers the lower token index.
      if (score > best_score || (score == best_score && e.prior > n.edges[best].prior)) {
        best = i;
        best_score = score;
      }
    }
    path.push_back({current, best});
    const Edge& chosen = n.edges[best];
    if (chosen.child < 0 || chosen.action == Token::end()) break;
    current = static_cast<std::size_t>(chosen.child);
  }
  return path;
}

void expand(SearchTree& tree, std::size_t node_index, const ActionPrior& prior,
            std::span<const Token> legal) {
  Node& n = tree.node(node_index);
  if (n.expanded) throw ArgumentError("node already expanded");
  if (n.state.done) throw TerminalState("cannot expand a terminal node");
  std::vector<double> p = prior.probabilities(n.state, legal);
  if (p.size() != legal.size()) throw ArgumentError("prior size does not match the legal set");
  double total = 0.0;
  for (double v : p) total += std::max(v, 0.0);
  n.edges.clear();
  n.edges.reserve(legal.size());
  for (std::size_t i = 0; i < legal.size(); ++i) {
    Edge e;
    e.action = legal[i];
    e.prior = total > 0.0 ? std::max(p[i], 0.0) / total : 1.0 / static_cast<double>(legal.size());
    n.edges.push_back(e);
  }
  n.expanded = true;
}

RolloutResult rollout(const MdpState& state, const ActionPrior& prior, Env& env, Rng& rng) {
  RolloutResult result;
  MdpState current = state;
  while (!current.done) {
    const std::vector<Token> legal = env.actions(current);
    const std::vector<double> p = prior.probabilities(current, legal);
    const Token action = legal[rng.categorical(p)];
    Transition t = env.step(current, action);
    result.value += t.reward;
    current = t.next_state;
    result.tail.push_back(std::move(t));
  }
  return result;
}

void backpropagate(SearchTree& tree, std::span<const PathStep> path, std::span<const double> rewards,
                   double leaf_value, double discount) {
  if (rewards.size() != path.size()) throw ArgumentError("one reward per path edge required");
  double g = leaf_value;
  for (std::size_t k = path.size(); k-- > 0;) {
    // Return from edge k onwards: r_k + gamma * (return of the rest), with the
    // leaf value added undiscounted.
    g = rewards[k] + discount * (g - leaf_value) + leaf_value;
    Edge& e = tree.node(path[k].node).edges[path[k].edge];
    e.value = (e.visits * e.value + g) / (e.visits + 1.0);
    ++e.visits;
  }
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw ArgumentError("replay buffer capacity must be positive");
}

void ReplayBuffer::push(Trajectory trajectory) {
  if (items_.size() == capacity_) items_.pop_front();
  items_.push_back(std::move(trajectory));
}

Trajectory search_cycle(SearchTree& tree, const ActionPrior& prior, Env& env, ReplayBuffer& buffer,
                        Rng& rng, const MctsConfig& config) {
  if (!tree.root().expanded) {
    const auto legal = env.actions(tree.root().state);
    expand(tree, 0, prior, legal);
  }
  const std::vector<PathStep> path = select(tree, config);

  Trajectory trajectory;
  std::vector<double> rewards;
  MdpState state = tree.root().state;
  std::size_t leaf = 0;
  for (const PathStep& s : path) {
    const Token action = tree.node(s.node).edges[s.edge].action;
    Transition t = env.step(state, action);
    if (t.valid_body) tree.node(s.node).edges[s.edge].reward = t.reward;
    rewards.push_back(t.reward);
    state = t.next_state;
    trajectory.transitions.push_back(std::move(t));
    leaf = tree.child(s.node, s.edge);
  }

  double leaf_value = 0.0;
  if (!state.done) {
    const auto legal = env.actions(state);
    if (!tree.node(leaf).expanded) expand(tree, leaf, prior, legal);
    RolloutResult r = rollout(state, prior, env, rng);
    leaf_value = r.value;
    for (auto& t : r.tail) trajectory.transitions.push_back(std::move(t));
  }
  backpropagate(tree, path, rewards, leaf_value, config.discount);
  buffer.push(trajectory);
  return trajectory;
}

}  // namespace riskminer
