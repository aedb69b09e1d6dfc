#include "riskminer/rng.hpp"

#include <sstream>

#include "riskminer/errors.hpp"

namespace riskminer {

std::string Rng::serialize() const {
  std::ostringstream out;
  out << engine_;
  return out.str();
}

void Rng::deserialize(const std::string& state) {
  std::istringstream in(state);
  std::mt19937_64 engine;
  in >> engine;
  if (in.fail()) throw CheckpointError("malformed generator state");
  engine_ = engine;
}

}  // namespace riskminer
