#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "privbcast/envelope.hpp"
#include "privbcast/simulator.hpp"
#include "privbcast/topology.hpp"
#include "privbcast/trace.hpp"

// Flood-and-prune: on first receipt forward to every neighbor except the
// sender, drop duplicates silently. Over a connected graph this costs
// exactly 2|E| - n + 1 messages.
namespace privbcast::flood {

class SeenSet {
 public:
  explicit SeenSet(std::uint32_t n = 0) : seen_(n, 0) {}

  // True on first insertion only.
  bool mark(NodeId node) {
    if (seen_[node]) return false;
    seen_[node] = 1;
    ++count_;
    return true;
  }
  bool contains(NodeId node) const { return seen_[node] != 0; }
  std::size_t count() const { return count_; }

 private:
  std::vector<std::uint8_t> seen_;
  std::size_t count_ = 0;
};

// Flood envelopes from `node` to all neighbors except `except` (kNoNode
// for none).
void forward(const Topology& topology, NodeId node, NodeId except, MessageId message,
             std::uint32_t payload_size, Outbox& out);

// Forwards on first receipt, returns nothing on repeats.
std::vector<Envelope> on_flood_receive(const Topology& topology, SeenSet& seen, NodeId node,
                                       MessageId message, NodeId from, std::uint32_t payload_size);

// Fraction of nodes that held the message: every src and dst of the
// message's records. Without a message id all records count.
double reach(const Trace& trace, const Topology& topology,
             std::optional<MessageId> message = std::nullopt);

// Closed form for a full flood over a connected graph.
inline std::uint64_t expected_flood_messages(const Topology& topology) {
  return 2 * topology.edge_count() - topology.size() + 1;
}

}  // namespace privbcast::flood
