#include "privbcast/flood.hpp"

namespace privbcast::flood {

void forward(const Topology& topology, NodeId node, NodeId except, MessageId message,
             std::uint32_t payload_size, Outbox& out) {
  for (NodeId v : topology.neighbors(node)) {
    if (v == except) continue;
    Envelope e;
    e.kind = EnvelopeKind::kFlood;
    e.message_id = message;
    e.src = node;
    e.dst = v;
    e.payload_size = payload_size;
    out.send(std::move(e));
  }
}

std::vector<Envelope> on_flood_receive(const Topology& topology, SeenSet& seen, NodeId node,
                                       MessageId message, NodeId from, std::uint32_t payload_size) {
  Outbox out;
  if (seen.mark(node)) forward(topology, node, from, message, payload_size, out);
  return std::move(out.envelopes);
}

double reach(const Trace& trace, const Topology& topology, std::optional<MessageId> message) {
  if (topology.size() == 0) return 0.0;
  std::vector<std::uint8_t> holds(topology.size(), 0);
  std::size_t count = 0;
  auto note = [&](NodeId v) {
    if (v < holds.size() && !holds[v]) {
      holds[v] = 1;
      ++count;
    }
  };
  for (const auto& r : trace.records()) {
    if (message && r.message_id != *message) continue;
    note(r.src);
    note(r.dst);
  }
  return static_cast<double>(count) / static_cast<double>(topology.size());
}

}  // namespace privbcast::flood
