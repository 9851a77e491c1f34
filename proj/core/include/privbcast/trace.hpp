#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "privbcast/envelope.hpp"
#include "privbcast/types.hpp"

namespace privbcast {

struct TraceRecord {
  Tick time = 0;  // delivery time
  EnvelopeKind kind = EnvelopeKind::kFlood;
  NodeId src = 0;
  NodeId dst = 0;
  MessageId message_id = 0;
  std::uint32_t size = 0;

  bool operator==(const TraceRecord&) const = default;
};

// Append-only record of delivered envelopes, in delivery order.
class Trace {
 public:
  void append(const TraceRecord& record) { records_.push_back(record); }
  const std::vector<TraceRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  // One JSON object per line:
  // {"t":1,"kind":"Flood","src":0,"dst":3,"mid":"000000000000002a","size":266}
  void write_ndjson(std::ostream& out) const;
  std::string to_ndjson() const;

  bool operator==(const Trace&) const = default;

 private:
  std::vector<TraceRecord> records_;
};

std::string format_message_id(MessageId id);

struct MessageCounts {
  std::array<std::uint64_t, kEnvelopeKindCount> per_kind{};
  std::array<std::uint64_t, 4> per_phase{};  // index 1..3
  std::uint64_t total = 0;
  std::uint64_t bytes = 0;

  std::uint64_t kind(EnvelopeKind k) const { return per_kind[static_cast<std::size_t>(k)]; }
  std::uint64_t phase(int p) const { return per_phase[static_cast<std::size_t>(p)]; }
};

// Per-kind and per-phase totals, optionally restricted to one message.
MessageCounts count_messages(const Trace& trace,
                             std::optional<MessageId> message = std::nullopt);

}  // namespace privbcast
