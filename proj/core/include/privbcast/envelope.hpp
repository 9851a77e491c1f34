#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "privbcast/types.hpp"

namespace privbcast {

enum class EnvelopeKind : std::uint8_t {
  kDcShare = 0,
  kDcAccumS = 1,
  kDcAccumT = 2,
  kTokenPass = 3,
  kDiffusionSpread = 4,
  kFinalSwitch = 5,
  kFlood = 6,
};

inline constexpr int kEnvelopeKindCount = 7;

std::string to_string(EnvelopeKind kind);
std::optional<EnvelopeKind> envelope_kind_from_string(const std::string& name);

// Protocol phase (1 = DC-net, 2 = adaptive diffusion, 3 = flood) a kind
// belongs to. FinalSwitch closes phase 2 and is attributed to it.
int phase_of(EnvelopeKind kind);

// kind (1) + message id (8) + src (4) + dst (4), rounded down to the 16
// bytes charged per envelope for size accounting.
inline constexpr std::uint32_t kEnvelopeHeaderBytes = 16;
inline constexpr std::uint32_t kControlPayloadBytes = 16;

// Adaptive-diffusion control token. `timestep` is the even counter t of
// rounds since diffusion began, `hops` the number of passes so far.
struct VirtualSourceToken {
  MessageId message_id = 0;
  std::uint32_t timestep = 0;
  std::uint32_t hops = 0;
  NodeId from = kNoNode;
  std::uint32_t max_rounds = 0;
};

// A simulated wire message. Only DC envelopes carry real bytes; diffusion
// and flood envelopes reference the message by id and are charged its size.
struct Envelope {
  EnvelopeKind kind = EnvelopeKind::kFlood;
  MessageId message_id = 0;
  NodeId src = kNoNode;
  NodeId dst = kNoNode;
  std::uint32_t payload_size = 0;

  Bytes payload;                // DC share / accumulation bytes
  std::uint64_t round = 0;      // DC round id, or diffusion timestep of the request
  std::uint32_t channel = 0;    // DC group the round belongs to
  std::uint32_t budget = 0;     // diffusion: new levels still to create
  VirtualSourceToken token;     // TokenPass only

  std::uint32_t size() const { return kEnvelopeHeaderBytes + payload_size; }
};

}  // namespace privbcast
