#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "privbcast/rng.hpp"
#include "privbcast/types.hpp"

// One dining-cryptographers round as executed by every member of a group of
// size g = k + 1: each member talks to its k peers three times (shares,
// accumulated S, accumulated T), so a round costs 3 * k * (k + 1)
// point-to-point messages.
namespace privbcast::dcnet {

class OversizeMessage : public Error {
 public:
  using Error::Error;
};

class MissingShare : public Error {
 public:
  using Error::Error;
};

class ProtocolViolation : public Error {
 public:
  using Error::Error;
};

// CRC-32 (IEEE 802.3 polynomial, as in zlib).
std::uint32_t crc32(std::span<const std::uint8_t> data);

// Frame layout: 4-byte big-endian length, message, 4-byte CRC-32 over
// length and message, zero padding up to the fixed size.
inline constexpr std::size_t kFrameOverhead = 8;

struct Payload {
  Bytes bytes;            // framed, exactly the round size
  std::uint32_t crc = 0;  // checksum stored in the frame
  bool valid = false;     // stored checksum matches the content

  // Reads a frame from raw round output. A mismatching checksum or an
  // impossible length yields valid == false; nothing is thrown.
  static Payload parse(Bytes raw);

  // Unframed message. Precondition: valid.
  std::span<const std::uint8_t> message() const;
};

// Throws OversizeMessage when message.size() + kFrameOverhead > size.
Payload frame(std::span<const std::uint8_t> message, std::size_t size);

// The message if `raw` is a valid frame, nothing otherwise.
std::optional<Bytes> unframe(std::span<const std::uint8_t> raw);

// Base-round announcement: 4-byte big-endian length followed by its CRC-32.
inline constexpr std::size_t kAnnouncementSize = 8;
Bytes encode_announcement(std::uint32_t length);
std::optional<std::uint32_t> decode_announcement(std::span<const std::uint8_t> raw);

enum class RoundKind { kAnnouncement, kMessage };

bool is_valid_frame(RoundKind kind, std::span<const std::uint8_t> raw);

using ShareVector = std::vector<Bytes>;

// k shares of payload.size() bytes each. The first k - 1 are uniform random,
// the last one closes the XOR so that share_0 ^ ... ^ share_{k-1} == payload.
ShareVector split_shares(std::span<const std::uint8_t> payload, std::size_t k, Rng& rng);

void xor_into(std::span<std::uint8_t> acc, std::span<const std::uint8_t> value);
Bytes xor_all(const std::vector<Bytes>& values, std::size_t size);
bool all_zero(std::span<const std::uint8_t> data);

struct Accumulation {
  Bytes total;                      // XOR of every received value
  std::map<NodeId, Bytes> replies;  // per member: total with its own value removed
};

// Steps 4-5 (and 7-8, which have the same shape): XOR everything received
// and hand each member the total minus its own contribution.
Accumulation accumulate(const std::map<NodeId, Bytes>& received);

enum class Outcome { kSilence, kMessage, kCollision };

struct RecoveryOutcome {
  Outcome outcome = Outcome::kSilence;
  Bytes bytes;  // the recovered frame when outcome == kMessage

  // True when the recovered frame is the member's own input.
  bool own_delivered = false;
};

// T ^ S at member c equals M ^ m_c, with M the XOR of all inputs and m_c the
// member's own input. Adding m_c back gives M, which is then classified:
// all-zero is silence, a valid frame a message, anything else a collision.
// Every member therefore reaches the same verdict, and a sole sender sees
// its own frame delivered.
RecoveryOutcome recover(std::span<const std::uint8_t> t_total, std::span<const std::uint8_t> s_total,
                        std::span<const std::uint8_t> own_input, RoundKind kind);

// Truncated binary exponential backoff after `attempt` consecutive
// collisions (attempt >= 1). The delay is uniform in [1, 2] for the first
// retry and uniform in [2, 2^min(attempt, 6)] afterwards, so a repeated
// retry never lands on the immediately following round.
std::uint64_t backoff_delay(unsigned attempt, Rng& rng);
std::uint64_t schedule_backoff(std::uint64_t round_id, unsigned attempt, Rng& rng);

struct AnnouncementDecision {
  enum class Next { kBaseRound, kFollowUp, kBackoff };
  Next next = Next::kBaseRound;
  std::uint32_t follow_up_size = 0;
};

// Scheduling after a base round: a valid non-zero length opens exactly one
// follow-up round of that size; silence keeps base rounds going; a
// collision sends the contenders into backoff.
AnnouncementDecision announce_length(const RecoveryOutcome& announcement);

enum class RoundStep { kSharesOut, kSCollected, kTCollected, kDone };

struct Outgoing {
  NodeId to;
  Bytes value;
};

// Per-member state of one round.
class RoundState {
 public:
  RoundState(NodeId self, std::vector<NodeId> peers, std::uint64_t round_id, Bytes own_input,
             RoundKind kind);

  // Steps 1-2. Must be called once, first.
  std::vector<Outgoing> start(Rng& rng);

  // Step 3. When the last share arrives, returns the step-5 replies.
  std::vector<Outgoing> on_share(NodeId from, Bytes value);

  // Step 6. When the last accumulation arrives, returns the step-8 replies.
  std::vector<Outgoing> on_accum_s(NodeId from, Bytes value);

  // Step 8 receipt. The round is done once all have arrived.
  void on_accum_t(NodeId from, Bytes value);

  // Throws MissingShare naming the first absent member, if any.
  void check_deadline() const;

  RoundStep step() const { return step_; }
  std::uint64_t round_id() const { return round_id_; }
  NodeId self() const { return self_; }
  const Bytes& own_input() const { return own_input_; }
  std::size_t peer_count() const { return peers_.size(); }

  // Available once step() == kDone.
  const std::optional<RecoveryOutcome>& outcome() const { return outcome_; }

  const Bytes& s_total() const { return s_total_; }
  const Bytes& t_total() const { return t_total_; }

 private:
  void require_peer(NodeId from) const;
  void advance();

  NodeId self_;
  std::vector<NodeId> peers_;
  std::uint64_t round_id_;
  Bytes own_input_;
  RoundKind kind_;
  RoundStep step_ = RoundStep::kSharesOut;
  bool started_ = false;

  std::map<NodeId, Bytes> received_s_;
  std::map<NodeId, Bytes> received_t_;
  std::map<NodeId, Bytes> received_final_;
  Bytes s_total_;
  Bytes t_total_;
  std::vector<Outgoing> pending_s_replies_;
  std::vector<Outgoing> pending_t_replies_;
  std::optional<RecoveryOutcome> outcome_;
};

}  // namespace privbcast::dcnet
