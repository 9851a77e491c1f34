#pragma once

#include <cstdint>
#include <queue>
#include <utility>
#include <variant>
#include <vector>

#include "privbcast/envelope.hpp"
#include "privbcast/trace.hpp"
#include "privbcast/types.hpp"

namespace privbcast {

enum class TimerKind : std::uint8_t { kDcRound, kDiffusionRound, kOriginate };

struct Timer {
  TimerKind kind = TimerKind::kDcRound;
  NodeId node = kNoNode;
  MessageId message_id = 0;
  std::uint64_t value = 0;  // round index or group id, per kind
};

class NonTermination : public Error {
 public:
  using Error::Error;
};

struct SimOptions {
  Tick link_delay = 1;
  std::uint64_t event_cap = 10'000'000;
};

// Envelopes and timers produced by a handler, flushed into the simulator.
struct Outbox {
  std::vector<Envelope> envelopes;
  std::vector<std::pair<Tick, Timer>> timers;

  void send(Envelope e) { envelopes.push_back(std::move(e)); }
  void schedule(Tick delay, Timer t) { timers.emplace_back(delay, t); }
  bool empty() const { return envelopes.empty() && timers.empty(); }
};

class Simulator;

class EventHandler {
 public:
  virtual ~EventHandler() = default;
  virtual void on_deliver(const Envelope& envelope, Simulator& sim) = 0;
  virtual void on_timer(const Timer& timer, Simulator& sim) = 0;
};

// Discrete-event core: integer ticks, (time, sequence) ordering, every
// envelope delivered exactly link_delay ticks after it was sent. Sends
// between the same pair therefore never reorder.
class Simulator {
 public:
  explicit Simulator(SimOptions options = {}) : options_(options) {}

  Tick now() const { return now_; }
  const SimOptions& options() const { return options_; }

  void send(Envelope envelope);
  void schedule(Tick delay, Timer timer);
  void flush(Outbox&& out);

  // Drains the queue. Throws NonTermination once more than event_cap events
  // have executed.
  void run(EventHandler& handler);

  // Executes events with time <= until, then stops.
  void run_until(EventHandler& handler, Tick until);

  bool idle() const { return queue_.empty(); }
  std::uint64_t events_executed() const { return executed_; }

  const Trace& trace() const { return trace_; }
  Trace take_trace() { return std::move(trace_); }

 private:
  struct Event {
    Tick time;
    std::uint64_t sequence;
    std::variant<Envelope, Timer> action;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.sequence > b.sequence;
    }
  };

  void step(EventHandler& handler);

  SimOptions options_;
  Tick now_ = 0;
  std::uint64_t next_sequence_ = 0;
  std::uint64_t executed_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  Trace trace_;
};

}  // namespace privbcast
