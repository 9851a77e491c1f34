#include "privbcast/simulator.hpp"

#include <string>

namespace privbcast {

void Simulator::send(Envelope envelope) {
  queue_.push(Event{now_ + options_.link_delay, next_sequence_++, std::move(envelope)});
}

void Simulator::schedule(Tick delay, Timer timer) {
  queue_.push(Event{now_ + delay, next_sequence_++, timer});
}

void Simulator::flush(Outbox&& out) {
  for (auto& e : out.envelopes) send(std::move(e));
  for (auto& [delay, timer] : out.timers) schedule(delay, timer);
  out.envelopes.clear();
  out.timers.clear();
}

void Simulator::step(EventHandler& handler) {
  // priority_queue::top is const; the event is copied out before popping.
  Event event = queue_.top();
  queue_.pop();
  now_ = event.time;
  if (++executed_ > options_.event_cap) {
    throw NonTermination("event cap of " + std::to_string(options_.event_cap) +
                         " exceeded at tick " + std::to_string(now_));
  }
  if (auto* env = std::get_if<Envelope>(&event.action)) {
    trace_.append(TraceRecord{now_, env->kind, env->src, env->dst, env->message_id, env->size()});
    handler.on_deliver(*env, *this);
  } else {
    handler.on_timer(std::get<Timer>(event.action), *this);
  }
}

void Simulator::run(EventHandler& handler) {
  while (!queue_.empty()) step(handler);
}

void Simulator::run_until(EventHandler& handler, Tick until) {
  while (!queue_.empty() && queue_.top().time <= until) step(handler);
}

}  // namespace privbcast
