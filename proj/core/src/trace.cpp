#include "privbcast/trace.hpp"

#include <cstdio>
#include <ostream>
#include <sstream>

namespace privbcast {

std::string format_message_id(MessageId id) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(id));
  return buf;
}

void Trace::write_ndjson(std::ostream& out) const {
  for (const auto& r : records_) {
    out << "{\"t\":" << r.time << ",\"kind\":\"" << to_string(r.kind) << "\",\"src\":" << r.src
        << ",\"dst\":" << r.dst << ",\"mid\":\"" << format_message_id(r.message_id)
        << "\",\"size\":" << r.size << "}\n";
  }
}

std::string Trace::to_ndjson() const {
  std::ostringstream out;
  write_ndjson(out);
  return out.str();
}

MessageCounts count_messages(const Trace& trace, std::optional<MessageId> message) {
  MessageCounts counts;
  for (const auto& r : trace.records()) {
    if (message && r.message_id != *message) continue;
    ++counts.per_kind[static_cast<std::size_t>(r.kind)];
    ++counts.per_phase[static_cast<std::size_t>(phase_of(r.kind))];
    ++counts.total;
    counts.bytes += r.size;
  }
  return counts;
}

}  // namespace privbcast
