#include "privbcast/envelope.hpp"

#include <array>

namespace privbcast {

namespace {
constexpr std::array<const char*, kEnvelopeKindCount> kKindNames = {
    "DcShare", "DcAccumS", "DcAccumT", "TokenPass", "DiffusionSpread", "FinalSwitch", "Flood"};
}

std::string to_string(EnvelopeKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

std::optional<EnvelopeKind> envelope_kind_from_string(const std::string& name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (name == kKindNames[i]) return static_cast<EnvelopeKind>(i);
  }
  return std::nullopt;
}

int phase_of(EnvelopeKind kind) {
  switch (kind) {
    case EnvelopeKind::kDcShare:
    case EnvelopeKind::kDcAccumS:
    case EnvelopeKind::kDcAccumT:
      return 1;
    case EnvelopeKind::kTokenPass:
    case EnvelopeKind::kDiffusionSpread:
    case EnvelopeKind::kFinalSwitch:
      return 2;
    case EnvelopeKind::kFlood:
      return 3;
  }
  return 0;
}

}  // namespace privbcast
