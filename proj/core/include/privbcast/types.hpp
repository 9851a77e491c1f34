#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace privbcast {

using NodeId = std::uint32_t;
using MessageId = std::uint64_t;
using Tick = std::uint64_t;
using Bytes = std::vector<std::uint8_t>;

inline constexpr NodeId kNoNode = 0xFFFFFFFFu;

// Base for every error this library reports by exception.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace privbcast
