#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "privbcast/types.hpp"

namespace privbcast {

enum class TopologyKind { kRegular, kErdosRenyi, kTree, kLine };

std::string to_string(TopologyKind kind);
TopologyKind topology_kind_from_string(const std::string& name);

struct TopologySpec {
  TopologyKind kind = TopologyKind::kRegular;
  std::uint32_t n = 1000;     // ignored for trees (derived from degree and depth)
  std::uint32_t degree = 8;   // regular and tree
  double p = 0.0;             // erdos_renyi
  std::uint32_t depth = 4;    // tree

  static TopologySpec regular(std::uint32_t n, std::uint32_t degree);
  static TopologySpec erdos_renyi(std::uint32_t n, double p);
  static TopologySpec tree(std::uint32_t degree, std::uint32_t depth);
  static TopologySpec line(std::uint32_t n);
};

class InfeasibleSpec : public Error {
 public:
  using Error::Error;
};

// Undirected simple graph with sorted adjacency lists.
class Topology {
 public:
  Topology() = default;
  Topology(std::uint32_t n, const std::vector<std::pair<NodeId, NodeId>>& edges,
           TopologyKind kind = TopologyKind::kRegular);

  std::uint32_t size() const { return static_cast<std::uint32_t>(adjacency_.size()); }
  std::size_t edge_count() const { return edge_count_; }
  TopologyKind kind() const { return kind_; }

  std::span<const NodeId> neighbors(NodeId v) const { return adjacency_[v]; }
  std::size_t degree(NodeId v) const { return adjacency_[v].size(); }
  bool adjacent(NodeId u, NodeId v) const;
  double mean_degree() const;

  // Hop distances from `source`; unreachable nodes get UINT32_MAX.
  std::vector<std::uint32_t> distances_from(NodeId source) const;

  bool connected() const { return connected_; }

  // Largest finite eccentricity. Computed on first use (all-pairs BFS).
  std::uint32_t diameter() const;

 private:
  std::vector<std::vector<NodeId>> adjacency_;
  std::size_t edge_count_ = 0;
  TopologyKind kind_ = TopologyKind::kRegular;
  bool connected_ = false;
  mutable std::optional<std::uint32_t> diameter_;
};

inline constexpr std::uint32_t kUnreachable = 0xFFFFFFFFu;

// Seeded, reproducible generation. Regular graphs use the pairing model with
// incremental pair rejection and full restarts until simple and connected;
// Erdos-Renyi graphs are redrawn until connected (at most 100 attempts).
Topology generate_topology(const TopologySpec& spec, std::uint64_t seed);

// Node count of tree(degree, depth): 1 + d * ((d-1)^depth - 1) / (d - 2), or
// 2*depth + 1 for d = 2.
std::uint64_t tree_size(std::uint32_t degree, std::uint32_t depth);

}  // namespace privbcast
