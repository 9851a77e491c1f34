#include "privbcast/topology.hpp"

#include <algorithm>
#include <deque>
#include <unordered_set>

#include "privbcast/rng.hpp"

namespace privbcast {

std::string to_string(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::kRegular: return "regular";
    case TopologyKind::kErdosRenyi: return "erdos_renyi";
    case TopologyKind::kTree: return "tree";
    case TopologyKind::kLine: return "line";
  }
  return "unknown";
}

TopologyKind topology_kind_from_string(const std::string& name) {
  if (name == "regular") return TopologyKind::kRegular;
  if (name == "erdos_renyi") return TopologyKind::kErdosRenyi;
  if (name == "tree") return TopologyKind::kTree;
  if (name == "line") return TopologyKind::kLine;
  throw InfeasibleSpec("unknown topology kind '" + name + "'");
}

TopologySpec TopologySpec::regular(std::uint32_t n, std::uint32_t degree) {
  TopologySpec s;
  s.kind = TopologyKind::kRegular;
  s.n = n;
  s.degree = degree;
  return s;
}

TopologySpec TopologySpec::erdos_renyi(std::uint32_t n, double p) {
  TopologySpec s;
  s.kind = TopologyKind::kErdosRenyi;
  s.n = n;
  s.p = p;
  return s;
}

TopologySpec TopologySpec::tree(std::uint32_t degree, std::uint32_t depth) {
  TopologySpec s;
  s.kind = TopologyKind::kTree;
  s.degree = degree;
  s.depth = depth;
  s.n = static_cast<std::uint32_t>(tree_size(degree, depth));
  return s;
}

TopologySpec TopologySpec::line(std::uint32_t n) {
  TopologySpec s;
  s.kind = TopologyKind::kLine;
  s.n = n;
  return s;
}

Topology::Topology(std::uint32_t n, const std::vector<std::pair<NodeId, NodeId>>& edges,
                   TopologyKind kind)
    : adjacency_(n), kind_(kind) {
  for (auto [u, v] : edges) {
    if (u >= n || v >= n) throw InfeasibleSpec("edge endpoint out of range");
    if (u == v) throw InfeasibleSpec("self-loop on node " + std::to_string(u));
    adjacency_[u].push_back(v);
    adjacency_[v].push_back(u);
  }
  for (auto& adj : adjacency_) {
    std::sort(adj.begin(), adj.end());
    if (std::adjacent_find(adj.begin(), adj.end()) != adj.end()) {
      throw InfeasibleSpec("duplicate edge");
    }
  }
  edge_count_ = edges.size();
  if (n == 0) {
    connected_ = true;
  } else {
    auto dist = distances_from(0);
    connected_ = std::none_of(dist.begin(), dist.end(),
                              [](std::uint32_t d) { return d == kUnreachable; });
  }
}

bool Topology::adjacent(NodeId u, NodeId v) const {
  const auto& adj = adjacency_[u];
  return std::binary_search(adj.begin(), adj.end(), v);
}

double Topology::mean_degree() const {
  if (adjacency_.empty()) return 0.0;
  return 2.0 * static_cast<double>(edge_count_) / static_cast<double>(adjacency_.size());
}

std::vector<std::uint32_t> Topology::distances_from(NodeId source) const {
  std::vector<std::uint32_t> dist(adjacency_.size(), kUnreachable);
  std::vector<NodeId> queue;
  queue.reserve(adjacency_.size());
  dist[source] = 0;
  queue.push_back(source);
  for (std::size_t head = 0; head < queue.size(); ++head) {
    NodeId u = queue[head];
    for (NodeId v : adjacency_[u]) {
      if (dist[v] == kUnreachable) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

std::uint32_t Topology::diameter() const {
  if (diameter_) return *diameter_;
  std::uint32_t best = 0;
  for (NodeId s = 0; s < size(); ++s) {
    for (std::uint32_t d : distances_from(s)) {
      if (d != kUnreachable) best = std::max(best, d);
    }
  }
  diameter_ = best;
  return best;
}

std::uint64_t tree_size(std::uint32_t degree, std::uint32_t depth) {
  if (degree == 2) return 2ull * depth + 1;
  std::uint64_t total = 1;
  std::uint64_t level = degree;
  for (std::uint32_t i = 0; i < depth; ++i) {
    total += level;
    level *= (degree - 1);
  }
  return total;
}

namespace {

using EdgeList = std::vector<std::pair<NodeId, NodeId>>;

std::uint64_t edge_key(NodeId u, NodeId v) {
  if (u > v) std::swap(u, v);
  return (static_cast<std::uint64_t>(u) << 32) | v;
}

// One pass of the pairing model. Unpaired half-edges are matched two at a
// time; a pair that would form a loop or a multi-edge is redrawn. Returns
// nothing when the remaining half-edges admit no valid pair.
std::optional<EdgeList> try_pairing(std::uint32_t n, std::uint32_t d, Rng& rng) {
  std::vector<NodeId> stubs;
  stubs.reserve(static_cast<std::size_t>(n) * d);
  for (NodeId v = 0; v < n; ++v) {
    for (std::uint32_t i = 0; i < d; ++i) stubs.push_back(v);
  }
  std::unordered_set<std::uint64_t> present;
  present.reserve(stubs.size());
  EdgeList edges;
  edges.reserve(stubs.size() / 2);

  auto remove_stub = [&stubs](std::size_t i) {
    stubs[i] = stubs.back();
    stubs.pop_back();
  };

  std::size_t failures = 0;
  while (!stubs.empty()) {
    std::size_t i = rng.below(stubs.size());
    std::size_t j = rng.below(stubs.size() - 1);
    if (j >= i) ++j;
    NodeId u = stubs[i];
    NodeId v = stubs[j];
    if (u != v && !present.contains(edge_key(u, v))) {
      present.insert(edge_key(u, v));
      edges.emplace_back(std::min(u, v), std::max(u, v));
      // Remove the higher index first so the lower stays valid.
      remove_stub(std::max(i, j));
      remove_stub(std::min(i, j));
      failures = 0;
      continue;
    }
    if (++failures < 64 + 4 * stubs.size()) continue;
    bool any_valid = false;
    for (std::size_t a = 0; a < stubs.size() && !any_valid; ++a) {
      for (std::size_t b = a + 1; b < stubs.size(); ++b) {
        if (stubs[a] != stubs[b] && !present.contains(edge_key(stubs[a], stubs[b]))) {
          any_valid = true;
          break;
        }
      }
    }
    if (!any_valid) return std::nullopt;
    failures = 0;
  }
  return edges;
}

Topology make_regular(const TopologySpec& spec, Rng& rng) {
  const std::uint32_t n = spec.n;
  const std::uint32_t d = spec.degree;
  if ((static_cast<std::uint64_t>(n) * d) % 2 != 0) {
    throw InfeasibleSpec("regular graph needs n*d even (n=" + std::to_string(n) +
                         ", d=" + std::to_string(d) + ")");
  }
  if (d >= n) throw InfeasibleSpec("regular graph needs degree < n");
  if (d == 0 && n > 1) throw InfeasibleSpec("degree 0 graph on more than one node is disconnected");
  for (int attempt = 0; attempt < 1000; ++attempt) {
    auto edges = try_pairing(n, d, rng);
    if (!edges) continue;
    Topology topo(n, *edges, TopologyKind::kRegular);
    if (topo.connected()) return topo;
  }
  throw InfeasibleSpec("could not draw a connected simple regular graph");
}

Topology make_erdos_renyi(const TopologySpec& spec, Rng& rng) {
  if (spec.p <= 0.0 || spec.p > 1.0) throw InfeasibleSpec("erdos_renyi needs 0 < p <= 1");
  for (int attempt = 0; attempt < 100; ++attempt) {
    EdgeList edges;
    for (NodeId u = 0; u < spec.n; ++u) {
      for (NodeId v = u + 1; v < spec.n; ++v) {
        if (rng.bernoulli(spec.p)) edges.emplace_back(u, v);
      }
    }
    Topology topo(spec.n, edges, TopologyKind::kErdosRenyi);
    if (topo.connected()) return topo;
  }
  throw InfeasibleSpec("erdos_renyi: p too small for connectivity after 100 retries");
}

Topology make_tree(const TopologySpec& spec) {
  const std::uint32_t d = spec.degree;
  if (d < 2) throw InfeasibleSpec("tree degree must be >= 2");
  std::uint64_t count = tree_size(d, spec.depth);
  if (count > 50'000'000ull) throw InfeasibleSpec("tree too large");
  EdgeList edges;
  edges.reserve(count - 1);
  // Breadth-first numbering: root 0 has d children, every other internal
  // node has d - 1 children.
  std::vector<NodeId> frontier{0};
  NodeId next = 1;
  for (std::uint32_t level = 0; level < spec.depth; ++level) {
    std::vector<NodeId> children;
    for (NodeId parent : frontier) {
      std::uint32_t fanout = (parent == 0) ? d : d - 1;
      for (std::uint32_t c = 0; c < fanout; ++c) {
        edges.emplace_back(parent, next);
        children.push_back(next++);
      }
    }
    frontier = std::move(children);
  }
  return Topology(static_cast<std::uint32_t>(count), edges, TopologyKind::kTree);
}

Topology make_line(const TopologySpec& spec) {
  EdgeList edges;
  for (NodeId v = 1; v < spec.n; ++v) edges.emplace_back(v - 1, v);
  return Topology(spec.n, edges, TopologyKind::kLine);
}

}  // namespace

Topology generate_topology(const TopologySpec& spec, std::uint64_t seed) {
  Rng rng(seed, Stream::kTopology);
  switch (spec.kind) {
    case TopologyKind::kRegular: return make_regular(spec, rng);
    case TopologyKind::kErdosRenyi: return make_erdos_renyi(spec, rng);
    case TopologyKind::kTree: return make_tree(spec);
    case TopologyKind::kLine: return make_line(spec);
  }
  throw InfeasibleSpec("unknown topology kind");
}

}  // namespace privbcast
