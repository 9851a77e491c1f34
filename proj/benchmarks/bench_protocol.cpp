#include <benchmark/benchmark.h>

#include <map>

#include "privbcast/dcnet.hpp"
#include "privbcast/runner.hpp"

using namespace privbcast;

namespace {

// One DC round among g members, envelopes exchanged in memory.
void BM_DcRound(benchmark::State& state) {
  const auto g = static_cast<NodeId>(state.range(0));
  const std::size_t size = 256;
  Rng rng(1);
  Bytes message(size - dcnet::kFrameOverhead, 0x5a);
  for (auto _ : state) {
    std::map<NodeId, dcnet::RoundState> states;
    for (NodeId m = 0; m < g; ++m) {
      std::vector<NodeId> peers;
      for (NodeId p = 0; p < g; ++p) {
        if (p != m) peers.push_back(p);
      }
      Bytes input = m == 0 ? dcnet::frame(message, size).bytes : Bytes(size);
      states.emplace(m, dcnet::RoundState(m, peers, 0, std::move(input), dcnet::RoundKind::kMessage));
    }
    std::vector<std::pair<NodeId, dcnet::Outgoing>> shares, accum_s, accum_t;
    for (auto& [m, st] : states) {
      for (auto& o : st.start(rng)) shares.emplace_back(m, std::move(o));
    }
    for (auto& [from, o] : shares) {
      for (auto& r : states.at(o.to).on_share(from, o.value)) accum_s.emplace_back(o.to, std::move(r));
    }
    for (auto& [from, o] : accum_s) {
      for (auto& r : states.at(o.to).on_accum_s(from, o.value)) accum_t.emplace_back(o.to, std::move(r));
    }
    for (auto& [from, o] : accum_t) states.at(o.to).on_accum_t(from, o.value);
    benchmark::DoNotOptimize(states.at(1).outcome());
  }
  state.SetItemsProcessed(state.iterations() * 3 * (g - 1) * g);
}
BENCHMARK(BM_DcRound)->DenseRange(4, 10, 2);

void BM_TopologyRegular(benchmark::State& state) {
  const auto n = static_cast<std::uint32_t>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(generate_topology(TopologySpec::regular(n, 8), ++seed));
  }
}
BENCHMARK(BM_TopologyRegular)->Arg(1000)->Arg(10000);

void run_mode(benchmark::State& state, protocol::Mode mode, DiffusionDepth depth) {
  RunConfig cfg;
  cfg.topology = TopologySpec::regular(static_cast<std::uint32_t>(state.range(0)), 8);
  cfg.topology_seed = 1;
  cfg.mode = mode;
  cfg.d_max = depth;
  std::uint64_t seed = 0;
  std::uint64_t messages = 0;
  for (auto _ : state) {
    auto r = run(cfg, ++seed);
    messages += r.report.counts.total;
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(messages));
}

void BM_Flood(benchmark::State& state) {
  run_mode(state, protocol::Mode::kFloodOnly, DiffusionDepth::automatic());
}
BENCHMARK(BM_Flood)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_DiffusionToCoverage(benchmark::State& state) {
  run_mode(state, protocol::Mode::kDiffusionOnly, DiffusionDepth::coverage());
}
BENCHMARK(BM_DiffusionToCoverage)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_FullProtocol(benchmark::State& state) {
  run_mode(state, protocol::Mode::kFull, DiffusionDepth::automatic());
}
BENCHMARK(BM_FullProtocol)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
