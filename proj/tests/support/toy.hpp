#pragma once

// Five-bus radial network and random graphs on it, for model-level tests.

#include "bessgnn/hetero_graph.hpp"
#include "bessgnn/random.hpp"

namespace bessgnn::testing {

inline GridNetwork toy5() {
    GridNetwork net = build_cigre18();
    net.name = "toy5";
    net.buses.resize(5);
    net.buses[0].bus_type = BusType::Slack;
    Line proto = net.lines[0];
    net.lines.clear();
    const int ends[4][2] = {{1, 2}, {2, 3}, {3, 4}, {2, 5}};
    for (int k = 0; k < 4; ++k) {
        Line l = proto;
        l.name = "t" + std::to_string(k);
        l.from_bus = ends[k][0];
        l.to_bus = ends[k][1];
        l.length = 0.02 * (k + 1);
        net.lines.push_back(l);
    }
    net.loads.resize(2);
    net.loads[0].bus = 3;
    net.loads[1].bus = 5;
    net.pvs.resize(1);
    net.pvs[0].bus = 5;
    net.storages[0].bus = 4;
    return net;
}

/// Graph on the toy network with random step state and targets, already in
/// z-score-like ranges so it can be fed to a model without fitting stats.
inline HeteroGraph random_toy_graph(std::uint64_t seed) {
    const auto net = toy5();
    Rng rng(seed);
    StepState s;
    s.soc_before = rng.uniform(0.2, 0.8);
    for (std::size_t k = 0; k < net.loads.size(); ++k) {
        s.load_p.push_back({rng.uniform(0, 20), rng.uniform(0, 20), rng.uniform(0, 20)});
        s.load_q.push_back({rng.uniform(0, 5), rng.uniform(0, 5), rng.uniform(0, 5)});
    }
    s.pv_p.push_back({rng.uniform(0, 4), rng.uniform(0, 4), rng.uniform(0, 4)});
    StepTargets t;
    t.bus.resize(net.buses.size());
    for (auto& row : t.bus)
        for (auto& x : row) x = rng.uniform(-1, 1);
    for (auto& x : t.ext) x = rng.uniform(-1, 1);
    for (auto& x : t.storage) x = rng.uniform(-1, 1);
    HeteroGraph g = encode(net, s, &t);
    // squash raw features into a unit range
    for (auto& block : g.x)
        for (auto& v : block.v) v = std::tanh(v / 10.0) + 0.1 * rng.uniform(-1, 1);
    return g;
}

} // namespace bessgnn::testing
