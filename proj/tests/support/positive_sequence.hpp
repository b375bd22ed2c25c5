#pragma once

#include <complex>
#include <functional>
#include <vector>

#include "bessgnn/grid.hpp"
#include "bessgnn/powerflow.hpp"

namespace bessgnn::testing {

// Single-phase sweep on the positive-sequence network: Z1 = Zs - Zm, recursive
// over the tree. Valid only for phase-symmetric lines and balanced loads.
inline std::vector<std::complex<double>> positive_sequence_sweep(const GridNetwork& net_phys, const InjectionSet& inj) {
    const GridNetwork net = to_per_unit(net_phys);
    const std::size_t n = net.buses.size();
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(n);
    std::vector<std::complex<double>> z1(net.lines.size()), yhalf(net.lines.size());
    for (std::size_t k = 0; k < net.lines.size(); ++k) {
        const auto& l = net.lines[k];
        auto z = line_impedance_matrix(l);
        z1[k] = z(0, 0) - z(0, 1);
        yhalf[k] = 0.5 * line_shunt_admittance(l)(0, 0);
        adj[net.bus_index(l.from_bus)].emplace_back(net.bus_index(l.to_bus), k);
        adj[net.bus_index(l.to_bus)].emplace_back(net.bus_index(l.from_bus), k);
    }
    const std::size_t slack = net.slack_index();
    std::vector<std::complex<double>> v(n, std::complex<double>(1.0, 0.0));
    for (int it = 0; it < 500; ++it) {
        std::vector<std::complex<double>> nv(n);
        std::function<std::complex<double>(std::size_t, std::size_t)> current = [&](std::size_t u, std::size_t from) {
            std::complex<double> i = -std::conj(inj.s[u][0] / v[u]);
            for (auto [w, k] : adj[u]) {
                i += yhalf[k] * v[u];
                if (w != from) i += current(w, u);
            }
            return i;
        };
        std::function<void(std::size_t, std::size_t)> descend = [&](std::size_t u, std::size_t from) {
            for (auto [w, k] : adj[u]) {
                if (w == from) continue;
                nv[w] = nv[u] - z1[k] * current(w, u);
                descend(w, u);
            }
        };
        nv[slack] = 1.0;
        descend(slack, slack);
        double change = 0.0;
        for (std::size_t i = 0; i < n; ++i) change = std::max(change, std::abs(nv[i] - v[i]));
        v = nv;
        if (change < 1e-14) break;
    }
    return v;
}

} // namespace bessgnn::testing
