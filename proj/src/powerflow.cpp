#include "bessgnn/powerflow.hpp"

#include <cmath>
#include <numbers>
#include <queue>

#include <Eigen/LU>

#include "bessgnn/errors.hpp"

namespace bessgnn {

using cd = std::complex<double>;

InjectionSet InjectionSet::zeros(std::size_t n_buses) {
    InjectionSet inj;
    inj.s.assign(n_buses, PhaseVec{});
    return inj;
}

double PFSolution::magnitude(std::size_t bus, int phase) const {
    return std::abs(v[bus][static_cast<std::size_t>(phase)]);
}

double PFSolution::angle_deg(std::size_t bus, int phase) const {
    return std::arg(v[bus][static_cast<std::size_t>(phase)]) * 180.0 / std::numbers::pi;
}

InjectionSet network_injections(const GridNetwork& net, const std::vector<double>& storage_kw) {
    if (!storage_kw.empty() && storage_kw.size() != net.storages.size()) {
        throw DimensionError("network_injections: " + std::to_string(storage_kw.size()) + " storage powers for " +
                             std::to_string(net.storages.size()) + " storages");
    }
    // power fields are kW unless the network is already per-unit
    const double scale = net.per_unit ? 1.0 : 1.0 / net.base_kva;
    auto inj = InjectionSet::zeros(net.buses.size());
    for (const auto& l : net.loads) {
        auto& s = inj.s[net.bus_index(l.bus)];
        s[0] -= cd(l.P_a, l.Q_a) * scale;
        s[1] -= cd(l.P_b, l.Q_b) * scale;
        s[2] -= cd(l.P_c, l.Q_c) * scale;
    }
    for (const auto& pv : net.pvs) {
        auto& s = inj.s[net.bus_index(pv.bus)];
        s[0] += pv.P_a * scale;
        s[1] += pv.P_b * scale;
        s[2] += pv.P_c * scale;
    }
    for (std::size_t k = 0; k < storage_kw.size(); ++k) {
        // storage_kw is always physical
        auto& s = inj.s[net.bus_index(net.storages[k].bus)];
        for (auto& x : s) x += storage_kw[k] / 3.0 / net.base_kva;
    }
    return inj;
}

PhaseVec slack_voltage() {
    const double a = 2.0 * std::numbers::pi / 3.0;
    return {cd(1.0, 0.0), std::polar(1.0, -a), std::polar(1.0, a)};
}

namespace {

struct Tree {
    std::size_t slack;
    std::vector<std::size_t> order, parent, parent_line;
};

Tree radial_tree(const GridNetwork& net) {
    const std::size_t n = net.buses.size();
    if (n == 0) throw TopologyError("power flow: network has no buses");
    if (net.lines.size() + 1 != n) {
        throw TopologyError("power flow: network is not radial (" + std::to_string(net.lines.size()) +
                            " lines, " + std::to_string(n) + " buses)");
    }
    Tree t;
    t.slack = net.slack_index();
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(n);
    for (std::size_t k = 0; k < net.lines.size(); ++k) {
        auto f = net.bus_index(net.lines[k].from_bus);
        auto to = net.bus_index(net.lines[k].to_bus);
        adj[f].emplace_back(to, k);
        adj[to].emplace_back(f, k);
    }
    constexpr auto none = static_cast<std::size_t>(-1);
    t.parent.assign(n, none);
    t.parent_line.assign(n, none);
    t.parent[t.slack] = t.slack;
    std::queue<std::size_t> q;
    q.push(t.slack);
    while (!q.empty()) {
        auto u = q.front();
        q.pop();
        t.order.push_back(u);
        for (auto [w, k] : adj[u]) {
            if (t.parent[w] == none) {
                t.parent[w] = u;
                t.parent_line[w] = k;
                q.push(w);
            }
        }
    }
    if (t.order.size() != n) throw TopologyError("power flow: network is disconnected");
    return t;
}

} // namespace

SweepSolver::SweepSolver(const GridNetwork& net_in) {
    const GridNetwork net = to_per_unit(net_in);
    auto tree = radial_tree(net);
    slack_ = tree.slack;
    order_ = std::move(tree.order);
    parent_ = std::move(tree.parent);
    parent_line_ = std::move(tree.parent_line);
    bus_shunt_.assign(net.buses.size(), PhaseVec{});
    for (const auto& line : net.lines) {
        z_.push_back(line_impedance_matrix(line));
        const Matrix3c ysh = line_shunt_admittance(line);
        for (auto bus : {net.bus_index(line.from_bus), net.bus_index(line.to_bus)})
            for (int p = 0; p < 3; ++p) bus_shunt_[bus][static_cast<std::size_t>(p)] += 0.5 * ysh(p, p);
    }
}

PFSolution SweepSolver::solve(const InjectionSet& inj, double tol, int max_iter) const {
    const std::size_t n = parent_.size();
    if (inj.s.size() != n) {
        throw DimensionError("power flow: injection set has " + std::to_string(inj.s.size()) + " buses, network has " +
                             std::to_string(n));
    }
    if (!(tol > 0.0)) throw PreconditionError("power flow: tolerance must be positive");

    PFSolution sol;
    sol.v.assign(n, slack_voltage());
    std::vector<PhaseVec> branch(n); // current from parent into the subtree of bus i
    std::vector<PhaseVec> next(n);

    for (int it = 1; it <= max_iter; ++it) {
        // backward sweep: accumulate drawn currents from the leaves
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t p = 0; p < 3; ++p) {
                cd draw = bus_shunt_[i][p] * sol.v[i][p];
                if (i != slack_) draw -= std::conj(inj.s[i][p] / sol.v[i][p]);
                branch[i][p] = draw;
            }
        }
        for (auto it_rev = order_.rbegin(); it_rev != order_.rend(); ++it_rev) {
            const std::size_t i = *it_rev;
            if (i == slack_) continue;
            for (std::size_t p = 0; p < 3; ++p) branch[parent_[i]][p] += branch[i][p];
        }
        // forward sweep: V_child = V_parent - Z I
        next[slack_] = slack_voltage();
        double change = 0.0;
        for (std::size_t i : order_) {
            if (i == slack_) continue;
            const Matrix3c& z = z_[parent_line_[i]];
            for (int p = 0; p < 3; ++p) {
                cd drop = 0.0;
                for (int q = 0; q < 3; ++q) drop += z(p, q) * branch[i][static_cast<std::size_t>(q)];
                next[i][static_cast<std::size_t>(p)] = next[parent_[i]][static_cast<std::size_t>(p)] - drop;
            }
            for (std::size_t p = 0; p < 3; ++p) change = std::max(change, std::abs(next[i][p] - sol.v[i][p]));
        }
        std::swap(sol.v, next);
        sol.iterations = it;
        sol.last_update = change;
        if (!std::isfinite(change)) break;
        if (change < tol) {
            sol.converged = true;
            break;
        }
    }

    for (std::size_t p = 0; p < 3; ++p) {
        // slack "branch" holds the total current leaving the slack, incl. its shunt
        const cd s = sol.v[slack_][p] * std::conj(branch[slack_][p]);
        sol.p_ext[p] = s.real();
        sol.q_ext[p] = s.imag();
    }
    return sol;
}

PFSolution solve(const GridNetwork& net, const InjectionSet& inj, double tol, int max_iter) {
    return SweepSolver(net).solve(inj, tol, max_iter);
}

Eigen::MatrixXcd build_ybus(const GridNetwork& net_in) {
    const GridNetwork net = to_per_unit(net_in);
    const auto n = static_cast<Eigen::Index>(net.buses.size());
    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(3 * n, 3 * n);
    for (const auto& line : net.lines) {
        const Matrix3c ys = line_impedance_matrix(line).inverse();
        const Matrix3c half = 0.5 * line_shunt_admittance(line);
        const auto f = static_cast<Eigen::Index>(3 * net.bus_index(line.from_bus));
        const auto t = static_cast<Eigen::Index>(3 * net.bus_index(line.to_bus));
        y.block<3, 3>(f, f) += ys + half;
        y.block<3, 3>(t, t) += ys + half;
        y.block<3, 3>(f, t) -= ys;
        y.block<3, 3>(t, f) -= ys;
    }
    return y;
}

namespace {

Eigen::VectorXcd stack(const std::vector<PhaseVec>& v) {
    Eigen::VectorXcd out(static_cast<Eigen::Index>(3 * v.size()));
    for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t p = 0; p < 3; ++p) out(static_cast<Eigen::Index>(3 * i + p)) = v[i][p];
    return out;
}

} // namespace

double residual(const GridNetwork& net, const InjectionSet& inj, const PFSolution& sol) {
    const Eigen::MatrixXcd y = build_ybus(net);
    const Eigen::VectorXcd v = stack(sol.v);
    const Eigen::VectorXcd i = y * v;
    const std::size_t slack = net.slack_index();
    double worst = 0.0;
    for (std::size_t b = 0; b < sol.v.size(); ++b) {
        if (b == slack) continue;
        for (std::size_t p = 0; p < 3; ++p) {
            const auto k = static_cast<Eigen::Index>(3 * b + p);
            const cd s_calc = v(k) * std::conj(i(k));
            worst = std::max(worst, std::abs(inj.s[b][p] - s_calc));
        }
    }
    return worst;
}

PhaseVec ext_grid_power(const GridNetwork& net_in, const PFSolution& sol) {
    const GridNetwork net = to_per_unit(net_in);
    const std::size_t slack = net.slack_index();
    PhaseVec current{};
    for (const auto& line : net.lines) {
        const auto f = net.bus_index(line.from_bus);
        const auto t = net.bus_index(line.to_bus);
        if (f != slack && t != slack) continue;
        const std::size_t other = f == slack ? t : f;
        const Matrix3c ys = line_impedance_matrix(line).inverse();
        const Matrix3c half = 0.5 * line_shunt_admittance(line);
        for (int p = 0; p < 3; ++p) {
            cd c = 0.0;
            for (int q = 0; q < 3; ++q) {
                const auto uq = static_cast<std::size_t>(q);
                c += ys(p, q) * (sol.v[slack][uq] - sol.v[other][uq]) + half(p, q) * sol.v[slack][uq];
            }
            current[static_cast<std::size_t>(p)] += c;
        }
    }
    PhaseVec s{};
    for (std::size_t p = 0; p < 3; ++p) s[p] = sol.v[slack][p] * std::conj(current[p]);
    return s;
}

EnergyBalance energy_balance(const GridNetwork& net_in, const InjectionSet& inj, const PFSolution& sol) {
    const GridNetwork net = to_per_unit(net_in);
    const std::size_t slack = net.slack_index();
    EnergyBalance eb{};
    for (auto s : ext_grid_power(net, sol)) eb.ext_grid += s;
    for (std::size_t b = 0; b < inj.s.size(); ++b) {
        if (b == slack) continue;
        for (auto s : inj.s[b]) eb.injections += s;
    }
    for (const auto& line : net.lines) {
        const auto f = net.bus_index(line.from_bus);
        const auto t = net.bus_index(line.to_bus);
        const Matrix3c z = line_impedance_matrix(line);
        const Matrix3c ys = z.inverse();
        const Matrix3c half = 0.5 * line_shunt_admittance(line);
        Eigen::Vector3cd vf, vt;
        for (int p = 0; p < 3; ++p) {
            vf(p) = sol.v[f][static_cast<std::size_t>(p)];
            vt(p) = sol.v[t][static_cast<std::size_t>(p)];
        }
        const Eigen::Vector3cd i_series = ys * (vf - vt);
        const Eigen::Vector3cd drop = z * i_series;
        const Eigen::Vector3cd i_f = half * vf;
        const Eigen::Vector3cd i_t = half * vt;
        for (int p = 0; p < 3; ++p) {
            eb.losses += drop(p) * std::conj(i_series(p));
            eb.losses += vf(p) * std::conj(i_f(p)) + vt(p) * std::conj(i_t(p));
        }
    }
    return eb;
}

} // namespace bessgnn
