#include "bessgnn/dispatch.hpp"

#include <cmath>
#include <limits>

#include "bessgnn/errors.hpp"

namespace bessgnn {

namespace {

void check_storage(const Storage& st) {
    if (!(st.E_max > 0.0)) throw ParameterError("storage " + st.name + ": E_max must be positive");
    if (!(st.SoC_min < st.SoC_max)) throw ParameterError("storage " + st.name + ": SoC_min must be below SoC_max");
    if (!(st.eta_ch > 0.0 && st.eta_ch <= 1.0 && st.eta_dis > 0.0 && st.eta_dis <= 1.0))
        throw ParameterError("storage " + st.name + ": efficiencies must lie in (0, 1]");
}

// Moves that land on a limit up to rounding are snapped onto it, so emitted
// powers never exceed the limit.
bool within_limit(double& x, double limit) {
    if (x <= limit) return true;
    if (x <= limit * (1.0 + 1e-12)) {
        x = limit;
        return true;
    }
    return false;
}

// Power implied by moving from `from` to `to` in one step; false if a limit is exceeded.
bool move_power(const Storage& st, double from, double to, double dt, double& p) {
    const double d = to - from;
    if (d > 0.0) {
        double ch = d * st.E_max / (st.eta_ch * dt);
        if (!within_limit(ch, st.charge_limit())) return false;
        p = -ch;
    } else if (d < 0.0) {
        double dis = -d * st.E_max * st.eta_dis / dt;
        if (!within_limit(dis, st.discharge_limit())) return false;
        p = dis;
    } else {
        p = 0.0;
    }
    return true;
}

// Order used for tie-breaking: smaller |P| first, then charge before discharge.
bool key_less(double a, double b) {
    const double fa = std::abs(a), fb = std::abs(b);
    return fa < fb || (fa == fb && a < b);
}

struct Problem {
    const Storage& st;
    double soc0;
    const PriceProfile& prices;
    const std::vector<double>& base;
    std::vector<double> grid;

    double revenue(std::size_t t, double p) const { return prices.lambda[t] * (base[t] + p) * prices.dt_h; }
};

Problem make_problem(const Storage& st, double soc0, const PriceProfile& prices, const std::vector<double>& base,
                     int levels) {
    check_storage(st);
    prices.check();
    if (base.size() != prices.horizon()) {
        throw DimensionError("dispatch: base export has " + std::to_string(base.size()) + " steps, prices have " +
                             std::to_string(prices.horizon()));
    }
    if (!(soc0 >= st.SoC_min && soc0 <= st.SoC_max)) {
        throw PreconditionError("dispatch: initial SoC " + std::to_string(soc0) + " outside [" +
                                std::to_string(st.SoC_min) + ", " + std::to_string(st.SoC_max) + "]");
    }
    return Problem{st, soc0, prices, base, soc_grid(st, levels)};
}

DispatchSchedule finish(const Problem& pb, const std::vector<std::size_t>& path) {
    DispatchSchedule s;
    s.soc.push_back(pb.soc0);
    double prev = pb.soc0;
    for (std::size_t t = 0; t < path.size(); ++t) {
        double p = 0.0;
        move_power(pb.st, prev, pb.grid[path[t]], pb.prices.dt_h, p);
        s.power_kw.push_back(p);
        s.revenue.push_back(pb.revenue(t, p));
        prev = pb.grid[path[t]];
        s.soc.push_back(prev);
    }
    // right fold, matching both search orders
    double total = 0.0;
    for (std::size_t t = s.revenue.size(); t-- > 0;) total = s.revenue[t] + total;
    s.objective = total;
    return s;
}

} // namespace

std::vector<double> soc_grid(const Storage& st, int levels) {
    if (levels < 2) throw ParameterError("soc grid: at least 2 levels required, got " + std::to_string(levels));
    std::vector<double> g(static_cast<std::size_t>(levels));
    const double span = st.SoC_max - st.SoC_min;
    for (int j = 0; j < levels; ++j) g[static_cast<std::size_t>(j)] = st.SoC_min + span * j / (levels - 1);
    g.back() = st.SoC_max;
    return g;
}

DispatchSchedule optimize_dispatch(const Storage& st, double soc0, const PriceProfile& prices,
                                   const std::vector<double>& base_export_kw, int levels) {
    const Problem pb = make_problem(st, soc0, prices, base_export_kw, levels);
    const std::size_t T = prices.horizon();
    const std::size_t L = pb.grid.size();
    constexpr double ninf = -std::numeric_limits<double>::infinity();
    constexpr auto none = static_cast<std::size_t>(-1);

    // value[j]: best right-folded revenue from steps t..T-1 starting at grid j
    std::vector<double> value(L, 0.0), next_value(L);
    std::vector<std::vector<std::size_t>> choice(T, std::vector<std::size_t>(L, none));

    auto best_move = [&](std::size_t t, double from, const std::vector<double>& tail, std::size_t& arg) {
        double best = ninf, best_p = 0.0;
        arg = none;
        for (std::size_t k = 0; k < L; ++k) {
            if (tail[k] == ninf) continue;
            double p;
            if (!move_power(st, from, pb.grid[k], prices.dt_h, p)) continue;
            const double v = pb.revenue(t, p) + tail[k];
            if (v > best || (v == best && key_less(p, best_p))) {
                best = v;
                best_p = p;
                arg = k;
            }
        }
        return best;
    };

    for (std::size_t t = T; t-- > 1;) {
        for (std::size_t j = 0; j < L; ++j) next_value[j] = best_move(t, pb.grid[j], value, choice[t][j]);
        std::swap(value, next_value);
    }
    std::size_t first;
    best_move(0, soc0, value, first);
    if (first == none) throw GenerationError("dispatch: no feasible move from the initial SoC");

    std::vector<std::size_t> path{first};
    for (std::size_t t = 1; t < T; ++t) path.push_back(choice[t][path.back()]);
    return finish(pb, path);
}

DispatchSchedule optimize_dispatch(const GridNetwork& net, const Scenario& scn, int levels) {
    if (net.storages.size() != 1)
        throw PreconditionError("dispatch: expected exactly one storage, found " + std::to_string(net.storages.size()));
    check_scenario(net, scn);
    return optimize_dispatch(net.storages.front(), scn.soc0, scn.prices, base_export_kw(net, scn), levels);
}

DispatchSchedule enumerate_dispatch(const Storage& st, double soc0, const PriceProfile& prices,
                                    const std::vector<double>& base_export_kw, int levels) {
    const std::size_t T = prices.horizon();
    if (std::pow(static_cast<double>(levels), static_cast<double>(T)) > 1e6) {
        throw SizeError("enumerate_dispatch: " + std::to_string(levels) + "^" + std::to_string(T) +
                        " trajectories exceed the 1e6 budget");
    }
    const Problem pb = make_problem(st, soc0, prices, base_export_kw, levels);
    const std::size_t L = pb.grid.size();

    std::vector<std::size_t> path(T, 0), best_path;
    std::vector<double> p(T), best_p;
    double best = -std::numeric_limits<double>::infinity();

    auto lex_less = [](const std::vector<double>& a, const std::vector<double>& b) {
        for (std::size_t t = 0; t < a.size(); ++t) {
            if (key_less(a[t], b[t])) return true;
            if (key_less(b[t], a[t])) return false;
        }
        return false;
    };

    // odometer over all L^T grid paths
    while (true) {
        bool feasible = true;
        double prev = soc0;
        for (std::size_t t = 0; t < T && feasible; ++t) {
            feasible = move_power(st, prev, pb.grid[path[t]], prices.dt_h, p[t]);
            prev = pb.grid[path[t]];
        }
        if (feasible) {
            double total = 0.0;
            for (std::size_t t = T; t-- > 0;) total = pb.revenue(t, p[t]) + total;
            if (total > best || (total == best && lex_less(p, best_p))) {
                best = total;
                best_p = p;
                best_path = path;
            }
        }
        std::size_t d = 0;
        while (d < T && ++path[d] == L) path[d++] = 0;
        if (d == T) break;
    }
    if (best_path.empty()) throw GenerationError("enumerate_dispatch: no feasible trajectory");
    return finish(pb, best_path);
}

SocTrace soc_trajectory(const Storage& st, double soc0, const std::vector<double>& power_kw, double dt_h, double tol) {
    if (!(st.E_max > 0.0)) throw ParameterError("soc_trajectory: E_max must be positive");
    SocTrace tr;
    tr.soc.reserve(power_kw.size() + 1);
    tr.soc.push_back(soc0);
    for (double p : power_kw) {
        const double ch = std::max(0.0, -p), dis = std::max(0.0, p);
        tr.soc.push_back(tr.soc.back() + (st.eta_ch * ch - dis / st.eta_dis) * dt_h / st.E_max);
    }
    for (std::size_t i = 0; i < tr.soc.size(); ++i)
        if (tr.soc[i] < st.SoC_min - tol || tr.soc[i] > st.SoC_max + tol) tr.out_of_bounds.push_back(i);
    return tr;
}

double schedule_violation(const Storage& st, const DispatchSchedule& sched) {
    double worst = 0.0;
    for (double s : sched.soc) worst = std::max({worst, st.SoC_min - s, s - st.SoC_max});
    for (double p : sched.power_kw) worst = std::max({worst, p - st.discharge_limit(), -p - st.charge_limit()});
    return worst;
}

LabeledScenario label_scenario(const GridNetwork& net, const Scenario& scn, const DispatchSchedule& sched) {
    if (net.per_unit) throw PreconditionError("label_scenario: expects a network in physical units");
    if (net.storages.size() != 1)
        throw PreconditionError("label_scenario: expected exactly one storage, found " +
                                std::to_string(net.storages.size()));
    check_scenario(net, scn);
    if (sched.horizon() != scn.steps() || sched.soc.size() != scn.steps() + 1)
        throw DimensionError("label_scenario: schedule horizon does not match the scenario");
    const auto& st = net.storages.front();
    if (schedule_violation(st, sched) > 0.0) throw PreconditionError("label_scenario: schedule is infeasible");

    const SweepSolver solver(net);
    const auto& eg = net.ext_grid;
    LabeledScenario out;
    out.scenario_id = scn.id;
    auto reject = [&](std::size_t t, const std::string& why) {
        out.accepted = false;
        out.reason = "step " + std::to_string(t) + ": " + why;
        out.steps.clear();
        return out;
    };

    for (std::size_t t = 0; t < scn.steps(); ++t) {
        const GridNetwork step = step_network(net, scn, t);
        LabeledStep ls;
        ls.injections = network_injections(step, {sched.power_kw[t]});
        ls.pf = solver.solve(ls.injections);
        if (!ls.pf.converged) return reject(t, "power flow did not converge");

        ls.targets.bus.resize(net.buses.size());
        for (std::size_t b = 0; b < net.buses.size(); ++b) {
            for (int p = 0; p < 3; ++p) {
                const double m = ls.pf.magnitude(b, p);
                if (m < net.buses[b].V_min || m > net.buses[b].V_max)
                    return reject(t, "voltage " + std::to_string(m) + " at bus " + net.buses[b].name + " out of bounds");
                ls.targets.bus[b][2 * static_cast<std::size_t>(p)] = m;
                ls.targets.bus[b][2 * static_cast<std::size_t>(p) + 1] = ls.pf.angle_deg(b, p);
            }
        }
        const PhaseVec s_ext = ext_grid_power(net, ls.pf);
        for (std::size_t p = 0; p < 3; ++p) {
            const double pk = s_ext[p].real() * net.base_kva, qk = s_ext[p].imag() * net.base_kva;
            if (pk < eg.P_min || pk > eg.P_max || qk < eg.Q_min || qk > eg.Q_max)
                return reject(t, "ext-grid exchange outside limits");
            ls.targets.ext[2 * p] = s_ext[p].real();
            ls.targets.ext[2 * p + 1] = s_ext[p].imag();
            ls.targets.storage[2 * p] = sched.power_kw[t] / 3.0 / net.base_kva;
            ls.targets.storage[2 * p + 1] = 0.0;
        }

        auto& s = ls.state;
        s.scenario_id = scn.id;
        s.step = t;
        s.price = scn.prices.lambda[t];
        s.dt_h = scn.prices.dt_h;
        s.soc_before = sched.soc[t];
        s.storage_kw = sched.power_kw[t];
        for (const auto& l : step.loads) {
            s.load_p.push_back({l.P_a, l.P_b, l.P_c});
            s.load_q.push_back({l.Q_a, l.Q_b, l.Q_c});
        }
        for (const auto& pv : step.pvs) s.pv_p.push_back({pv.P_a, pv.P_b, pv.P_c});
        out.steps.push_back(std::move(ls));
    }
    out.accepted = true;
    return out;
}

} // namespace bessgnn
