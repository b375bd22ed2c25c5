#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "bessgnn/grid.hpp"
#include "bessgnn/powerflow.hpp"
#include "bessgnn/scenario.hpp"

namespace bessgnn {

struct DispatchSchedule {
    std::vector<double> power_kw; // per step, discharge positive
    std::vector<double> soc;      // T + 1 entries, soc[0] is the initial state
    std::vector<double> revenue;  // per step, price * (base export + P) * dt
    double objective = 0.0;

    std::size_t horizon() const noexcept { return power_kw.size(); }
};

/// `levels` points from SoC_min to SoC_max; the last point is SoC_max exactly.
std::vector<double> soc_grid(const Storage& st, int levels);

/// Dynamic program over the SoC grid. The first move goes from the (possibly
/// off-grid) soc0 to a grid point; later moves are grid-to-grid. A move is
/// allowed when its implied power respects the rated and C-rate limits.
/// Ties go to smaller |P| at the earliest differing step.
DispatchSchedule optimize_dispatch(const Storage& st, double soc0, const PriceProfile& prices,
                                   const std::vector<double>& base_export_kw, int levels = 201);
DispatchSchedule optimize_dispatch(const GridNetwork& net, const Scenario& scn, int levels = 201);

/// Exhaustive twin of optimize_dispatch over the same moves and tie rule.
/// Throws SizeError when levels^T exceeds 1e6.
DispatchSchedule enumerate_dispatch(const Storage& st, double soc0, const PriceProfile& prices,
                                    const std::vector<double>& base_export_kw, int levels);

struct SocTrace {
    std::vector<double> soc;                // T + 1 entries
    std::vector<std::size_t> out_of_bounds; // indices into soc that leave [SoC_min - tol, SoC_max + tol]
};

/// SoC recursion with charge/discharge efficiencies. Violations are flagged.
SocTrace soc_trajectory(const Storage& st, double soc0, const std::vector<double>& power_kw, double dt_h,
                        double tol = 0.0);

/// Largest excursion of the schedule outside SoC bounds, power limits, or
/// C-rate limits. Zero means fully feasible.
double schedule_violation(const Storage& st, const DispatchSchedule& sched);

/// One time step of a labeled scenario: the operating state fed to the
/// encoder and the solved targets.
struct StepState {
    std::uint64_t scenario_id = 0;
    std::size_t step = 0;
    double price = 0.0;
    double dt_h = 1.0;
    double soc_before = 0.0;
    double storage_kw = 0.0;                 // dispatched three-phase power, discharge positive
    std::vector<std::array<double, 3>> load_p; // kW per load per phase
    std::vector<std::array<double, 3>> load_q; // kvar
    std::vector<std::array<double, 3>> pv_p;   // kW per PV per phase
};

/// Per-phase targets in p.u., interleaved by phase: bus [|V|a, ang a, |V|b,
/// ang b, |V|c, ang c] (degrees), ext grid [Pa, Qa, Pb, Qb, Pc, Qc] (import
/// positive), storage [Pa, Qa, Pb, Qb, Pc, Qc] (discharge positive).
struct StepTargets {
    std::vector<std::array<double, 6>> bus;
    std::array<double, 6> ext{};
    std::array<double, 6> storage{};
};

struct LabeledStep {
    StepState state;
    StepTargets targets;
    InjectionSet injections;
    PFSolution pf;
};

struct LabeledScenario {
    std::uint64_t scenario_id = 0;
    bool accepted = false;
    std::string reason; // set when rejected
    std::vector<LabeledStep> steps;
};

/// Solves the power flow at every step of the schedule. Rejects the scenario
/// on non-convergence, bus voltage outside [V_min, V_max], or ext-grid power
/// outside its limits.
LabeledScenario label_scenario(const GridNetwork& net, const Scenario& scn, const DispatchSchedule& sched);

} // namespace bessgnn
