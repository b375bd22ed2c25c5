#pragma once

#include <array>
#include <complex>
#include <vector>

#include <Eigen/Core>

#include "bessgnn/grid.hpp"

namespace bessgnn {

using PhaseVec = std::array<std::complex<double>, 3>;

/// Net complex power injection per bus (position in net.buses) and phase,
/// in p.u.; generation positive, demand negative. Entries at the slack are
/// outputs of the solve and are ignored.
struct InjectionSet {
    std::vector<PhaseVec> s;

    static InjectionSet zeros(std::size_t n_buses);
};

struct PFSolution {
    std::vector<PhaseVec> v;       // per bus, per phase complex voltage (p.u.)
    std::array<double, 3> p_ext{}; // import-positive external grid power (p.u.)
    std::array<double, 3> q_ext{};
    int iterations = 0;
    bool converged = false;
    double last_update = 0.0;      // max |dV| of the final sweep

    double magnitude(std::size_t bus, int phase) const;
    double angle_deg(std::size_t bus, int phase) const;
};

/// Precomputed radial structure and p.u. line matrices for repeated solves.
class SweepSolver {
public:
    /// Throws TopologyError for meshed or disconnected networks.
    explicit SweepSolver(const GridNetwork& net);

    /// Backward/forward sweep with constant-PQ injections. Non-convergence
    /// is reported through `converged`, not thrown.
    PFSolution solve(const InjectionSet& inj, double tol = 1e-9, int max_iter = 100) const;

    std::size_t n_buses() const noexcept { return parent_.size(); }
    std::size_t slack() const noexcept { return slack_; }

private:
    std::size_t slack_ = 0;
    std::vector<std::size_t> order_;        // BFS order from the slack
    std::vector<std::size_t> parent_;       // parent bus (slack: itself)
    std::vector<std::size_t> parent_line_;  // line joining bus to parent
    std::vector<Matrix3c> z_;               // per line, p.u.
    std::vector<PhaseVec> bus_shunt_;       // per bus, sum of adjacent half shunts (diagonal)
};

/// Loads (negative), PV (positive), and storage output from the network, in
/// p.u. `storage_kw[k]` is the three-phase discharge-positive power of
/// storage k, split evenly across phases; empty means idle.
InjectionSet network_injections(const GridNetwork& net, const std::vector<double>& storage_kw = {});

/// Slack voltages 1.0 at 0, -120, +120 degrees.
PhaseVec slack_voltage();

PFSolution solve(const GridNetwork& net, const InjectionSet& inj, double tol = 1e-9, int max_iter = 100);

/// Full 3n x 3n bus admittance matrix (p.u.), row/col index 3*bus + phase.
Eigen::MatrixXcd build_ybus(const GridNetwork& net);

/// max |S_specified - V o conj(Y V)| over non-slack bus phases. Built from
/// the Y-bus, independent of the sweep.
double residual(const GridNetwork& net, const InjectionSet& inj, const PFSolution& sol);

/// Per-phase P + jQ delivered by the external grid into the feeder,
/// recomputed from the voltages of the slack and its neighbours.
PhaseVec ext_grid_power(const GridNetwork& net, const PFSolution& sol);

struct EnergyBalance {
    std::complex<double> ext_grid;   // sum over phases
    std::complex<double> injections; // sum over non-slack buses and phases
    std::complex<double> losses;     // series I^2 Z plus shunt terms
    double mismatch() const { return std::abs(ext_grid + injections - losses); }
};

EnergyBalance energy_balance(const GridNetwork& net, const InjectionSet& inj, const PFSolution& sol);

} // namespace bessgnn
