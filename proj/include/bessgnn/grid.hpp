#pragma once

#include <complex>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace bessgnn {

using Matrix3c = Eigen::Matrix<std::complex<double>, 3, 3>;

enum class BusType { PQ = 0, PV = 1, Slack = 2 };

std::string to_string(BusType t);
BusType bus_type_from_string(const std::string& s);

struct Bus {
    int id = 0;
    std::string name;
    double V_rated = 0.4; // kV line-to-line (1.0 once per-unit)
    double V_max = 1.1;   // p.u.
    double V_min = 0.9;   // p.u.
    BusType bus_type = BusType::PQ;
};

/// Impedances in ohm/km and admittances in uS/km. After `to_per_unit` the
/// same fields hold p.u./km and micro-p.u./km respectively.
struct Line {
    std::string name;
    int from_bus = 0;
    int to_bus = 0;
    double length = 0.0; // km
    double r_ohm = 0.0;
    double x_ohm = 0.0;
    double g_us = 0.0;
    double b_us = 0.0;
    double c_par = 1.0;  // parallel circuits
    double df = 0.0;     // dielectric loss factor
    double R_a = 0.0, X_a = 0.0;
    double R_b = 0.0, X_b = 0.0;
    double R_c = 0.0, X_c = 0.0;
    double G_ab = 0.0, G_bc = 0.0, G_ca = 0.0; // inter-phase mutual terms
};

/// Per-phase demand, kW / kvar.
struct Load {
    std::string name;
    int bus = 0;
    double P_a = 0.0, Q_a = 0.0;
    double P_b = 0.0, Q_b = 0.0;
    double P_c = 0.0, Q_c = 0.0;
};

/// Per-phase rated output, kW. Reactive output is fixed at zero.
struct PvUnit {
    std::string name;
    int bus = 0;
    double P_a = 0.0, P_b = 0.0, P_c = 0.0;
};

struct Storage {
    std::string name;
    int bus = 0;
    double SoC = 0.5;      // fraction
    double E_max = 0.0;    // kWh
    double SoC_max = 1.0;
    double SoC_min = 0.0;
    double P_max_ch = 0.0; // kW
    double P_max_dis = 0.0;
    double Q_max_ch = 0.0; // kvar
    double Q_max_dis = 0.0;
    double C_rate = 1.0;   // 1/h
    double eta_ch = 0.95;
    double eta_dis = 0.95;

    /// min(rated power, C_rate * E_max) for discharge (kW).
    double discharge_limit() const;
    double charge_limit() const;
};

/// Per-phase exchange limits at the slack, kW / kvar.
struct ExtGrid {
    int bus = 0;
    double P_min = 0.0, P_max = 0.0;
    double Q_min = 0.0, Q_max = 0.0;
};

struct GridNetwork {
    std::string name;
    double base_kva = 1000.0;
    bool per_unit = false;
    double v_base_kv = 0.0; // set by to_per_unit
    std::vector<Bus> buses;
    std::vector<Line> lines;
    std::vector<Load> loads;
    std::vector<PvUnit> pvs;
    std::vector<Storage> storages;
    ExtGrid ext_grid;

    /// Position of bus `id` in `buses`; throws TopologyError if absent.
    std::size_t bus_index(int id) const;
    std::size_t slack_index() const;
};

struct Cigre18Options {
    /// Equal per-phase impedances and equal mutual terms on every line, and
    /// balanced loads/PV; used for symmetry tests.
    bool phase_symmetric = false;
};

/// The 18-bus CIGRE European LV residential feeder (R1..R18) with one
/// battery, five unbalanced loads, and five PV units split equally over phases.
GridNetwork build_cigre18(const Cigre18Options& opts = {});

/// Every violated invariant, as a human-readable message. Empty means valid.
std::vector<std::string> validate(const GridNetwork& net);

/// 3x3 series impedance of the whole line, in the line's unit system.
Matrix3c line_impedance_matrix(const Line& line);
/// Total shunt admittance of the line (diagonal), split into halves by the pi model.
Matrix3c line_shunt_admittance(const Line& line);

/// Expresses impedances, admittances, powers, and energies on base_kva and
/// the common bus voltage. Idempotent.
GridNetwork to_per_unit(const GridNetwork& net);
GridNetwork from_per_unit(const GridNetwork& net);

// Self-describing JSON document (sections buses/lines/loads/pvs/storages/ext_grid).
std::string network_to_text(const GridNetwork& net);
GridNetwork network_from_text(const std::string& text);
void save_network(const GridNetwork& net, const std::filesystem::path& path);
GridNetwork load_network(const std::filesystem::path& path);

} // namespace bessgnn
