#pragma once

#include <array>
#include <string>

#include "bessgnn/hetero_graph.hpp"
#include "bessgnn/hgnn.hpp"
#include "bessgnn/tensor.hpp"

namespace bessgnn {

/// Constants the penalties need beyond the graph itself.
struct LossContext {
    double base_kva = 1.0;
    double dt_h = 1.0;
    double eta_ch = 1.0;
    double eta_dis = 1.0;
    bool lossless_soc = false; // SoC_t = SoC_{t-1} - P dt / E, ignoring efficiencies
    double tol = 1e-9;         // excursions up to tol count as zero

    static LossContext from(const DatasetHeader& h);
};

/// Per-row bounds pulled from an un-normalized graph, as constant tensors.
struct PhysicsBounds {
    nn::Tensor soc0, e_max, soc_min, soc_max, c_rate; // [n_storage x 1]
    nn::Tensor v_min, v_max;                          // [n_bus x 1]
    nn::Tensor p_min, p_max, q_min, q_max;            // [n_ext x 1], p.u. per phase
};

/// Throws ParameterError when a storage row has E_max <= 0.
PhysicsBounds physics_bounds(const HeteroGraph& raw_graph, const LossContext& ctx);

/// Mean squared error per head.
std::array<nn::Tensor, kHeads> task_mse(const std::array<nn::Tensor, kHeads>& pred,
                                        const std::array<Dense, kHeads>& targets);

struct BatteryPenalty {
    nn::Tensor soc, crate;
};
/// Predicted SoC after the step and the total active power against
/// +-C_rate E_max. The C-rate excursion is measured in units of 2 C_rate E_max.
BatteryPenalty soc_crate_penalty(const nn::Tensor& y_storage_raw, const PhysicsBounds& b, const LossContext& ctx);

/// Interval penalty on predicted magnitudes of phase a, b, c (angles are free).
std::array<nn::Tensor, 3> voltage_penalty(const nn::Tensor& y_bus_raw, const PhysicsBounds& b, const LossContext& ctx);

struct ExtPenalty {
    std::array<nn::Tensor, 3> p, q;
};
ExtPenalty ext_penalty(const nn::Tensor& y_ext_raw, const PhysicsBounds& b, const LossContext& ctx);

struct LossBreakdown {
    double mse_bus = 0.0, mse_ext = 0.0, mse_storage = 0.0;
    double pen_soc = 0.0, pen_crate = 0.0;
    std::array<double, 3> pen_v{}, pen_p{}, pen_q{};
    double total = 0.0;
    double lambda_phys = 0.0;

    double pen_v_sum() const;
    double pen_ext_sum() const;
    double penalty_sum() const;
    double mse_sum() const;
    /// Battery violation reported in the ablation table: pen_soc + pen_crate.
    double battery_violation() const { return pen_soc + pen_crate; }
};

struct Loss {
    nn::Tensor total; // differentiable scalar
    LossBreakdown parts;
};

/// Multi-task MSE in normalized space plus lambda_phys times every penalty,
/// evaluated on the de-normalized predictions. `normalized` supplies the
/// targets; `bounds` comes from the matching raw graph.
/// Throws ParameterError for lambda_phys < 0.
Loss total_loss(const ForwardOutput& out, const HeteroGraph& normalized, const PhysicsBounds& bounds,
                const LossContext& ctx, double lambda_phys);

/// Penalties of fixed raw predictions, through the same code as training.
LossBreakdown violation_metrics(const std::array<Dense, kHeads>& raw_pred, const PhysicsBounds& bounds,
                                const LossContext& ctx);

std::string loss_csv_header();
std::string loss_csv_row(std::size_t epoch, const std::string& arm, const LossBreakdown& b);

} // namespace bessgnn
