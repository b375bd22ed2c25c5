#include "bessgnn/physics_loss.hpp"

#include <cstdio>

#include "bessgnn/errors.hpp"

namespace bessgnn {

using nn::Tensor;

namespace {

constexpr std::size_t kPCols[3] = {0, 2, 4};
constexpr std::size_t kQCols[3] = {1, 3, 5};

Tensor column_of(const Dense& d, std::size_t c, double scale = 1.0) {
    std::vector<double> v(d.rows);
    for (std::size_t r = 0; r < d.rows; ++r) v[r] = d.at(r, c) * scale;
    return Tensor({d.rows, 1}, std::move(v));
}

Tensor col(const Tensor& y, std::size_t c) {
    const std::size_t cols[1] = {c};
    return nn::select_cols(y, cols);
}

Tensor constant(const Dense& d) { return Tensor({d.rows, d.cols}, d.v); }

Tensor add_all(const std::array<Tensor, 3>& t) { return nn::add(nn::add(t[0], t[1]), t[2]); }

} // namespace

LossContext LossContext::from(const DatasetHeader& h) {
    LossContext c;
    c.base_kva = h.base_kva;
    c.dt_h = h.dt_h;
    c.eta_ch = h.eta_ch;
    c.eta_dis = h.eta_dis;
    return c;
}

PhysicsBounds physics_bounds(const HeteroGraph& g, const LossContext& ctx) {
    if (!(ctx.base_kva > 0.0)) throw ParameterError("physics_bounds: base_kva must be positive");
    const auto& st = g.features(NodeType::Storage);
    const auto& bus = g.features(NodeType::Bus);
    const auto& ext = g.features(NodeType::Ext);
    for (std::size_t r = 0; r < st.rows; ++r)
        if (!(st.at(r, feat::st_e_max) > 0.0))
            throw ParameterError("physics_bounds: storage row " + std::to_string(r) + " has E_max <= 0");
    PhysicsBounds b;
    b.soc0 = column_of(st, feat::st_soc);
    b.e_max = column_of(st, feat::st_e_max);
    b.soc_min = column_of(st, feat::st_soc_min);
    b.soc_max = column_of(st, feat::st_soc_max);
    b.c_rate = column_of(st, feat::st_c_rate);
    b.v_min = column_of(bus, feat::bus_v_min);
    b.v_max = column_of(bus, feat::bus_v_max);
    const double inv = 1.0 / ctx.base_kva;
    b.p_min = column_of(ext, feat::ext_p_min, inv);
    b.p_max = column_of(ext, feat::ext_p_max, inv);
    b.q_min = column_of(ext, feat::ext_q_min, inv);
    b.q_max = column_of(ext, feat::ext_q_max, inv);
    return b;
}

std::array<Tensor, kHeads> task_mse(const std::array<Tensor, kHeads>& pred, const std::array<Dense, kHeads>& targets) {
    std::array<Tensor, kHeads> out;
    for (std::size_t k = 0; k < kHeads; ++k) {
        const auto& t = targets[k];
        if (pred[k].shape() != nn::Shape{t.rows, t.cols})
            throw DimensionError("task_mse: " + to_string(static_cast<Head>(k)) + " prediction is " +
                                 nn::shape_str(pred[k].shape()) + ", target is " +
                                 nn::shape_str(nn::Shape{t.rows, t.cols}));
        out[k] = nn::mse(pred[k], constant(t));
    }
    return out;
}

BatteryPenalty soc_crate_penalty(const Tensor& y, const PhysicsBounds& b, const LossContext& ctx) {
    const std::size_t n = b.soc0.shape()[0];
    if (y.shape() != nn::Shape{n, kTargetDim})
        throw DimensionError("soc_crate_penalty: storage prediction is " + nn::shape_str(y.shape()));
    for (double e : b.e_max.data())
        if (!(e > 0.0)) throw ParameterError("soc_crate_penalty: E_max must be positive");

    // total active power over phases, kW, discharge positive
    const Tensor p = nn::scale(nn::row_sum(nn::select_cols(y, kPCols)), ctx.base_kva);
    Tensor delta; // stored energy change, kWh per hour
    if (ctx.lossless_soc) {
        delta = nn::scale(p, -1.0);
    } else {
        const Tensor ch = nn::relu(nn::scale(p, -1.0));
        const Tensor dis = nn::relu(p);
        delta = nn::sub(nn::scale(ch, ctx.eta_ch), nn::scale(dis, 1.0 / ctx.eta_dis));
    }
    std::vector<double> per_e(n), per_limit(n);
    for (std::size_t r = 0; r < n; ++r) {
        per_e[r] = ctx.dt_h / b.e_max.data()[r];
        per_limit[r] = 1.0 / (2.0 * b.c_rate.data()[r] * b.e_max.data()[r]);
    }
    const Tensor soc = nn::add(b.soc0, nn::mul_col(delta, Tensor({n, 1}, per_e)));
    const Tensor rate = nn::mul_col(p, Tensor({n, 1}, per_limit));
    BatteryPenalty out;
    out.soc = nn::interval_hinge_sq(soc, b.soc_min, b.soc_max, ctx.tol);
    out.crate = nn::interval_hinge_sq(rate, -0.5, 0.5, ctx.tol);
    return out;
}

std::array<Tensor, 3> voltage_penalty(const Tensor& y, const PhysicsBounds& b, const LossContext& ctx) {
    if (y.shape() != nn::Shape{b.v_min.shape()[0], kTargetDim})
        throw DimensionError("voltage_penalty: bus prediction is " + nn::shape_str(y.shape()));
    std::array<Tensor, 3> out;
    for (std::size_t ph = 0; ph < 3; ++ph)
        out[ph] = nn::interval_hinge_sq(col(y, 2 * ph), b.v_min, b.v_max, ctx.tol);
    return out;
}

ExtPenalty ext_penalty(const Tensor& y, const PhysicsBounds& b, const LossContext& ctx) {
    if (y.shape() != nn::Shape{b.p_min.shape()[0], kTargetDim})
        throw DimensionError("ext_penalty: ext prediction is " + nn::shape_str(y.shape()));
    ExtPenalty out;
    for (std::size_t ph = 0; ph < 3; ++ph) {
        out.p[ph] = nn::interval_hinge_sq(col(y, kPCols[ph]), b.p_min, b.p_max, ctx.tol);
        out.q[ph] = nn::interval_hinge_sq(col(y, kQCols[ph]), b.q_min, b.q_max, ctx.tol);
    }
    return out;
}

double LossBreakdown::pen_v_sum() const { return pen_v[0] + pen_v[1] + pen_v[2]; }
double LossBreakdown::pen_ext_sum() const {
    return (pen_p[0] + pen_q[0]) + (pen_p[1] + pen_q[1]) + (pen_p[2] + pen_q[2]);
}
double LossBreakdown::penalty_sum() const { return pen_soc + pen_crate + pen_v_sum() + pen_ext_sum(); }
double LossBreakdown::mse_sum() const { return mse_bus + mse_ext + mse_storage; }

namespace {

struct Penalties {
    BatteryPenalty bat;
    std::array<Tensor, 3> v;
    ExtPenalty ext;
    Tensor sum;
};

Penalties all_penalties(const std::array<Tensor, kHeads>& raw, const PhysicsBounds& b, const LossContext& ctx) {
    Penalties p;
    p.bat = soc_crate_penalty(raw[idx(Head::Storage)], b, ctx);
    p.v = voltage_penalty(raw[idx(Head::Bus)], b, ctx);
    p.ext = ext_penalty(raw[idx(Head::Ext)], b, ctx);
    std::array<Tensor, 3> ext_phase;
    for (std::size_t ph = 0; ph < 3; ++ph) ext_phase[ph] = nn::add(p.ext.p[ph], p.ext.q[ph]);
    p.sum = nn::add(nn::add(nn::add(p.bat.soc, p.bat.crate), add_all(p.v)), add_all(ext_phase));
    return p;
}

void fill(LossBreakdown& out, const Penalties& p) {
    out.pen_soc = p.bat.soc.item();
    out.pen_crate = p.bat.crate.item();
    for (std::size_t ph = 0; ph < 3; ++ph) {
        out.pen_v[ph] = p.v[ph].item();
        out.pen_p[ph] = p.ext.p[ph].item();
        out.pen_q[ph] = p.ext.q[ph].item();
    }
}

} // namespace

Loss total_loss(const ForwardOutput& out, const HeteroGraph& g, const PhysicsBounds& b, const LossContext& ctx,
                double lambda_phys) {
    if (!(lambda_phys >= 0.0)) throw ParameterError("total_loss: lambda_phys must be >= 0");
    if (!g.has_targets()) throw PreconditionError("total_loss: graph carries no targets");
    const auto mse = task_mse(out.normalized, g.y);
    const Tensor task = add_all(mse);
    const auto pen = all_penalties(out.raw, b, ctx);

    Loss loss;
    loss.total = nn::add(task, nn::scale(pen.sum, lambda_phys));
    auto& r = loss.parts;
    r.mse_bus = mse[idx(Head::Bus)].item();
    r.mse_ext = mse[idx(Head::Ext)].item();
    r.mse_storage = mse[idx(Head::Storage)].item();
    fill(r, pen);
    r.lambda_phys = lambda_phys;
    r.total = loss.total.item();
    return loss;
}

LossBreakdown violation_metrics(const std::array<Dense, kHeads>& raw_pred, const PhysicsBounds& b,
                                const LossContext& ctx) {
    std::array<Tensor, kHeads> raw;
    for (std::size_t k = 0; k < kHeads; ++k) raw[k] = constant(raw_pred[k]);
    LossBreakdown out;
    fill(out, all_penalties(raw, b, ctx));
    out.total = out.penalty_sum();
    return out;
}

std::string loss_csv_header() { return "epoch,arm,mse_bus,mse_ext,mse_storage,pen_soc,pen_crate,pen_v,pen_ext,total"; }

std::string loss_csv_row(std::size_t epoch, const std::string& arm, const LossBreakdown& b) {
    char buf[512];
    std::snprintf(buf, sizeof buf, "%zu,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", epoch, arm.c_str(),
                  b.mse_bus, b.mse_ext, b.mse_storage, b.pen_soc, b.pen_crate, b.pen_v_sum(), b.pen_ext_sum(),
                  b.total);
    return buf;
}

} // namespace bessgnn
