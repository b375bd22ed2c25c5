#include "bessgnn/scenario.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "bessgnn/errors.hpp"
#include "bessgnn/random.hpp"

namespace bessgnn {

void PriceProfile::check() const {
    if (lambda.empty()) throw ParameterError("price profile: horizon must be at least one step");
    if (!(dt_h > 0.0) || !std::isfinite(dt_h)) throw ParameterError("price profile: dt must be positive");
    for (double l : lambda)
        if (!std::isfinite(l)) throw ParameterError("price profile: non-finite price");
}

double pv_shape(double hour) {
    if (hour <= 6.0 || hour >= 18.0) return 0.0;
    return std::max(0.0, std::sin(std::numbers::pi * (hour - 6.0) / 12.0));
}

double price_shape(double hour) {
    return 0.10 + 0.08 * std::exp(-(hour - 8.0) * (hour - 8.0) / 4.0) +
           0.15 * std::exp(-(hour - 19.0) * (hour - 19.0) / 4.5);
}

Scenario sample_scenario(const GridNetwork& net, std::uint64_t id, std::uint64_t seed, const SamplingOptions& o) {
    if (net.storages.empty()) throw PreconditionError("sample_scenario: network has no storage");
    if (o.steps == 0) throw ParameterError("sample_scenario: steps must be at least 1");
    Rng rng(derive_seed(seed, id));
    Scenario s;
    s.id = id;
    s.prices.dt_h = o.dt_h;
    const double price_level = rng.uniform(o.price_lo, o.price_hi);
    const auto& st = net.storages.front();
    s.soc0 = rng.uniform(st.SoC_min + o.soc_margin, st.SoC_max - o.soc_margin);
    s.load_scale.resize(o.steps);
    s.pv_scale.resize(o.steps);
    for (std::size_t t = 0; t < o.steps; ++t) {
        const double hour = std::fmod((static_cast<double>(t) + 0.5) * o.dt_h, 24.0);
        s.prices.lambda.push_back(price_shape(hour) * price_level);
        s.load_scale[t].resize(net.loads.size());
        for (auto& ph : s.load_scale[t])
            for (auto& x : ph) x = rng.uniform(o.load_lo, o.load_hi);
        s.pv_scale[t].resize(net.pvs.size());
        for (auto& x : s.pv_scale[t]) x = pv_shape(hour) * rng.uniform(0.0, o.cloud_hi);
    }
    return s;
}

std::vector<Scenario> sample_scenarios(const GridNetwork& net, std::size_t n, std::uint64_t seed,
                                       const SamplingOptions& opts, std::uint64_t first_id) {
    if (n == 0) throw ParameterError("sample_scenarios: count must be at least 1");
    std::vector<Scenario> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(sample_scenario(net, first_id + i, seed, opts));
    return out;
}

void check_scenario(const GridNetwork& net, const Scenario& scn) {
    scn.prices.check();
    const auto tag = "scenario " + std::to_string(scn.id) + ": ";
    if (scn.load_scale.size() != scn.steps() || scn.pv_scale.size() != scn.steps())
        throw ParameterError(tag + "profile length differs from price horizon");
    for (std::size_t t = 0; t < scn.steps(); ++t) {
        if (scn.load_scale[t].size() != net.loads.size() || scn.pv_scale[t].size() != net.pvs.size())
            throw ParameterError(tag + "per-step profile does not match the network");
        for (const auto& ph : scn.load_scale[t])
            for (double x : ph)
                if (!(x >= 0.0) || !std::isfinite(x)) throw ParameterError(tag + "negative load scaling");
        for (double x : scn.pv_scale[t])
            if (!(x >= 0.0) || !std::isfinite(x)) throw ParameterError(tag + "negative PV scaling");
    }
    if (net.storages.empty()) throw PreconditionError(tag + "network has no storage");
    const auto& st = net.storages.front();
    if (!(scn.soc0 >= st.SoC_min && scn.soc0 <= st.SoC_max)) throw ParameterError(tag + "initial SoC outside bounds");
}

GridNetwork step_network(const GridNetwork& net, const Scenario& scn, std::size_t t) {
    if (t >= scn.steps()) throw BoundsError("step_network: step " + std::to_string(t) + " past horizon");
    GridNetwork out = net;
    for (std::size_t k = 0; k < out.loads.size(); ++k) {
        auto& l = out.loads[k];
        const auto& f = scn.load_scale[t][k];
        l.P_a *= f[0], l.Q_a *= f[0];
        l.P_b *= f[1], l.Q_b *= f[1];
        l.P_c *= f[2], l.Q_c *= f[2];
    }
    for (std::size_t k = 0; k < out.pvs.size(); ++k) {
        auto& p = out.pvs[k];
        const double f = scn.pv_scale[t][k];
        p.P_a *= f, p.P_b *= f, p.P_c *= f;
    }
    return out;
}

std::vector<double> base_export_kw(const GridNetwork& net, const Scenario& scn) {
    if (net.per_unit) throw PreconditionError("base_export_kw: expects a network in physical units");
    std::vector<double> out(scn.steps(), 0.0);
    for (std::size_t t = 0; t < scn.steps(); ++t) {
        double e = 0.0;
        for (std::size_t k = 0; k < net.pvs.size(); ++k) {
            const auto& p = net.pvs[k];
            e += (p.P_a + p.P_b + p.P_c) * scn.pv_scale[t][k];
        }
        for (std::size_t k = 0; k < net.loads.size(); ++k) {
            const auto& l = net.loads[k];
            const auto& f = scn.load_scale[t][k];
            e -= l.P_a * f[0] + l.P_b * f[1] + l.P_c * f[2];
        }
        out[t] = e;
    }
    return out;
}

} // namespace bessgnn
