#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "bessgnn/grid.hpp"

namespace bessgnn {

struct PriceProfile {
    std::vector<double> lambda; // currency per kWh, one per step
    double dt_h = 1.0;

    std::size_t horizon() const noexcept { return lambda.size(); }
    /// Throws ParameterError unless T >= 1, dt > 0, and prices are finite.
    void check() const;
};

struct Scenario {
    std::uint64_t id = 0;
    std::vector<std::vector<std::array<double, 3>>> load_scale; // [T][load][phase]
    std::vector<std::vector<double>> pv_scale;                  // [T][pv], fraction of rated output
    PriceProfile prices;
    double soc0 = 0.5;

    std::size_t steps() const noexcept { return prices.horizon(); }
};

struct SamplingOptions {
    std::size_t steps = 24;
    double dt_h = 1.0;
    double load_lo = 0.6, load_hi = 1.4;
    double cloud_hi = 1.2;
    double price_lo = 0.8, price_hi = 1.2;
    double soc_margin = 0.05;
};

/// Clear-sky PV shape at local hour h: half sine between 06:00 and 18:00.
double pv_shape(double hour);
/// Two-peak daily tariff (morning and evening), currency per kWh.
double price_shape(double hour);

/// Scenario `id` drawn from its own stream derived from (seed, id), so any
/// subset can be regenerated independently.
Scenario sample_scenario(const GridNetwork& net, std::uint64_t id, std::uint64_t seed, const SamplingOptions& opts = {});
std::vector<Scenario> sample_scenarios(const GridNetwork& net, std::size_t n, std::uint64_t seed,
                                       const SamplingOptions& opts = {}, std::uint64_t first_id = 0);

/// Throws ParameterError on shape mismatch, negative scaling, or SoC0 outside bounds.
void check_scenario(const GridNetwork& net, const Scenario& scn);

/// The network with loads and PV scaled to step t.
GridNetwork step_network(const GridNetwork& net, const Scenario& scn, std::size_t t);

/// Per step, total PV minus total load active power (kW) without the battery.
std::vector<double> base_export_kw(const GridNetwork& net, const Scenario& scn);

} // namespace bessgnn
