#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "bessgnn/errors.hpp"
#include "bessgnn/grid.hpp"
#include "bessgnn/random.hpp"

using namespace bessgnn;

namespace {

bool has_violation(const std::vector<std::string>& v, const std::string& needle) {
    return std::any_of(v.begin(), v.end(), [&](const auto& s) { return s.find(needle) != std::string::npos; });
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

} // namespace

TEST_CASE("cigre18 builder counts") {
    auto net = build_cigre18();
    CHECK(net.buses.size() == 18);
    CHECK(net.lines.size() == 17);
    CHECK(net.storages.size() == 1);
    CHECK(net.loads.size() == 5);
    CHECK(net.pvs.size() == 5);
    CHECK(validate(net).empty());
    CHECK(validate(build_cigre18({.phase_symmetric = true})).empty());
}

TEST_CASE("cigre18 loads are unbalanced") {
    auto net = build_cigre18();
    for (const auto& l : net.loads) {
        CHECK(l.P_a != l.P_b);
        CHECK(l.P_b != l.P_c);
    }
}

TEST_CASE("validate reports every violation") {
    auto net = build_cigre18();
    CHECK(validate(net).empty());

    auto two_slack = net;
    two_slack.buses[4].bus_type = BusType::Slack;
    CHECK(has_violation(validate(two_slack), "multiple slack"));

    auto dangling = net;
    dangling.lines[3].to_bus = 99;
    auto v = validate(dangling);
    CHECK(has_violation(v, "dangling reference"));
    CHECK(has_violation(v, "disconnected bus")); // the orphaned subtree is also reported

    auto many = net;
    many.buses[2].V_min = 1.2;
    many.storages[0].E_max = -1.0;
    many.ext_grid.P_min = 500.0;
    auto vm = validate(many);
    CHECK(vm.size() >= 3);
    CHECK(has_violation(vm, "V_min"));
    CHECK(has_violation(vm, "E_max"));
    CHECK(has_violation(vm, "P_min"));

    auto cyclic = net;
    Line extra = cyclic.lines[0];
    extra.from_bus = 18;
    extra.to_bus = 15;
    cyclic.lines.push_back(extra);
    CHECK(has_violation(validate(cyclic), "not radial"));
}

TEST_CASE("line impedance matrix") {
    auto net = build_cigre18();
    SUBCASE("zero mutual terms give a diagonal matrix") {
        Line l = net.lines[0];
        l.G_ab = l.G_bc = l.G_ca = 0.0;
        auto z = line_impedance_matrix(l);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                if (i != j) CHECK(z(i, j) == std::complex<double>(0.0, 0.0));
        CHECK(z(0, 0) == std::complex<double>(l.length * l.R_a, l.length * l.X_a));
        CHECK(z(2, 2) == std::complex<double>(l.length * l.R_c, l.length * l.X_c));
    }
    SUBCASE("phase-symmetric line is invariant under cyclic permutation") {
        auto sym = build_cigre18({.phase_symmetric = true});
        auto z = line_impedance_matrix(sym.lines[0]);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) CHECK(std::abs(z(i, j) - z((i + 1) % 3, (j + 1) % 3)) < 1e-18);
    }
    SUBCASE("random lines are exactly symmetric") {
        Rng rng(2024);
        for (int k = 0; k < 1000; ++k) {
            Line l;
            l.name = "rnd";
            l.length = rng.uniform(0.01, 2.0);
            l.R_a = rng.uniform(0.01, 1.0);
            l.R_b = rng.uniform(0.01, 1.0);
            l.R_c = rng.uniform(0.01, 1.0);
            l.X_a = rng.uniform(0.0, 1.0);
            l.X_b = rng.uniform(0.0, 1.0);
            l.X_c = rng.uniform(0.0, 1.0);
            l.G_ab = rng.uniform(0.0, 1e7);
            l.G_bc = rng.uniform(0.0, 1e7);
            l.G_ca = rng.uniform(0.0, 1e7);
            auto z = line_impedance_matrix(l);
            CHECK(z == z.transpose());
        }
    }
    SUBCASE("mutual coupling capped at 30% of the weakest self impedance") {
        Line l = net.lines[0];
        l.G_ab = 1.0; // 1/G would be huge
        auto z = line_impedance_matrix(l);
        const double min_self = std::min({std::abs(z(0, 0)), std::abs(z(1, 1)), std::abs(z(2, 2))});
        CHECK(std::abs(z(0, 1)) == doctest::Approx(0.3 * min_self).epsilon(1e-12));
    }
    SUBCASE("non-finite parameters are rejected") {
        Line l = net.lines[0];
        l.R_b = std::nan("");
        CHECK_THROWS_AS(line_impedance_matrix(l), ParameterError);
        Line zero = net.lines[0];
        zero.R_a = zero.X_a = 0.0;
        CHECK_THROWS_AS(line_impedance_matrix(zero), ParameterError);
    }
}

TEST_CASE("per-unit conversion") {
    auto net = build_cigre18();
    auto pu = to_per_unit(net);
    CHECK(pu.per_unit);
    CHECK(network_to_text(to_per_unit(pu)) == network_to_text(pu)); // idempotent

    GridNetwork tiny = net;
    tiny.loads[0].P_a = 100.0;
    CHECK(to_per_unit(tiny).loads[0].P_a == doctest::Approx(0.1).epsilon(1e-15));

    auto back = from_per_unit(pu);
    for (std::size_t i = 0; i < net.lines.size(); ++i) {
        CHECK(rel(back.lines[i].R_b, net.lines[i].R_b) < 1e-12);
        CHECK(rel(back.lines[i].G_ca, net.lines[i].G_ca) < 1e-12);
        CHECK(rel(back.lines[i].b_us, net.lines[i].b_us) < 1e-12);
    }
    for (std::size_t i = 0; i < net.loads.size(); ++i) CHECK(rel(back.loads[i].Q_c, net.loads[i].Q_c) < 1e-12);
    CHECK(rel(back.storages[0].E_max, net.storages[0].E_max) < 1e-12);
    CHECK(rel(back.ext_grid.P_max, net.ext_grid.P_max) < 1e-12);
    CHECK(back.buses[3].V_rated == net.buses[3].V_rated);

    // impedance in p.u. equals ohms over the base impedance
    const double z_base = 0.4 * 0.4 / 1.0;
    auto z_ohm = line_impedance_matrix(net.lines[5]);
    auto z_pu = line_impedance_matrix(pu.lines[5]);
    CHECK(std::abs(z_pu(0, 1) - z_ohm(0, 1) / z_base) < 1e-14);

    auto bad = net;
    bad.buses[0].V_rated = 0.0;
    CHECK_THROWS_AS(to_per_unit(bad), ParameterError);
}

TEST_CASE("network document round trip is lossless") {
    auto net = build_cigre18();
    net.loads[2].P_b = 1.0 / 3.0;
    auto text = network_to_text(net);
    auto back = network_from_text(text);
    CHECK(network_to_text(back) == text);
    CHECK(back.loads[2].P_b == net.loads[2].P_b);
    CHECK(back.lines[7].G_bc == net.lines[7].G_bc);

    auto tmp = std::filesystem::temp_directory_path() / "bessgnn_grid_rt.json";
    save_network(net, tmp);
    CHECK(network_to_text(load_network(tmp)) == text);
    std::filesystem::remove(tmp);

    CHECK_THROWS_AS(network_from_text("{not json"), FormatError);
    CHECK_THROWS_AS(network_from_text("{\"format\":\"bessgnn-network\",\"version\":1}"), FormatError);
}
