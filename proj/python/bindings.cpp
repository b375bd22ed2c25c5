#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>

#include "bessgnn/dispatch.hpp"
#include "bessgnn/errors.hpp"
#include "bessgnn/harness.hpp"
#include "bessgnn/powerflow.hpp"

namespace py = pybind11;
using namespace bessgnn;

namespace {

GridNetwork network_arg(const std::string& network_json) {
    return network_json.empty() ? build_cigre18() : network_from_text(network_json);
}

py::dict stat_dict(const Stat& s) {
    py::dict d;
    d["mean"] = s.mean;
    d["std"] = s.std;
    d["min"] = s.min;
    d["max"] = s.max;
    return d;
}

py::dict metrics_dict(const MetricsReport& m) {
    py::dict d;
    d["samples"] = m.samples;
    d["mse_bus"] = stat_dict(m.mse_bus);
    d["mse_ext"] = stat_dict(m.mse_ext);
    d["mse_storage"] = stat_dict(m.mse_storage);
    d["mse_vm"] = stat_dict(m.mse_vm);
    const char* ph[] = {"a", "b", "c"};
    for (int p = 0; p < 3; ++p) {
        d[py::str(std::string("mse_v_") + ph[p])] = stat_dict(m.mse_v[p]);
        d[py::str(std::string("mse_angle_") + ph[p])] = stat_dict(m.mse_angle[p]);
    }
    d["viol_soc"] = stat_dict(m.viol_soc);
    d["viol_crate"] = stat_dict(m.viol_crate);
    d["viol_battery"] = stat_dict(m.viol_battery);
    d["viol_v"] = stat_dict(m.viol_v);
    d["viol_ext"] = stat_dict(m.viol_ext);
    return d;
}

Split split_arg(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "val") return Split::Val;
    throw UsageError("split must be train or val, got " + s);
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Three-phase battery dispatch labels and heterogeneous GNN training.";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<UsageError>(m, "UsageError", base.ptr());
    py::register_exception<FormatError>(m, "FormatError", base.ptr());
    py::register_exception<SchemaError>(m, "SchemaError", base.ptr());
    py::register_exception<GenerationError>(m, "GenerationError", base.ptr());
    py::register_exception<TrainingError>(m, "TrainingError", base.ptr());

    m.def("cigre18_json", [](bool symmetric) { return network_to_text(build_cigre18({.phase_symmetric = symmetric})); },
          py::arg("phase_symmetric") = false, "The built-in 18-bus feeder as grid JSON.");

    m.def(
        "power_flow",
        [](const std::string& network_json, const std::vector<double>& storage_kw, double tol, int max_iter) {
            const auto net = network_arg(network_json);
            const auto inj = network_injections(net, storage_kw);
            const auto sol = solve(net, inj, tol, max_iter);
            const std::size_t n = net.buses.size();
            py::array_t<double> vm({n, std::size_t{3}}), va({n, std::size_t{3}});
            auto m_ = vm.mutable_unchecked<2>();
            auto a_ = va.mutable_unchecked<2>();
            for (std::size_t b = 0; b < n; ++b)
                for (int p = 0; p < 3; ++p) {
                    m_(b, p) = sol.magnitude(b, p);
                    a_(b, p) = sol.angle_deg(b, p);
                }
            py::dict d;
            d["vm"] = vm;
            d["va_deg"] = va;
            d["p_ext"] = sol.p_ext;
            d["q_ext"] = sol.q_ext;
            d["converged"] = sol.converged;
            d["iterations"] = sol.iterations;
            d["residual"] = residual(net, inj, sol);
            d["energy_mismatch"] = energy_balance(net, inj, sol).mismatch();
            return d;
        },
        py::arg("network_json") = "", py::arg("storage_kw") = std::vector<double>{}, py::arg("tol") = 1e-9,
        py::arg("max_iter") = 100,
        "Solves the unbalanced power flow. Voltages in p.u. and degrees, ext-grid power in p.u.");

    m.def(
        "optimize_dispatch",
        [](const std::vector<double>& prices, const std::vector<double>& base_export_kw, double soc0, int levels,
           const std::string& network_json, double dt_h, bool exhaustive) {
            const auto net = network_arg(network_json);
            if (net.storages.empty()) throw PreconditionError("optimize_dispatch: network has no storage");
            PriceProfile pr{prices, dt_h};
            const auto& st = net.storages.front();
            const auto s = exhaustive ? enumerate_dispatch(st, soc0, pr, base_export_kw, levels)
                                      : optimize_dispatch(st, soc0, pr, base_export_kw, levels);
            py::dict d;
            d["power_kw"] = s.power_kw;
            d["soc"] = s.soc;
            d["revenue"] = s.revenue;
            d["objective"] = s.objective;
            d["violation"] = schedule_violation(st, s);
            return d;
        },
        py::arg("prices"), py::arg("base_export_kw"), py::arg("soc0"), py::arg("levels") = 201,
        py::arg("network_json") = "", py::arg("dt_h") = 1.0, py::arg("exhaustive") = false,
        "Revenue-maximizing schedule of the network's first storage over the SoC grid.");

    m.def("default_config", [] { return config_to_json(RunConfig{}); }, "Default run config as JSON.");
    m.def("full_scale_config", [] { return config_to_json(RunConfig::full_scale()); });

    m.def(
        "generate_dataset",
        [](const std::string& config_json, const std::filesystem::path& out) {
            const auto cfg = config_from_json(config_json);
            GenerationResult res;
            {
                py::gil_scoped_release nogil;
                res = generate_dataset(network_for(cfg), cfg);
                save_dataset(res.dataset, out);
            }
            py::dict d;
            d["train"] = res.dataset.count(Split::Train);
            d["val"] = res.dataset.count(Split::Val);
            d["train_scenarios"] = res.train_scenarios;
            d["val_scenarios"] = res.val_scenarios;
            d["rejected"] = res.rejected.size();
            return d;
        },
        py::arg("config_json"), py::arg("out"), "Labels scenarios and writes the binary dataset to `out`.");

    m.def(
        "train",
        [](const std::filesystem::path& dataset, const std::string& config_json, const std::filesystem::path& out,
           const std::string& arms) {
            const auto cfg = config_from_json(config_json);
            if (arms != "both" && arms != "baseline" && arms != "physics")
                throw UsageError("arms must be both, baseline or physics, got " + arms);
            const auto ds = load_dataset(dataset);
            std::vector<std::pair<std::string, MetricsReport>> done;
            {
                py::gil_scoped_release nogil;
                if (arms == "both") {
                    const auto res = run_ablation(ds, cfg, out);
                    done = {{"baseline", res.baseline.metrics}, {"physics", res.physics.metrics}};
                } else {
                    done = {{arms, run_arm(ds, cfg, out, arms, arms == "baseline" ? 0.0 : cfg.lambda_phys).metrics}};
                }
            }
            py::dict d;
            for (const auto& [arm, metrics] : done) d[py::str(arm)] = metrics_dict(metrics);
            return d;
        },
        py::arg("dataset"), py::arg("config_json"), py::arg("out"), py::arg("arms") = "both",
        "Trains the configured architecture and writes logs, checkpoints and metrics under `out`/<arch>.");

    m.def(
        "evaluate",
        [](const std::filesystem::path& dataset, const std::optional<std::filesystem::path>& checkpoint,
           const std::string& split) {
            const auto ds = load_dataset(dataset);
            const auto ctx = LossContext::from(ds.header);
            const Split s = split_arg(split);
            if (!checkpoint) return metrics_dict(evaluate_oracle(ds, s, ctx));
            return metrics_dict(evaluate(load_checkpoint(*checkpoint).model, ds, s, ctx));
        },
        py::arg("dataset"), py::arg("checkpoint") = py::none(), py::arg("split") = "val",
        "Raw-unit metrics of a checkpoint; without a checkpoint the stored labels are scored.");

    m.def(
        "report",
        [](const std::filesystem::path& run) {
            const auto f = report(run);
            std::vector<std::string> paths;
            for (const auto& p : f.written) paths.push_back(p.string());
            return paths;
        },
        py::arg("run"), "Writes curves.csv, SVG curves and summary.md; returns the written paths.");

    m.def("gain_ratio", &gain_ratio, py::arg("without"), py::arg("with_physics"));
}
