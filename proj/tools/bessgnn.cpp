#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "bessgnn/dispatch.hpp"
#include "bessgnn/errors.hpp"
#include "bessgnn/harness.hpp"
#include "bessgnn/powerflow.hpp"
#include "bessgnn/random.hpp"

using namespace bessgnn;
namespace fs = std::filesystem;

namespace {

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> train, val, epochs, threads, hidden, layers, batch;
    std::optional<double> lambda, lr;
    std::string arch, network;
    bool full_scale = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("-c,--config", o.config, "JSON run config");
    cmd->add_option("--seed", o.seed, "master seed");
    cmd->add_flag("--full-scale", o.full_scale, "8000/2000 samples and 2000 epochs as the base config");
}

RunConfig resolve(const Overrides& o) {
    RunConfig c = o.full_scale ? RunConfig::full_scale() : RunConfig{};
    if (!o.config.empty()) {
        c = load_config(o.config);
        if (o.full_scale) throw UsageError("--full-scale and --config are exclusive");
    }
    if (o.seed) c.seed = *o.seed;
    if (!o.network.empty()) c.network = o.network;
    if (o.train) c.train_samples = *o.train;
    if (o.val) c.val_samples = *o.val;
    if (o.epochs) c.epochs = *o.epochs;
    if (o.threads) c.threads = *o.threads;
    if (o.hidden) c.model.hidden = *o.hidden;
    if (o.layers) c.model.layers = *o.layers;
    if (o.batch) c.batch_size = *o.batch;
    if (o.lambda) c.lambda_phys = *o.lambda;
    if (o.lr) c.lr = *o.lr;
    if (!o.arch.empty()) {
        try {
            c.model.arch = arch_from_string(o.arch);
        } catch (const ParameterError& e) {
            throw UsageError(e.what());
        }
    }
    c.model.seed = c.seed;
    c.check();
    return c;
}

void selftest() {
    auto fail = [](const std::string& what) { throw InvariantError("selftest: " + what); };
    const auto net = build_cigre18();
    SweepSolver solver(net);
    Rng rng(1);
    for (int k = 0; k < 10; ++k) {
        auto scn = sample_scenario(net, static_cast<std::uint64_t>(k), 99);
        auto step = step_network(net, scn, rng.below(scn.steps()));
        auto inj = network_injections(step, {rng.uniform(-30, 30)});
        auto sol = solver.solve(inj);
        if (!sol.converged) fail("power flow did not converge");
        if (!(residual(net, inj, sol) < 1e-8)) fail("power-flow residual above 1e-8");
        if (!(std::abs(energy_balance(net, inj, sol).mismatch()) < 1e-9)) fail("energy balance above 1e-9");
    }
    std::cout << "power flow: ok\n";

    const auto& st = net.storages.front();
    for (int k = 0; k < 20; ++k) {
        PriceProfile prices;
        prices.lambda.resize(3);
        for (auto& l : prices.lambda) l = rng.uniform(0.0, 0.3);
        std::vector<double> base(3);
        for (auto& b : base) b = rng.uniform(-50, 50);
        const auto grid = soc_grid(st, 6);
        const double soc0 = grid[rng.below(grid.size())];
        const auto dp = optimize_dispatch(st, soc0, prices, base, 6);
        const auto en = enumerate_dispatch(st, soc0, prices, base, 6);
        if (dp.objective != en.objective) fail("dispatch DP differs from enumeration");
        if (schedule_violation(st, dp) != 0.0) fail("dispatch schedule violates limits");
    }
    std::cout << "dispatch: ok\n";

    RunConfig cfg;
    cfg.train_samples = 24;
    cfg.val_samples = 24;
    cfg.grid_levels = 41;
    const auto gen = generate_dataset(net, cfg);
    const auto m = evaluate_oracle(gen.dataset, Split::Val, LossContext::from(gen.dataset.header));
    if (m.mse_bus.max != 0.0 || m.mse_storage.max != 0.0 || m.viol_battery.max != 0.0)
        fail("oracle self-evaluation is not all zero");
    std::cout << "oracle labels: ok\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Battery dispatch on a three-phase feeder with heterogeneous GNNs"};
    app.require_subcommand(1);

    std::string out;

    auto* gen_grid = app.add_subcommand("gen-grid", "write the built-in CIGRE 18-bus feeder as JSON");
    gen_grid->add_option("-o,--out", out, "output path")->required();

    Overrides gd;
    std::string gd_out;
    auto* gen_ds = app.add_subcommand("gen-dataset", "sample scenarios, label them, write the dataset");
    add_common(gen_ds, gd);
    gen_ds->add_option("-o,--out", gd_out, "dataset path")->required();
    gen_ds->add_option("--network", gd.network, "grid JSON (default: built-in feeder)");
    gen_ds->add_option("--train", gd.train, "train samples");
    gen_ds->add_option("--val", gd.val, "validation samples");
    gen_ds->add_option("--threads", gd.threads, "worker threads");

    Overrides tr;
    std::string tr_ds, tr_out, arms = "both";
    auto* train_cmd = app.add_subcommand("train", "train one architecture, baseline and physics arms");
    add_common(train_cmd, tr);
    train_cmd->add_option("-d,--dataset", tr_ds, "dataset path")->required();
    train_cmd->add_option("-o,--out", tr_out, "run directory")->required();
    train_cmd->add_option("--arch", tr.arch, "gcn, sage or gat");
    train_cmd->add_option("--epochs", tr.epochs, "epochs");
    train_cmd->add_option("--lambda", tr.lambda, "physics weight of the physics arm");
    train_cmd->add_option("--lr", tr.lr, "Adam learning rate");
    train_cmd->add_option("--hidden", tr.hidden, "embedding width");
    train_cmd->add_option("--layers", tr.layers, "message-passing layers");
    train_cmd->add_option("--batch", tr.batch, "graphs per batch");
    train_cmd->add_option("--arms", arms, "both, baseline or physics")
        ->check(CLI::IsMember({"both", "baseline", "physics"}));

    std::string ev_ck, ev_ds, ev_out, split = "val";
    bool oracle = false;
    auto* eval_cmd = app.add_subcommand("evaluate", "raw-unit metrics of a checkpoint on a dataset split");
    eval_cmd->add_option("-m,--checkpoint", ev_ck, "checkpoint path");
    eval_cmd->add_option("-d,--dataset", ev_ds, "dataset path")->required();
    eval_cmd->add_option("-o,--out", ev_out, "metrics CSV path (table goes to stdout)");
    eval_cmd->add_option("--split", split, "train or val")->check(CLI::IsMember({"train", "val"}));
    eval_cmd->add_flag("--oracle", oracle, "score the stored labels instead of a model");

    std::string run_dir;
    auto* report_cmd = app.add_subcommand("report", "curves and markdown summary of a run directory");
    report_cmd->add_option("-r,--run", run_dir, "run directory")->required();

    auto* self_cmd = app.add_subcommand("selftest", "quick invariant checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*gen_grid) {
            save_network(build_cigre18(), out);
            std::cout << "wrote " << out << "\n";
        } else if (*gen_ds) {
            const auto cfg = resolve(gd);
            const auto res = generate_dataset(network_for(cfg), cfg);
            save_dataset(res.dataset, gd_out);
            std::ofstream rej(gd_out + ".rejected.csv");
            rej << "scenario_id,reason\n";
            for (const auto& r : res.rejected) rej << r.scenario_id << ",\"" << r.reason << "\"\n";
            std::cout << "wrote " << gd_out << ": " << res.dataset.count(Split::Train) << " train samples from "
                      << res.train_scenarios << " scenarios, " << res.dataset.count(Split::Val) << " val samples from "
                      << res.val_scenarios << " scenarios, " << res.rejected.size() << " rejected\n";
        } else if (*train_cmd) {
            const auto cfg = resolve(tr);
            const auto ds = load_dataset(tr_ds);
            fs::create_directories(tr_out);
            save_config(cfg, fs::path(tr_out) / "config.json");
            auto finish = [&](const ArmOutcome& a) {
                for (const auto& d : a.result.dead_params)
                    std::cerr << "warning: " << a.result.arm << " parameter " << d
                              << " received no gradient in epoch 1\n";
                std::cout << a.metrics.to_table();
            };
            if (arms == "both") {
                const auto res = run_ablation(ds, cfg, tr_out, &std::cerr);
                finish(res.baseline);
                finish(res.physics);
                std::cout << gain_table({{to_string(cfg.model.arch), res.baseline.metrics.viol_battery.mean,
                                          res.physics.metrics.viol_battery.mean}});
            } else {
                finish(run_arm(ds, cfg, tr_out, arms, arms == "baseline" ? 0.0 : cfg.lambda_phys, &std::cerr));
            }
        } else if (*eval_cmd) {
            if (oracle == !ev_ck.empty()) throw UsageError("evaluate: give exactly one of --checkpoint or --oracle");
            const auto ds = load_dataset(ev_ds);
            const Split s = split == "val" ? Split::Val : Split::Train;
            LossContext ctx = LossContext::from(ds.header);
            MetricsReport m;
            if (oracle) {
                m = evaluate_oracle(ds, s, ctx);
            } else {
                const auto ck = load_checkpoint(ev_ck);
                m = evaluate(ck.model, ds, s, ctx);
            }
            if (!ev_out.empty()) std::ofstream(ev_out) << m.to_csv();
            std::cout << m.to_table();
        } else if (*report_cmd) {
            const auto files = report(run_dir);
            std::cout << files.curves << " curves\n";
            for (const auto& p : files.written) std::cout << "wrote " << p.string() << "\n";
        } else if (*self_cmd) {
            selftest();
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
    return 0;
}
