#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "bessgnn/binio.hpp"
#include "bessgnn/errors.hpp"
#include "bessgnn/harness.hpp"
#include "bessgnn/powerflow.hpp"

using namespace bessgnn;
namespace fs = std::filesystem;

namespace {

RunConfig small_config(std::size_t train = 100, std::size_t val = 40) {
    RunConfig c;
    c.train_samples = train;
    c.val_samples = val;
    c.grid_levels = 41;
    c.model.hidden = 16;
    c.model.layers = 2;
    c.epochs = 5;
    c.batch_size = 16;
    return c;
}

const GenerationResult& small_dataset() {
    static const GenerationResult g = generate_dataset(build_cigre18(), small_config());
    return g;
}

fs::path fresh_dir(const std::string& name) {
    auto d = fs::temp_directory_path() / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

} // namespace

TEST_CASE("config round trip and validation") {
    RunConfig c = small_config();
    c.model.arch = Arch::SAGE;
    c.lambda_phys = 3.5;
    c.sampling.cloud_hi = 0.9;
    auto back = config_from_json(config_to_json(c));
    CHECK(config_to_json(back) == config_to_json(c));
    CHECK(back.model.arch == Arch::SAGE);
    CHECK(back.model.seed == back.seed);

    CHECK_THROWS_AS(config_from_json(R"({"epochz": 3})"), UsageError);
    CHECK_THROWS_AS(config_from_json(R"({"model": {"arch": "gps"}})"), UsageError);
    CHECK_THROWS_AS(config_from_json(R"({"grid_levels": 5})"), UsageError);
    CHECK_THROWS_AS(config_from_json(R"({"epochs": 0})"), UsageError);
    CHECK_THROWS_AS(config_from_json("[1, 2"), UsageError);
    CHECK(config_from_json("{}").epochs == 300);
    CHECK(RunConfig::full_scale().train_samples == 8000);
}

TEST_CASE("dataset generation") {
    const auto& g = small_dataset();
    const auto& ds = g.dataset;
    CHECK(ds.count(Split::Train) == 100);
    CHECK(ds.count(Split::Val) == 40);
    CHECK(g.train_scenarios == 5); // 4 full days plus 4 steps of a fifth
    CHECK(g.val_scenarios == 2);
    std::set<std::uint64_t> train_ids, val_ids;
    for (const auto& s : ds.samples) (s.split == Split::Train ? train_ids : val_ids).insert(s.scenario_id);
    for (auto id : val_ids) CHECK(train_ids.count(id) == 0);

    // labels are feasible and self-consistent
    const auto net = build_cigre18();
    const auto& st = net.storages.front();
    for (const auto& s : ds.samples) {
        const auto& y = s.graph.y[2];
        const double p = (y.at(0, 0) + y.at(0, 2) + y.at(0, 4)) * net.base_kva;
        CHECK(p <= st.discharge_limit() * (1 + 1e-12));
        CHECK(-p <= st.charge_limit() * (1 + 1e-12));
        const auto tr = soc_trajectory(st, s.soc, {p}, 1.0, 1e-9);
        CHECK(tr.out_of_bounds.empty());
    }
    auto oracle = evaluate_oracle(ds, Split::Val, LossContext::from(ds.header));
    CHECK(oracle.mse_bus.max == 0.0);
    CHECK(oracle.mse_storage.max == 0.0);
    CHECK(oracle.viol_battery.max == 0.0);
    CHECK(oracle.viol_v.max == 0.0);
    CHECK(oracle.viol_ext.max == 0.0);
}

TEST_CASE("dataset generation is deterministic and thread-independent") {
    auto cfg = small_config(30, 30);
    auto a = generate_dataset(build_cigre18(), cfg);
    cfg.threads = 3;
    auto b = generate_dataset(build_cigre18(), cfg);
    auto d = fresh_dir("bessgnn_gen_det");
    save_dataset(a.dataset, d / "a.bin");
    save_dataset(b.dataset, d / "b.bin");
    CHECK(binio::read_file(d / "a.bin") == binio::read_file(d / "b.bin"));
    fs::remove_all(d);
}

TEST_CASE("resample budget exhaustion") {
    auto cfg = small_config(24, 24);
    cfg.sampling.load_lo = 6.0;
    cfg.sampling.load_hi = 7.0;
    try {
        generate_dataset(build_cigre18(), cfg);
        FAIL("expected GenerationError");
    } catch (const GenerationError& e) {
        CHECK(std::string(e.what()).find("budget of 10") != std::string::npos);
    }
}

TEST_CASE("training reduces validation loss") {
    const auto& ds = generate_dataset(build_cigre18(), small_config(100, 48)).dataset;
    auto cfg = small_config();
    cfg.epochs = 50;
    auto r = train(ds, cfg, "physics", 1.0);
    REQUIRE(r.val_log.size() == 50);
    CHECK(r.val_log.back().total < r.val_log.front().total);
    CHECK(r.best.epoch >= 1);
    CHECK(r.best.best_val <= r.val_log.back().total);
    CHECK(r.dead_params.empty());
    CHECK(r.log_lines.front().rfind("1,physics,", 0) == 0);
}

TEST_CASE("training determinism and ablation integrity") {
    const auto& ds = small_dataset().dataset;
    auto cfg = small_config();
    cfg.epochs = 3;
    auto a = train(ds, cfg, "physics", 1.0);
    auto b = train(ds, cfg, "physics", 1.0);
    CHECK(a.log_lines == b.log_lines);
    CHECK(checkpoint_bytes(a.best) == checkpoint_bytes(b.best));

    cfg.epochs = 1;
    auto base = train(ds, cfg, "baseline", 0.0);
    auto phys = train(ds, cfg, "physics", 1.0);
    CHECK(base.val_log[0].lambda_phys == 0.0);
    CHECK(base.val_log[0].total == base.val_log[0].mse_sum());
    CHECK(base.log_lines != phys.log_lines);

    CHECK(base.init_digest == phys.init_digest);
    CHECK(base.order_digest == phys.order_digest);
    cfg.seed = 8;
    auto reseeded = train(ds, cfg, "baseline", 0.0);
    CHECK(reseeded.init_digest != base.init_digest);
    CHECK(reseeded.order_digest != base.order_digest);
}

TEST_CASE("non-finite loss aborts with the last good checkpoint") {
    const auto& ds = small_dataset().dataset;
    auto cfg = small_config();
    cfg.lr = 1e200;
    cfg.epochs = 4;
    auto d = fresh_dir("bessgnn_abort");
    CHECK_THROWS_AS(train(ds, cfg, "physics", 1.0, {}, d / "abort.bin"), TrainingError);
    CHECK(fs::exists(d / "abort.bin"));
    CHECK_NOTHROW(load_checkpoint(d / "abort.bin"));
    fs::remove_all(d);
}

TEST_CASE("evaluation metrics") {
    const auto& ds = small_dataset().dataset;
    auto cfg = small_config();
    cfg.epochs = 2;
    auto r = train(ds, cfg, "baseline", 0.0);
    const auto ctx = LossContext::from(ds.header);
    auto m = evaluate(r.best.model, ds, Split::Val, ctx);
    CHECK(m.samples == 40);
    CHECK(m.mse_bus.mean > 0.0);
    CHECK(m.mse_bus.min <= m.mse_bus.mean);
    CHECK(m.mse_bus.mean <= m.mse_bus.max);

    // battery violation matches a scalar recursion on the predicted power
    const auto net = build_cigre18();
    const auto& st = net.storages.front();
    double soc_ref = 0.0, crate_ref = 0.0;
    for (const auto* g : ds.graphs(Split::Val)) {
        const auto pred = predict(r.best.model, apply_norm(*g, r.best.model.norm));
        const auto& y = pred.y[2];
        const double p = (y.at(0, 0) + y.at(0, 2) + y.at(0, 4)) * net.base_kva;
        const double soc = soc_trajectory(st, g->features(NodeType::Storage).at(0, feat::st_soc), {p}, 1.0).soc[1];
        double e = std::max({0.0, st.SoC_min - soc, soc - st.SoC_max});
        if (e <= ctx.tol) e = 0.0;
        soc_ref += e * e;
        const double lim = st.C_rate * st.E_max;
        double c = std::max(0.0, std::abs(p) - lim) / (2 * lim);
        if (c <= ctx.tol) c = 0.0;
        crate_ref += c * c;
    }
    soc_ref /= 40.0;
    crate_ref /= 40.0;
    CHECK(m.viol_soc.mean == doctest::Approx(soc_ref).epsilon(1e-9));
    CHECK(m.viol_crate.mean == doctest::Approx(crate_ref).epsilon(1e-9));

    const auto csv = m.to_csv();
    CHECK(csv.rfind("metric,mean,std,min,max\nmse_bus,", 0) == 0);
    CHECK(csv.find("\nviol_battery,") != std::string::npos);
    CHECK(m.to_table().find("mse_angle_c") != std::string::npos);

    auto other = r.best.model;
    other.schema.dims[0] = 5;
    CHECK_THROWS_AS(evaluate(other, ds, Split::Val, ctx), SchemaError);
}

TEST_CASE("gain ratio") {
    CHECK(gain_ratio(1e-3, 1e-6) == doctest::Approx(1000.0));
    CHECK(std::isinf(gain_ratio(1e-3, 0.0)));
    CHECK(gain_table({{"gcn", 2e-4, 0.0}}).find("| gcn | 2.000e-04 | 0.000e+00 | inf |") != std::string::npos);
    CHECK(gain_table({{"sage", 1e-3, 1e-5}}).find("| 100.0 |") != std::string::npos);
}

TEST_CASE("report") {
    auto d = fresh_dir("bessgnn_report");
    CHECK_THROWS_AS(report(d), FormatError);
    const auto& ds = small_dataset().dataset;
    auto cfg = small_config();
    cfg.epochs = 2;
    auto res = run_ablation(ds, cfg, d);
    CHECK(fs::exists(d / "gcn" / "log_baseline.csv"));
    CHECK(fs::exists(d / "gcn" / "checkpoint_physics.bin"));
    auto files = report(d);
    CHECK(files.curves == 6);
    CHECK(fs::exists(d / "curves.csv"));
    CHECK(fs::exists(d / "gcn_storage.svg"));
    std::ifstream in(d / "summary.md");
    std::string md((std::istreambuf_iterator<char>(in)), {});
    CHECK(md.find("| Model | Without physics | With physics | Gain (x) |") != std::string::npos);

    // the checkpoint reproduces the in-memory metrics
    auto ck = load_checkpoint(d / "gcn" / "checkpoint_physics.bin");
    auto m = evaluate(ck.model, ds, Split::Val, LossContext::from(ds.header));
    CHECK(m.to_csv() == res.physics.metrics.to_csv());
    fs::remove_all(d);
}
