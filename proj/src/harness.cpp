#include "bessgnn/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "bessgnn/binio.hpp"
#include "bessgnn/dispatch.hpp"
#include "bessgnn/errors.hpp"
#include "bessgnn/optim.hpp"
#include "bessgnn/powerflow.hpp"
#include "bessgnn/random.hpp"

namespace bessgnn {

using nlohmann::json;
namespace fs = std::filesystem;

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// ---- config ------------------------------------------------------------------

void RunConfig::check() const {
    if (train_samples < 1 || val_samples < 1) throw UsageError("config: train_samples and val_samples must be >= 1");
    if (epochs < 1) throw UsageError("config: epochs must be >= 1");
    if (batch_size < 1) throw UsageError("config: batch_size must be >= 1");
    if (grid_levels < 11) throw UsageError("config: grid_levels must be >= 11");
    if (threads < 1) throw UsageError("config: threads must be >= 1");
    if (!(lr > 0.0)) throw UsageError("config: lr must be positive");
    if (!(lambda_phys >= 0.0)) throw UsageError("config: lambda_phys must be >= 0");
    if (sampling.steps < 1 || !(sampling.dt_h > 0.0)) throw UsageError("config: sampling steps and dt_h must be positive");
    try {
        model.check();
    } catch (const ParameterError& e) {
        throw UsageError(std::string("config: ") + e.what());
    }
}

RunConfig RunConfig::full_scale() {
    RunConfig c;
    c.train_samples = 8000;
    c.val_samples = 2000;
    c.epochs = 2000;
    return c;
}

std::string config_to_json(const RunConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["network"] = c.network;
    j["train_samples"] = c.train_samples;
    j["val_samples"] = c.val_samples;
    j["grid_levels"] = c.grid_levels;
    j["threads"] = c.threads;
    j["sampling"] = {{"steps", c.sampling.steps},         {"dt_h", c.sampling.dt_h},
                     {"load_lo", c.sampling.load_lo},     {"load_hi", c.sampling.load_hi},
                     {"cloud_hi", c.sampling.cloud_hi},   {"price_lo", c.sampling.price_lo},
                     {"price_hi", c.sampling.price_hi},   {"soc_margin", c.sampling.soc_margin}};
    j["model"] = {{"arch", to_string(c.model.arch)},
                  {"hidden", c.model.hidden},
                  {"layers", c.model.layers},
                  {"heads", c.model.heads}};
    j["lambda_phys"] = c.lambda_phys;
    j["epochs"] = c.epochs;
    j["lr"] = c.lr;
    j["batch_size"] = c.batch_size;
    j["lossless_soc"] = c.lossless_soc;
    return j.dump(2);
}

namespace {

template <typename T>
void take(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    for (const auto& [k, v] : j.items())
        if (!known.count(k)) throw UsageError("config: unknown key '" + where + k + "'");
}

} // namespace

RunConfig config_from_json(const std::string& text) {
    RunConfig c;
    try {
        const json j = json::parse(text);
        if (!j.is_object()) throw UsageError("config: top level must be an object");
        reject_unknown(j,
                       {"seed", "network", "train_samples", "val_samples", "grid_levels", "threads", "sampling",
                        "model", "lambda_phys", "epochs", "lr", "batch_size", "lossless_soc"},
                       "");
        take(j, "seed", c.seed);
        take(j, "network", c.network);
        take(j, "train_samples", c.train_samples);
        take(j, "val_samples", c.val_samples);
        take(j, "grid_levels", c.grid_levels);
        take(j, "threads", c.threads);
        take(j, "lambda_phys", c.lambda_phys);
        take(j, "epochs", c.epochs);
        take(j, "lr", c.lr);
        take(j, "batch_size", c.batch_size);
        take(j, "lossless_soc", c.lossless_soc);
        if (j.contains("sampling")) {
            const auto& s = j.at("sampling");
            reject_unknown(s, {"steps", "dt_h", "load_lo", "load_hi", "cloud_hi", "price_lo", "price_hi", "soc_margin"},
                           "sampling.");
            take(s, "steps", c.sampling.steps);
            take(s, "dt_h", c.sampling.dt_h);
            take(s, "load_lo", c.sampling.load_lo);
            take(s, "load_hi", c.sampling.load_hi);
            take(s, "cloud_hi", c.sampling.cloud_hi);
            take(s, "price_lo", c.sampling.price_lo);
            take(s, "price_hi", c.sampling.price_hi);
            take(s, "soc_margin", c.sampling.soc_margin);
        }
        if (j.contains("model")) {
            const auto& m = j.at("model");
            reject_unknown(m, {"arch", "hidden", "layers", "heads"}, "model.");
            if (m.contains("arch")) c.model.arch = arch_from_string(m.at("arch").get<std::string>());
            take(m, "hidden", c.model.hidden);
            take(m, "layers", c.model.layers);
            take(m, "heads", c.model.heads);
        }
    } catch (const json::exception& e) {
        throw UsageError(std::string("config: ") + e.what());
    } catch (const ParameterError& e) {
        throw UsageError(std::string("config: ") + e.what());
    }
    c.model.seed = c.seed;
    c.check();
    return c;
}

RunConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("config: cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str());
}

void save_config(const RunConfig& cfg, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("config: cannot write " + path.string());
    out << config_to_json(cfg) << '\n';
}

GridNetwork network_for(const RunConfig& cfg) {
    return cfg.network.empty() ? build_cigre18() : load_network(cfg.network);
}

// ---- dataset generation -------------------------------------------------------

namespace {

struct Candidate {
    std::uint64_t id = 0;
    LabeledScenario labeled;
    std::string reason; // empty when accepted
};

Candidate label_candidate(const GridNetwork& net, const RunConfig& cfg, std::uint64_t id) {
    Candidate c;
    c.id = id;
    const Scenario scn = sample_scenario(net, id, cfg.seed, cfg.sampling);
    DispatchSchedule sched;
    try {
        sched = optimize_dispatch(net, scn, cfg.grid_levels);
    } catch (const GenerationError& e) {
        c.reason = e.what();
        return c;
    }
    if (schedule_violation(net.storages.front(), sched) != 0.0)
        throw InvariantError("generate_dataset: oracle emitted an infeasible schedule for scenario " +
                             std::to_string(id));
    c.labeled = label_scenario(net, scn, sched);
    if (!c.labeled.accepted) {
        c.reason = c.labeled.reason;
        return c;
    }
    for (const auto& ls : c.labeled.steps) {
        const double r = residual(net, ls.injections, ls.pf);
        if (!(r < 1e-8))
            throw InvariantError("generate_dataset: power-flow residual " + format_double(r) + " at scenario " +
                                 std::to_string(id) + " step " + std::to_string(ls.state.step));
    }
    return c;
}

std::vector<Candidate> label_wave(const GridNetwork& net, const RunConfig& cfg, std::uint64_t first, std::size_t n) {
    std::vector<Candidate> out(n);
    const std::size_t workers = std::min(cfg.threads, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = label_candidate(net, cfg, first + i);
        return out;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += workers) out[i] = label_candidate(net, cfg, first + i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

// Val ids live in their own range so the train split cannot shift them.
constexpr std::uint64_t kValIdBase = std::uint64_t{1} << 32;

std::size_t fill_split(const GridNetwork& net, const RunConfig& cfg, Split split, std::size_t target,
                       GenerationResult& res) {
    const std::size_t steps = cfg.sampling.steps;
    const std::size_t needed = (target + steps - 1) / steps;
    const std::size_t budget = 10 * needed;
    const std::uint64_t base = split == Split::Train ? 0 : kValIdBase;
    std::size_t tried = 0, used = 0, collected = 0;
    std::size_t rejected_here = 0;
    while (collected < target) {
        if (tried >= budget) {
            std::ostringstream msg;
            msg << "generate_dataset: " << (split == Split::Train ? "train" : "val") << " split exhausted its budget of "
                << budget << " scenarios with " << collected << "/" << target << " samples; " << rejected_here
                << " rejected";
            if (!res.rejected.empty()) msg << " (last: " << res.rejected.back().reason << ")";
            throw GenerationError(msg.str());
        }
        const std::size_t remaining = (target - collected + steps - 1) / steps;
        const std::size_t wave = std::min(budget - tried, std::max(cfg.threads, remaining));
        auto cands = label_wave(net, cfg, base + tried, wave);
        for (auto& c : cands) {
            if (collected >= target) break;
            ++tried;
            if (!c.reason.empty()) {
                res.rejected.push_back({c.id, c.reason});
                ++rejected_here;
                continue;
            }
            ++used;
            for (const auto& ls : c.labeled.steps) {
                if (collected >= target) break;
                Sample s;
                s.scenario_id = c.id;
                s.step = ls.state.step;
                s.split = split;
                s.price = ls.state.price;
                s.soc = ls.state.soc_before;
                s.graph = encode(net, ls.state, &ls.targets);
                res.dataset.samples.push_back(std::move(s));
                ++collected;
            }
        }
    }
    return used;
}

} // namespace

GenerationResult generate_dataset(const GridNetwork& net, const RunConfig& cfg) {
    cfg.check();
    GenerationResult res;
    res.dataset.header = make_header(net, cfg.sampling.dt_h, cfg.seed);
    res.train_scenarios = fill_split(net, cfg, Split::Train, cfg.train_samples, res);
    res.val_scenarios = fill_split(net, cfg, Split::Val, cfg.val_samples, res);
    return res;
}

// ---- training -----------------------------------------------------------------

namespace {

ModelState clone(const ModelState& s) {
    ModelState c = s;
    for (auto& p : c.params) p = nn::Tensor(p.shape(), {p.data().begin(), p.data().end()}, true);
    c.reindex();
    return c;
}

Checkpoint snapshot(const ModelState& s, const nn::Adam& opt, std::size_t epoch, double lambda, double best) {
    Checkpoint ck;
    ck.model = clone(s);
    ck.adam = AdamSnapshot{opt.steps(), opt.config().lr, opt.first_moment(), opt.second_moment()};
    ck.epoch = epoch;
    ck.lambda_phys = lambda;
    ck.best_val = best;
    return ck;
}

HeteroGraph batch_of(const std::vector<HeteroGraph>& gs, std::span<const std::size_t> ids) {
    std::vector<const HeteroGraph*> p;
    p.reserve(ids.size());
    for (auto i : ids) p.push_back(&gs[i]);
    return batch_graphs(p);
}

template <typename T>
std::string_view bytes_of(std::span<const T> v) {
    return {reinterpret_cast<const char*>(v.data()), v.size() * sizeof(T)};
}

std::vector<HeteroGraph> copies(const std::vector<const HeteroGraph*>& gs) {
    std::vector<HeteroGraph> out;
    out.reserve(gs.size());
    for (const auto* g : gs) out.push_back(*g);
    return out;
}

} // namespace

TrainResult train(const Dataset& ds, const RunConfig& cfg, const std::string& arm, double lambda_phys,
                  const EpochCallback& on_epoch, const fs::path& abort_path) {
    cfg.check();
    const auto train_raw = copies(ds.graphs(Split::Train));
    const auto val_raw = copies(ds.graphs(Split::Val));
    if (train_raw.size() < 2) throw PreconditionError("train: need at least two training graphs");
    if (val_raw.empty()) throw PreconditionError("train: dataset has no validation graphs");

    std::vector<const HeteroGraph*> ptr;
    for (const auto& g : train_raw) ptr.push_back(&g);
    const NormStats stats = fit_norm(ptr);
    std::vector<HeteroGraph> train_norm, val_norm;
    for (const auto& g : train_raw) train_norm.push_back(apply_norm(g, stats));
    for (const auto& g : val_raw) val_norm.push_back(apply_norm(g, stats));

    LossContext ctx = LossContext::from(ds.header);
    ctx.lossless_soc = cfg.lossless_soc;

    std::vector<std::size_t> all_val(val_raw.size());
    std::iota(all_val.begin(), all_val.end(), 0);
    const HeteroGraph val_batch = batch_of(val_norm, all_val);
    const PhysicsBounds val_bounds = physics_bounds(batch_of(val_raw, all_val), ctx);

    ModelConfig mc = cfg.model;
    mc.seed = cfg.seed;
    ModelState state = init_model(mc);
    check_compatible(state, ds.header);
    state.norm = stats;
    nn::Adam opt(state.params, nn::AdamConfig{cfg.lr});

    TrainResult res;
    res.arm = arm;
    std::vector<char> touched(state.params.size(), 0);
    double best = std::numeric_limits<double>::infinity();
    res.init_digest = binio::fnv1a({});
    for (const auto& p : state.params)
        res.init_digest = binio::fnv1a(bytes_of(p.data()), res.init_digest);
    res.last = snapshot(state, opt, 0, lambda_phys, best);
    res.best = res.last;

    auto abort = [&](const std::string& what) {
        if (!abort_path.empty()) save_checkpoint(res.last, abort_path);
        throw TrainingError("train: " + what + "; last good checkpoint from epoch " + std::to_string(res.last.epoch) +
                            (abort_path.empty() ? std::string() : " written to " + abort_path.string()));
    };

    const std::size_t n = train_norm.size();
    std::vector<std::size_t> order(n);
    res.order_digest = binio::fnv1a({});
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        Rng rng(derive_seed(cfg.seed, epoch));
        rng.shuffle(order);
        res.order_digest = binio::fnv1a(bytes_of(std::span<const std::size_t>(order)), res.order_digest);
        for (std::size_t lo = 0; lo < n; lo += cfg.batch_size) {
            const std::span<const std::size_t> ids(order.data() + lo, std::min(cfg.batch_size, n - lo));
            const HeteroGraph nb = batch_of(train_norm, ids);
            const PhysicsBounds bounds = physics_bounds(batch_of(train_raw, ids), ctx);
            Loss loss = total_loss(forward(state, nb), nb, bounds, ctx, lambda_phys);
            if (!std::isfinite(loss.parts.total))
                abort("non-finite training loss at epoch " + std::to_string(epoch));
            loss.total.backward();
            if (epoch == 1)
                for (std::size_t i = 0; i < state.params.size(); ++i)
                    if (state.params[i].has_grad() && !touched[i])
                        for (double g : state.params[i].grad())
                            if (g != 0.0) {
                                touched[i] = 1;
                                break;
                            }
            opt.step();
        }
        if (epoch == 1)
            for (std::size_t i = 0; i < state.params.size(); ++i)
                if (!touched[i]) res.dead_params.push_back(state.names[i]);

        const Loss val = total_loss(forward(state, val_batch), val_batch, val_bounds, ctx, lambda_phys);
        if (!std::isfinite(val.parts.total)) abort("non-finite validation loss at epoch " + std::to_string(epoch));
        res.val_log.push_back(val.parts);
        res.log_lines.push_back(loss_csv_row(epoch, arm, val.parts));
        if (on_epoch) on_epoch(epoch, val.parts);
        for (const auto& p : state.params)
            for (double x : p.data())
                if (!std::isfinite(x)) abort("non-finite parameter after epoch " + std::to_string(epoch));
        if (val.parts.total < best) {
            best = val.parts.total;
            res.best = snapshot(state, opt, epoch, lambda_phys, best);
        }
        res.last = snapshot(state, opt, epoch, lambda_phys, best);
    }
    res.best.best_val = best;
    return res;
}

// ---- evaluation ---------------------------------------------------------------

Stat summarize(const std::vector<double>& x) {
    Stat s;
    if (x.empty()) return s;
    s.min = *std::min_element(x.begin(), x.end());
    s.max = *std::max_element(x.begin(), x.end());
    double sum = 0.0;
    for (double v : x) sum += v;
    s.mean = sum / static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(x.size()));
    return s;
}

void check_compatible(const ModelState& m, const DatasetHeader& h) {
    if (m.schema.dims != kFeatureDims)
        throw SchemaError("model feature widths do not match the dataset encoding");
    if (m.schema.relations != default_relations())
        throw SchemaError("model relations do not match the dataset encoding");
    if (h.edges.size() != default_relations().size())
        throw SchemaError("dataset carries " + std::to_string(h.edges.size()) + " relations, expected " +
                          std::to_string(default_relations().size()));
}

namespace {

double mse_cols(const Dense& a, const Dense& b, std::size_t first, std::size_t stride) {
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < a.rows; ++r)
        for (std::size_t c = first; c < a.cols; c += stride, ++n) {
            const double d = a.at(r, c) - b.at(r, c);
            acc += d * d;
        }
    return n ? acc / static_cast<double>(n) : 0.0;
}

double mse_col(const Dense& a, const Dense& b, std::size_t c) {
    double acc = 0.0;
    for (std::size_t r = 0; r < a.rows; ++r) {
        const double d = a.at(r, c) - b.at(r, c);
        acc += d * d;
    }
    return a.rows ? acc / static_cast<double>(a.rows) : 0.0;
}

using Predictor = std::function<std::array<Dense, kHeads>(const HeteroGraph&)>;

MetricsReport evaluate_with(const Dataset& ds, Split split, const LossContext& ctx, const Predictor& predict_raw,
                            std::string label) {
    MetricsReport rep;
    rep.label = std::move(label);
    std::vector<double> bus, ext, st, vm, soc, crate, bat, vv, ve;
    std::array<std::vector<double>, 3> v, ang;
    for (const auto* g : ds.graphs(split)) {
        if (!g->has_targets()) throw PreconditionError("evaluate: sample without labels");
        const auto pred = predict_raw(*g);
        const auto& y = g->y;
        bus.push_back(mse_cols(pred[0], y[0], 0, 1));
        ext.push_back(mse_cols(pred[1], y[1], 0, 1));
        st.push_back(mse_cols(pred[2], y[2], 0, 1));
        vm.push_back(mse_cols(pred[0], y[0], 0, 2));
        for (std::size_t ph = 0; ph < 3; ++ph) {
            v[ph].push_back(mse_col(pred[0], y[0], 2 * ph));
            ang[ph].push_back(mse_col(pred[0], y[0], 2 * ph + 1));
        }
        const auto m = violation_metrics(pred, physics_bounds(*g, ctx), ctx);
        soc.push_back(m.pen_soc);
        crate.push_back(m.pen_crate);
        bat.push_back(m.battery_violation());
        vv.push_back(m.pen_v_sum());
        ve.push_back(m.pen_ext_sum());
    }
    if (bus.empty()) throw PreconditionError("evaluate: split is empty");
    rep.samples = bus.size();
    rep.mse_bus = summarize(bus);
    rep.mse_ext = summarize(ext);
    rep.mse_storage = summarize(st);
    rep.mse_vm = summarize(vm);
    for (std::size_t ph = 0; ph < 3; ++ph) {
        rep.mse_v[ph] = summarize(v[ph]);
        rep.mse_angle[ph] = summarize(ang[ph]);
    }
    rep.viol_soc = summarize(soc);
    rep.viol_crate = summarize(crate);
    rep.viol_battery = summarize(bat);
    rep.viol_v = summarize(vv);
    rep.viol_ext = summarize(ve);
    return rep;
}

std::vector<std::pair<std::string, const Stat*>> rows_of(const MetricsReport& r) {
    std::vector<std::pair<std::string, const Stat*>> rows = {
        {"mse_bus", &r.mse_bus}, {"mse_ext", &r.mse_ext}, {"mse_storage", &r.mse_storage}, {"mse_vm", &r.mse_vm}};
    const char* ph = "abc";
    for (std::size_t p = 0; p < 3; ++p) rows.push_back({std::string("mse_v_") + ph[p], &r.mse_v[p]});
    for (std::size_t p = 0; p < 3; ++p) rows.push_back({std::string("mse_angle_") + ph[p], &r.mse_angle[p]});
    rows.push_back({"viol_soc", &r.viol_soc});
    rows.push_back({"viol_crate", &r.viol_crate});
    rows.push_back({"viol_battery", &r.viol_battery});
    rows.push_back({"viol_v", &r.viol_v});
    rows.push_back({"viol_ext", &r.viol_ext});
    return rows;
}

} // namespace

std::string MetricsReport::to_csv() const {
    std::ostringstream os;
    os << "metric,mean,std,min,max\n";
    for (const auto& [name, s] : rows_of(*this))
        os << name << ',' << format_double(s->mean) << ',' << format_double(s->std) << ',' << format_double(s->min)
           << ',' << format_double(s->max) << '\n';
    return os.str();
}

std::string MetricsReport::to_table() const {
    std::ostringstream os;
    char buf[160];
    os << label << " (" << samples << " samples)\n";
    std::snprintf(buf, sizeof buf, "%-14s %12s %12s %12s %12s\n", "metric", "mean", "std", "min", "max");
    os << buf;
    for (const auto& [name, s] : rows_of(*this)) {
        std::snprintf(buf, sizeof buf, "%-14s %12.4e %12.4e %12.4e %12.4e\n", name.c_str(), s->mean, s->std, s->min,
                      s->max);
        os << buf;
    }
    return os.str();
}

MetricsReport evaluate(const ModelState& model, const Dataset& ds, Split split, const LossContext& ctx) {
    check_compatible(model, ds.header);
    return evaluate_with(
        ds, split, ctx,
        [&](const HeteroGraph& g) { return predict(model, apply_norm(g, model.norm)).y; },
        to_string(model.config.arch));
}

MetricsReport evaluate_oracle(const Dataset& ds, Split split, const LossContext& ctx) {
    return evaluate_with(ds, split, ctx, [](const HeteroGraph& g) { return g.y; }, "oracle");
}

double gain_ratio(double without, double with) { return with == 0.0 ? kInfiniteGain : without / with; }

std::string gain_table(const std::vector<GainRow>& rows) {
    std::ostringstream os;
    os << "| Model | Without physics | With physics | Gain (x) |\n";
    os << "|---|---|---|---|\n";
    char buf[200];
    for (const auto& r : rows) {
        const double g = r.gain();
        char gain[40];
        if (std::isinf(g)) std::snprintf(gain, sizeof gain, "inf");
        else std::snprintf(gain, sizeof gain, "%.1f", g);
        std::snprintf(buf, sizeof buf, "| %s | %.3e | %.3e | %s |\n", r.arch.c_str(), r.without, r.with, gain);
        os << buf;
    }
    return os.str();
}

// ---- report -------------------------------------------------------------------

namespace {

struct LogRow {
    std::size_t epoch;
    std::array<double, 3> mse;
};

std::vector<LogRow> read_log(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw FormatError("report: cannot read " + p.string());
    std::string line;
    std::getline(in, line);
    if (line != loss_csv_header()) throw FormatError("report: unexpected header in " + p.string());
    std::vector<LogRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != 10) throw FormatError("report: malformed row in " + p.string());
        rows.push_back({static_cast<std::size_t>(std::stoul(f[0])), {std::stod(f[2]), std::stod(f[3]), std::stod(f[4])}});
    }
    if (rows.empty()) throw FormatError("report: empty log " + p.string());
    return rows;
}

std::map<std::string, double> read_metrics(const fs::path& p) {
    std::map<std::string, double> out;
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        const auto c1 = line.find(',');
        if (c1 == std::string::npos) continue;
        const auto c2 = line.find(',', c1 + 1);
        out[line.substr(0, c1)] = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
    }
    return out;
}

constexpr const char* kTasks[3] = {"bus", "ext", "storage"};
constexpr const char* kArms[2] = {"baseline", "physics"};

std::string svg_curves(const std::string& title, const std::map<std::string, std::vector<LogRow>>& logs,
                       std::size_t task) {
    const double w = 640, h = 400, ml = 70, mr = 20, mt = 30, mb = 45;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    std::size_t emax = 1;
    for (const auto& [arm, rows] : logs)
        for (const auto& r : rows) {
            const double v = std::log10(std::max(r.mse[task], 1e-300));
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            emax = std::max(emax, r.epoch);
        }
    lo = std::floor(lo);
    hi = std::max(std::ceil(hi), lo + 1);
    auto px = [&](double e) { return ml + (w - ml - mr) * (e - 1) / std::max<double>(1.0, emax - 1); };
    auto py = [&](double v) { return mt + (h - mt - mb) * (hi - std::log10(std::max(v, 1e-300))) / (hi - lo); };
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << w / 2 << "\" y=\"18\" text-anchor=\"middle\">" << title << "</text>\n";
    os << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr << "\" y2=\"" << h - mb << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << h - mb << "\" stroke=\"black\"/>\n";
    for (double d = lo; d <= hi; d += 1.0) {
        const double y = py(std::pow(10.0, d));
        os << "<text x=\"" << ml - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">1e" << d << "</text>\n";
        os << "<line x1=\"" << ml << "\" y1=\"" << y << "\" x2=\"" << w - mr << "\" y2=\"" << y << "\" stroke=\"#ddd\"/>\n";
    }
    os << "<text x=\"" << w / 2 << "\" y=\"" << h - 10 << "\" text-anchor=\"middle\">epoch (1.." << emax << ")</text>\n";
    const char* colors[2] = {"#c0392b", "#2471a3"};
    std::size_t k = 0;
    for (const auto& [arm, rows] : logs) {
        os << "<polyline fill=\"none\" stroke=\"" << colors[k % 2] << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& r : rows) os << px(static_cast<double>(r.epoch)) << ',' << py(r.mse[task]) << ' ';
        os << "\"/>\n";
        os << "<text x=\"" << w - mr - 5 << "\" y=\"" << mt + 15 + 15 * k << "\" text-anchor=\"end\" fill=\"" << colors[k % 2]
           << "\">" << arm << "</text>\n";
        ++k;
    }
    os << "</svg>\n";
    return os.str();
}

void write_text(const fs::path& p, const std::string& s, ReportFiles& files) {
    std::ofstream out(p);
    if (!out) throw FormatError("report: cannot write " + p.string());
    out << s;
    files.written.push_back(p);
}

} // namespace

ReportFiles report(const fs::path& run) {
    if (!fs::is_directory(run)) throw FormatError("report: no run directory at " + run.string());
    std::map<std::string, std::map<std::string, std::vector<LogRow>>> logs; // arch -> arm -> rows
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(run))
        if (e.is_directory()) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    for (const auto& d : dirs)
        for (const char* arm : kArms) {
            const auto p = d / ("log_" + std::string(arm) + ".csv");
            if (fs::exists(p)) logs[d.filename().string()][arm] = read_log(p);
        }
    if (logs.empty()) throw FormatError("report: no training logs (<arch>/log_<arm>.csv) under " + run.string());

    ReportFiles files;
    std::ostringstream curves;
    curves << "arch,arm,task,epoch,val_mse\n";
    for (const auto& [arch, arms] : logs)
        for (const auto& [arm, rows] : arms)
            for (std::size_t t = 0; t < 3; ++t) {
                ++files.curves;
                for (const auto& r : rows)
                    curves << arch << ',' << arm << ',' << kTasks[t] << ',' << r.epoch << ',' << format_double(r.mse[t])
                           << '\n';
            }
    write_text(run / "curves.csv", curves.str(), files);
    for (const auto& [arch, arms] : logs)
        for (std::size_t t = 0; t < 3; ++t)
            write_text(run / (arch + "_" + kTasks[t] + ".svg"),
                       svg_curves(arch + ": validation MSE, " + kTasks[t] + " head", arms, t), files);

    std::ostringstream md;
    md << "# Run summary\n\n## Validation MSE (normalized targets)\n\n";
    md << "| Model | Arm | Epochs | Final bus | Final ext | Final storage | Best bus | Best ext | Best storage |\n";
    md << "|---|---|---|---|---|---|---|---|---|\n";
    char buf[300];
    std::vector<GainRow> gains;
    for (const auto& [arch, arms] : logs) {
        for (const auto& [arm, rows] : arms) {
            std::array<double, 3> best{};
            for (std::size_t t = 0; t < 3; ++t) {
                best[t] = rows.front().mse[t];
                for (const auto& r : rows) best[t] = std::min(best[t], r.mse[t]);
            }
            const auto& f = rows.back().mse;
            std::snprintf(buf, sizeof buf, "| %s | %s | %zu | %.3e | %.3e | %.3e | %.3e | %.3e | %.3e |\n", arch.c_str(),
                          arm.c_str(), rows.back().epoch, f[0], f[1], f[2], best[0], best[1], best[2]);
            md << buf;
        }
        const auto mb = run / arch / "metrics_baseline.csv", mp = run / arch / "metrics_physics.csv";
        if (fs::exists(mb) && fs::exists(mp))
            gains.push_back({arch, read_metrics(mb).at("viol_battery"), read_metrics(mp).at("viol_battery")});
    }
    if (!gains.empty()) {
        md << "\n## SoC and C-rate constraint violations (MSE)\n\n" << gain_table(gains);
        md << "\nGain is the ratio without / with the physics terms (inf when the physics arm has no violation).\n";
    }
    md << "\n## Curves\n\n";
    for (const auto& [arch, arms] : logs)
        for (const char* t : kTasks) md << "- " << arch << "_" << t << ".svg\n";
    write_text(run / "summary.md", md.str(), files);
    return files;
}

// ---- ablation -----------------------------------------------------------------

ArmOutcome run_arm(const Dataset& ds, const RunConfig& cfg, const fs::path& out, const std::string& arm,
                   double lambda_phys, std::ostream* progress) {
    const fs::path dir = out / to_string(cfg.model.arch);
    fs::create_directories(dir);
    LossContext ctx = LossContext::from(ds.header);
    ctx.lossless_soc = cfg.lossless_soc;
    EpochCallback cb;
    if (progress)
        cb = [&](std::size_t e, const LossBreakdown& v) {
            if (e == 1 || e % 25 == 0 || e == cfg.epochs)
                *progress << to_string(cfg.model.arch) << '/' << arm << " epoch " << e << " val total "
                          << format_double(v.total) << " battery " << format_double(v.battery_violation()) << '\n'
                          << std::flush;
        };
    ArmOutcome res;
    res.result = train(ds, cfg, arm, lambda_phys, cb, dir / ("abort_" + arm + ".bin"));
    {
        std::ofstream log(dir / ("log_" + arm + ".csv"));
        log << loss_csv_header() << '\n';
        for (const auto& l : res.result.log_lines) log << l << '\n';
    }
    save_checkpoint(res.result.best, dir / ("checkpoint_" + arm + ".bin"));
    res.metrics = evaluate(res.result.best.model, ds, Split::Val, ctx);
    res.metrics.label = to_string(cfg.model.arch) + " " + arm;
    std::ofstream(dir / ("metrics_" + arm + ".csv")) << res.metrics.to_csv();
    std::ofstream(dir / ("metrics_" + arm + ".txt")) << res.metrics.to_table();
    return res;
}

AblationOutcome run_ablation(const Dataset& ds, const RunConfig& cfg, const fs::path& out, std::ostream* progress) {
    AblationOutcome res;
    res.baseline = run_arm(ds, cfg, out, "baseline", 0.0, progress);
    res.physics = run_arm(ds, cfg, out, "physics", cfg.lambda_phys, progress);
    std::ofstream(out / to_string(cfg.model.arch) / "gain.md")
        << gain_table({{to_string(cfg.model.arch), res.baseline.metrics.viol_battery.mean,
                        res.physics.metrics.viol_battery.mean}});
    return res;
}

} // namespace bessgnn
