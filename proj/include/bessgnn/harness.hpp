#pragma once

#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "bessgnn/hetero_graph.hpp"
#include "bessgnn/hgnn.hpp"
#include "bessgnn/physics_loss.hpp"
#include "bessgnn/scenario.hpp"

namespace bessgnn {

/// Everything a run depends on. Stored as JSON next to the run outputs.
struct RunConfig {
    std::uint64_t seed = 7;
    std::string network;             // grid JSON path; empty means the built-in CIGRE 18-bus feeder
    std::size_t train_samples = 800; // graphs (time steps), drawn from whole scenarios
    std::size_t val_samples = 200;
    SamplingOptions sampling;
    std::size_t grid_levels = 101;
    std::size_t threads = 1;

    ModelConfig model;
    double lambda_phys = 1000.0;
    std::size_t epochs = 300;
    double lr = 1e-3;
    std::size_t batch_size = 32;
    bool lossless_soc = false;

    /// Throws UsageError on sizes or epochs below 1, grid_levels below 11, or bad model settings.
    void check() const;
    /// 8000 / 2000 samples and 2000 epochs.
    static RunConfig full_scale();
};

std::string config_to_json(const RunConfig& cfg);
/// Unknown keys raise UsageError; missing keys keep their defaults.
RunConfig config_from_json(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
void save_config(const RunConfig& cfg, const std::filesystem::path& path);

GridNetwork network_for(const RunConfig& cfg);

struct Rejection {
    std::uint64_t scenario_id;
    std::string reason;
};

struct GenerationResult {
    Dataset dataset;
    std::vector<Rejection> rejected;
    std::size_t train_scenarios = 0, val_scenarios = 0;
};

/// Samples scenarios, labels them with the dispatch oracle and power flow,
/// and encodes each step. Rejected scenarios are replaced by fresh ids until
/// the sample targets are met; each split may try at most 10x the scenarios
/// it needs before raising GenerationError. Train and val never share a
/// scenario. Output does not depend on `cfg.threads`.
GenerationResult generate_dataset(const GridNetwork& net, const RunConfig& cfg);

struct TrainResult {
    std::string arm;
    std::vector<LossBreakdown> val_log; // one per epoch, starting at epoch 1
    std::vector<std::string> log_lines; // CSV rows matching loss_csv_header()
    Checkpoint best;                    // lowest validation total
    Checkpoint last;
    std::vector<std::string> dead_params; // names whose gradient stayed zero over the first epoch
    std::uint64_t init_digest = 0;        // FNV-1a of the initial weights
    std::uint64_t order_digest = 0;       // FNV-1a of every epoch's batch order
};

using EpochCallback = std::function<void(std::size_t epoch, const LossBreakdown& val)>;

/// Mini-batch Adam on total_loss. The batch order depends only on
/// (cfg.seed, epoch) so arms that differ in lambda_phys see identical batches
/// and start from identical weights. A non-finite loss raises TrainingError
/// after writing the last good checkpoint to `abort_path` (when given).
TrainResult train(const Dataset& ds, const RunConfig& cfg, const std::string& arm, double lambda_phys,
                  const EpochCallback& on_epoch = {}, const std::filesystem::path& abort_path = {});

struct Stat {
    double mean = 0.0, std = 0.0, min = 0.0, max = 0.0;
};
Stat summarize(const std::vector<double>& x);

/// Raw-unit metrics over a split, one evaluation per graph.
struct MetricsReport {
    std::string label;
    std::size_t samples = 0;
    Stat mse_bus, mse_ext, mse_storage; // all six target columns
    Stat mse_vm;                        // bus voltage magnitudes, p.u.^2
    std::array<Stat, 3> mse_v, mse_angle;
    Stat viol_soc, viol_crate, viol_battery; // battery = soc + crate
    Stat viol_v, viol_ext;

    std::string to_csv() const;
    std::string to_table() const;
};

/// Throws SchemaError when the model was built for other feature widths or relations.
void check_compatible(const ModelState& m, const DatasetHeader& h);

MetricsReport evaluate(const ModelState& model, const Dataset& ds, Split split, const LossContext& ctx);
/// Uses the stored labels as predictions.
MetricsReport evaluate_oracle(const Dataset& ds, Split split, const LossContext& ctx);

inline constexpr double kInfiniteGain = std::numeric_limits<double>::infinity();
/// without / with; infinite when `with` is 0.
double gain_ratio(double without, double with);

/// Ablation table of battery violations for one or more architectures.
struct GainRow {
    std::string arch;
    double without = 0.0, with = 0.0;
    double gain() const { return gain_ratio(without, with); }
};
std::string gain_table(const std::vector<GainRow>& rows);

/// Reads `<run>/<arch>/log_<arm>.csv`, writes curves.csv, one SVG per task and
/// summary.md into `run`. Throws FormatError when no logs are found.
struct ReportFiles {
    std::vector<std::filesystem::path> written;
    std::size_t curves = 0;
};
ReportFiles report(const std::filesystem::path& run);

/// One training arm: writes log_<arm>.csv, checkpoint_<arm>.bin (best
/// validation) and metrics_<arm>.csv/.txt on the val split under `<out>/<arch>/`.
struct ArmOutcome {
    TrainResult result;
    MetricsReport metrics;
};
ArmOutcome run_arm(const Dataset& ds, const RunConfig& cfg, const std::filesystem::path& out, const std::string& arm,
                   double lambda_phys, std::ostream* progress = nullptr);

/// Baseline (lambda_phys = 0) and physics arms plus gain.md.
struct AblationOutcome {
    ArmOutcome baseline, physics;
};
AblationOutcome run_ablation(const Dataset& ds, const RunConfig& cfg, const std::filesystem::path& out,
                             std::ostream* progress = nullptr);

std::string format_double(double x);

} // namespace bessgnn
