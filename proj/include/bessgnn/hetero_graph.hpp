#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bessgnn/dispatch.hpp"
#include "bessgnn/grid.hpp"

namespace bessgnn {

enum class NodeType : std::uint8_t { Bus = 0, Load = 1, Line = 2, Storage = 3, Ext = 4 };
inline constexpr std::size_t kNodeTypes = 5;
inline constexpr std::array<std::size_t, kNodeTypes> kFeatureDims = {4, 6, 15, 9, 4};
inline constexpr std::size_t kTargetDim = 6;

std::string to_string(NodeType t);
inline std::size_t idx(NodeType t) { return static_cast<std::size_t>(t); }

struct Relation {
    NodeType src;
    NodeType dst;
    std::string name() const; // e.g. "line->bus"
    bool operator==(const Relation&) const = default;
};

/// The eight relations in canonical order.
const std::vector<Relation>& default_relations();

struct GraphSchema {
    std::array<std::size_t, kNodeTypes> dims = kFeatureDims;
    std::vector<Relation> relations = default_relations();
};

/// Row-major dense block.
struct Dense {
    std::size_t rows = 0, cols = 0;
    std::vector<double> v;

    Dense() = default;
    Dense(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0) {}
    double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
    bool empty() const noexcept { return v.empty(); }
    bool operator==(const Dense&) const = default;
};

struct Edges {
    std::vector<std::size_t> src, dst;
    std::size_t size() const noexcept { return src.size(); }
    bool operator==(const Edges&) const = default;
};

enum class Head : std::uint8_t { Bus = 0, Ext = 1, Storage = 2 };
inline constexpr std::size_t kHeads = 3;
inline std::size_t idx(Head h) { return static_cast<std::size_t>(h); }
std::string to_string(Head h);
/// Node type whose embeddings feed the head.
NodeType head_node(Head h);

struct HeteroGraph {
    std::array<Dense, kNodeTypes> x;         // raw features, or z-scored after apply_norm
    std::vector<Edges> edges;                // one per relation in default_relations()
    std::array<Dense, kHeads> y;             // targets; empty at prediction time
    std::size_t n_graphs = 1;                // > 1 for a batched disjoint union

    std::size_t count(NodeType t) const { return x[idx(t)].rows; }
    const Dense& features(NodeType t) const { return x[idx(t)]; }
    bool has_targets() const { return !y[0].empty(); }
};

/// Feature column layouts.
namespace feat {
inline constexpr std::size_t bus_v_rated = 0, bus_v_max = 1, bus_v_min = 2, bus_type = 3;
inline constexpr std::size_t st_soc = 0, st_e_max = 1, st_soc_max = 2, st_soc_min = 3, st_p_ch = 4, st_p_dis = 5,
                             st_q_ch = 6, st_q_dis = 7, st_c_rate = 8;
inline constexpr std::size_t ext_p_min = 0, ext_p_max = 1, ext_q_min = 2, ext_q_max = 3;
} // namespace feat

/// Builds the graph for one step. Load rows carry net per-phase demand (load
/// minus co-located PV, interleaved Pa, Qa, Pb, Qb, Pc, Qc). Storage SoC is
/// the pre-dispatch value. Throws PreconditionError for a PV unit at a bus
/// without a load or for a network that is not exactly one storage.
HeteroGraph encode(const GridNetwork& net, const StepState& state, const StepTargets* targets = nullptr);

/// Checks relation index ranges, line degree 2, and finiteness; returns
/// violations (empty means valid).
std::vector<std::string> check_graph(const HeteroGraph& g);

/// Disjoint union with edge indices offset per graph.
HeteroGraph batch_graphs(const std::vector<const HeteroGraph*>& graphs);

struct ColumnStats {
    std::vector<double> mean, std;
    bool operator==(const ColumnStats&) const = default;
};

struct NormStats {
    std::array<ColumnStats, kNodeTypes> features;
    std::array<ColumnStats, kHeads> targets;
    bool operator==(const NormStats&) const = default;
};

/// Column z-score statistics over every row of every training graph. Columns
/// with std below 1e-8 get mean 0 and std 1 so they pass through unchanged.
/// Throws SizeError for fewer than two graphs.
NormStats fit_norm(const std::vector<const HeteroGraph*>& train);
HeteroGraph apply_norm(const HeteroGraph& g, const NormStats& s);
Dense normalize_targets(const Dense& y, Head h, const NormStats& s);
Dense invert_targets(const Dense& y, Head h, const NormStats& s);

/// Constants shared by every record in a dataset.
struct DatasetHeader {
    std::string network_name;
    double base_kva = 1000.0;
    double dt_h = 1.0;
    double eta_ch = 0.95, eta_dis = 0.95;
    std::uint64_t seed = 0;
    std::array<std::size_t, kNodeTypes> counts{};
    std::vector<Edges> edges;
};

enum class Split : std::uint8_t { Train = 0, Val = 1 };

struct Sample {
    std::uint64_t scenario_id = 0;
    std::uint64_t step = 0;
    Split split = Split::Train;
    double price = 0.0;
    double soc = 0.0;
    HeteroGraph graph;
};

struct Dataset {
    DatasetHeader header;
    std::vector<Sample> samples;

    std::vector<const HeteroGraph*> graphs(Split s) const;
    std::size_t count(Split s) const;
};

/// Header fields from the network template (topology from a zero-state encode).
DatasetHeader make_header(const GridNetwork& net, double dt_h, std::uint64_t seed);

/// Little-endian binary layout (see docs/formats.md) plus `<path>.index.csv`.
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

} // namespace bessgnn
