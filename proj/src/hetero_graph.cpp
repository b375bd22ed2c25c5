#include "bessgnn/hetero_graph.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "bessgnn/binio.hpp"
#include "bessgnn/errors.hpp"

namespace bessgnn {

std::string to_string(NodeType t) {
    switch (t) {
    case NodeType::Bus: return "bus";
    case NodeType::Load: return "load";
    case NodeType::Line: return "line";
    case NodeType::Storage: return "storage";
    case NodeType::Ext: return "ext_grid";
    }
    throw InvariantError("unknown node type");
}

std::string to_string(Head h) {
    switch (h) {
    case Head::Bus: return "bus";
    case Head::Ext: return "ext";
    case Head::Storage: return "storage";
    }
    throw InvariantError("unknown head");
}

NodeType head_node(Head h) {
    switch (h) {
    case Head::Bus: return NodeType::Bus;
    case Head::Ext: return NodeType::Ext;
    case Head::Storage: return NodeType::Storage;
    }
    throw InvariantError("unknown head");
}

std::string Relation::name() const { return to_string(src) + "->" + to_string(dst); }

const std::vector<Relation>& default_relations() {
    using N = NodeType;
    static const std::vector<Relation> rels = {
        {N::Line, N::Bus}, {N::Bus, N::Line},    {N::Load, N::Bus}, {N::Bus, N::Load},
        {N::Storage, N::Bus}, {N::Bus, N::Storage}, {N::Ext, N::Bus},  {N::Bus, N::Ext},
    };
    return rels;
}

namespace {

// Edges for a relation and its reverse, from (src_row, bus_position) pairs.
void add_pair(std::vector<Edges>& e, std::size_t forward, std::size_t src, std::size_t bus) {
    e[forward].src.push_back(src);
    e[forward].dst.push_back(bus);
    e[forward + 1].src.push_back(bus);
    e[forward + 1].dst.push_back(src);
}

} // namespace

HeteroGraph encode(const GridNetwork& net, const StepState& s, const StepTargets* targets) {
    if (net.per_unit) throw PreconditionError("encode: expects a network in physical units");
    if (net.storages.size() != 1)
        throw PreconditionError("encode: expected exactly one storage, found " + std::to_string(net.storages.size()));
    if (s.load_p.size() != net.loads.size() || s.load_q.size() != net.loads.size() || s.pv_p.size() != net.pvs.size())
        throw DimensionError("encode: step state does not match the network's loads and PV units");

    HeteroGraph g;
    auto& xb = g.x[idx(NodeType::Bus)] = Dense(net.buses.size(), kFeatureDims[0]);
    for (std::size_t i = 0; i < net.buses.size(); ++i) {
        const auto& b = net.buses[i];
        xb.at(i, feat::bus_v_rated) = b.V_rated;
        xb.at(i, feat::bus_v_max) = b.V_max;
        xb.at(i, feat::bus_v_min) = b.V_min;
        xb.at(i, feat::bus_type) = static_cast<double>(static_cast<int>(b.bus_type));
    }

    auto& xl = g.x[idx(NodeType::Load)] = Dense(net.loads.size(), kFeatureDims[1]);
    for (std::size_t k = 0; k < net.loads.size(); ++k)
        for (std::size_t p = 0; p < 3; ++p) {
            xl.at(k, 2 * p) = s.load_p[k][p];
            xl.at(k, 2 * p + 1) = s.load_q[k][p];
        }
    for (std::size_t k = 0; k < net.pvs.size(); ++k) {
        std::size_t row = net.loads.size();
        for (std::size_t j = 0; j < net.loads.size() && row == net.loads.size(); ++j)
            if (net.loads[j].bus == net.pvs[k].bus) row = j;
        if (row == net.loads.size())
            throw PreconditionError("encode: PV unit " + net.pvs[k].name + " has no load at bus " +
                                    std::to_string(net.pvs[k].bus));
        for (std::size_t p = 0; p < 3; ++p) xl.at(row, 2 * p) -= s.pv_p[k][p];
    }

    auto& xn = g.x[idx(NodeType::Line)] = Dense(net.lines.size(), kFeatureDims[2]);
    for (std::size_t k = 0; k < net.lines.size(); ++k) {
        const auto& l = net.lines[k];
        const double row[15] = {l.r_ohm, l.x_ohm, l.g_us, l.b_us, l.c_par, l.df,  l.R_a, l.X_a,
                                l.R_b,   l.X_b,   l.R_c,  l.X_c,  l.G_ab,  l.G_bc, l.G_ca};
        for (std::size_t c = 0; c < 15; ++c) xn.at(k, c) = row[c];
    }

    const auto& st = net.storages.front();
    auto& xs = g.x[idx(NodeType::Storage)] = Dense(1, kFeatureDims[3]);
    const double srow[9] = {s.soc_before, st.E_max,    st.SoC_max,  st.SoC_min, st.P_max_ch,
                            st.P_max_dis, st.Q_max_ch, st.Q_max_dis, st.C_rate};
    for (std::size_t c = 0; c < 9; ++c) xs.at(0, c) = srow[c];

    auto& xe = g.x[idx(NodeType::Ext)] = Dense(1, kFeatureDims[4]);
    xe.at(0, feat::ext_p_min) = net.ext_grid.P_min;
    xe.at(0, feat::ext_p_max) = net.ext_grid.P_max;
    xe.at(0, feat::ext_q_min) = net.ext_grid.Q_min;
    xe.at(0, feat::ext_q_max) = net.ext_grid.Q_max;

    g.edges.assign(default_relations().size(), Edges{});
    for (std::size_t k = 0; k < net.lines.size(); ++k) {
        add_pair(g.edges, 0, k, net.bus_index(net.lines[k].from_bus));
        add_pair(g.edges, 0, k, net.bus_index(net.lines[k].to_bus));
    }
    for (std::size_t k = 0; k < net.loads.size(); ++k) add_pair(g.edges, 2, k, net.bus_index(net.loads[k].bus));
    add_pair(g.edges, 4, 0, net.bus_index(st.bus));
    add_pair(g.edges, 6, 0, net.bus_index(net.ext_grid.bus));

    if (targets) {
        if (targets->bus.size() != net.buses.size()) throw DimensionError("encode: bus targets do not match buses");
        auto& yb = g.y[0] = Dense(net.buses.size(), kTargetDim);
        for (std::size_t i = 0; i < net.buses.size(); ++i)
            for (std::size_t c = 0; c < kTargetDim; ++c) yb.at(i, c) = targets->bus[i][c];
        auto& ye = g.y[1] = Dense(1, kTargetDim);
        auto& ys = g.y[2] = Dense(1, kTargetDim);
        for (std::size_t c = 0; c < kTargetDim; ++c) {
            ye.at(0, c) = targets->ext[c];
            ys.at(0, c) = targets->storage[c];
        }
    }
    return g;
}

std::vector<std::string> check_graph(const HeteroGraph& g) {
    std::vector<std::string> out;
    const auto& rels = default_relations();
    if (g.edges.size() != rels.size()) {
        out.push_back("expected " + std::to_string(rels.size()) + " relations, found " + std::to_string(g.edges.size()));
        return out;
    }
    for (std::size_t t = 0; t < kNodeTypes; ++t) {
        const auto& x = g.x[t];
        if (x.cols != kFeatureDims[t] && x.rows > 0)
            out.push_back(to_string(static_cast<NodeType>(t)) + " features have " + std::to_string(x.cols) +
                          " columns, expected " + std::to_string(kFeatureDims[t]));
        for (double v : x.v)
            if (!std::isfinite(v)) {
                out.push_back(to_string(static_cast<NodeType>(t)) + " features contain non-finite values");
                break;
            }
    }
    for (std::size_t r = 0; r < rels.size(); ++r) {
        const auto& e = g.edges[r];
        const auto ns = g.count(rels[r].src), nd = g.count(rels[r].dst);
        if (e.src.size() != e.dst.size()) out.push_back(rels[r].name() + ": ragged edge list");
        for (std::size_t k = 0; k < e.size(); ++k)
            if (e.src[k] >= ns || e.dst[k] >= nd) {
                out.push_back(rels[r].name() + ": edge " + std::to_string(k) + " out of range");
                break;
            }
    }
    std::vector<int> deg_out(g.count(NodeType::Line), 0), deg_in(g.count(NodeType::Line), 0);
    for (auto s : g.edges[0].src)
        if (s < deg_out.size()) ++deg_out[s];
    for (auto d : g.edges[1].dst)
        if (d < deg_in.size()) ++deg_in[d];
    for (std::size_t k = 0; k < deg_out.size(); ++k)
        if (deg_out[k] != 2 || deg_in[k] != 2) out.push_back("line " + std::to_string(k) + " is not attached to 2 buses");
    return out;
}

HeteroGraph batch_graphs(const std::vector<const HeteroGraph*>& graphs) {
    if (graphs.empty()) throw SizeError("batch_graphs: no graphs");
    HeteroGraph b;
    b.n_graphs = 0;
    b.edges.assign(default_relations().size(), Edges{});
    const bool targets = graphs.front()->has_targets();
    for (std::size_t t = 0; t < kNodeTypes; ++t) b.x[t] = Dense(0, graphs.front()->x[t].cols);
    for (std::size_t h = 0; h < kHeads; ++h) b.y[h] = Dense(0, targets ? kTargetDim : 0);
    if (!targets)
        for (auto& y : b.y) y = Dense();

    const auto& rels = default_relations();
    for (const auto* g : graphs) {
        if (g->has_targets() != targets) throw DimensionError("batch_graphs: mixing graphs with and without targets");
        std::array<std::size_t, kNodeTypes> off;
        for (std::size_t t = 0; t < kNodeTypes; ++t) off[t] = b.x[t].rows;
        for (std::size_t r = 0; r < rels.size(); ++r) {
            for (std::size_t k = 0; k < g->edges[r].size(); ++k) {
                b.edges[r].src.push_back(g->edges[r].src[k] + off[idx(rels[r].src)]);
                b.edges[r].dst.push_back(g->edges[r].dst[k] + off[idx(rels[r].dst)]);
            }
        }
        for (std::size_t t = 0; t < kNodeTypes; ++t) {
            if (g->x[t].cols != b.x[t].cols) throw DimensionError("batch_graphs: feature widths differ");
            b.x[t].v.insert(b.x[t].v.end(), g->x[t].v.begin(), g->x[t].v.end());
            b.x[t].rows += g->x[t].rows;
        }
        if (targets)
            for (std::size_t h = 0; h < kHeads; ++h) {
                b.y[h].v.insert(b.y[h].v.end(), g->y[h].v.begin(), g->y[h].v.end());
                b.y[h].rows += g->y[h].rows;
            }
        b.n_graphs += g->n_graphs;
    }
    return b;
}

namespace {

ColumnStats column_stats(const std::vector<const Dense*>& blocks, std::size_t cols) {
    ColumnStats s;
    s.mean.assign(cols, 0.0);
    s.std.assign(cols, 0.0);
    std::size_t n = 0;
    for (const auto* d : blocks) {
        for (std::size_t r = 0; r < d->rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) s.mean[c] += d->at(r, c);
        n += d->rows;
    }
    if (n == 0) {
        s.mean.assign(cols, 0.0);
        s.std.assign(cols, 1.0);
        return s;
    }
    for (auto& m : s.mean) m /= static_cast<double>(n);
    for (const auto* d : blocks)
        for (std::size_t r = 0; r < d->rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) {
                const double e = d->at(r, c) - s.mean[c];
                s.std[c] += e * e;
            }
    for (std::size_t c = 0; c < cols; ++c) {
        s.std[c] = std::sqrt(s.std[c] / static_cast<double>(n));
        if (s.std[c] < 1e-8) {
            s.mean[c] = 0.0;
            s.std[c] = 1.0;
        }
    }
    return s;
}

Dense zscore(const Dense& d, const ColumnStats& s) {
    if (d.empty()) return d;
    if (d.cols != s.mean.size()) throw DimensionError("normalization: column count differs from statistics");
    Dense out = d;
    for (std::size_t r = 0; r < d.rows; ++r)
        for (std::size_t c = 0; c < d.cols; ++c) out.at(r, c) = (d.at(r, c) - s.mean[c]) / s.std[c];
    return out;
}

} // namespace

NormStats fit_norm(const std::vector<const HeteroGraph*>& train) {
    if (train.size() < 2)
        throw SizeError("fit_norm: need at least 2 training graphs, got " + std::to_string(train.size()));
    NormStats s;
    for (std::size_t t = 0; t < kNodeTypes; ++t) {
        std::vector<const Dense*> blocks;
        for (const auto* g : train) blocks.push_back(&g->x[t]);
        s.features[t] = column_stats(blocks, train.front()->x[t].cols);
    }
    for (std::size_t h = 0; h < kHeads; ++h) {
        std::vector<const Dense*> blocks;
        for (const auto* g : train) {
            if (!g->has_targets()) throw PreconditionError("fit_norm: training graph without targets");
            blocks.push_back(&g->y[h]);
        }
        s.targets[h] = column_stats(blocks, kTargetDim);
    }
    return s;
}

HeteroGraph apply_norm(const HeteroGraph& g, const NormStats& s) {
    HeteroGraph out = g;
    for (std::size_t t = 0; t < kNodeTypes; ++t) out.x[t] = zscore(g.x[t], s.features[t]);
    for (std::size_t h = 0; h < kHeads; ++h) out.y[h] = zscore(g.y[h], s.targets[h]);
    return out;
}

Dense normalize_targets(const Dense& y, Head h, const NormStats& s) {
    return zscore(y, s.targets[static_cast<std::size_t>(h)]);
}

Dense invert_targets(const Dense& y, Head h, const NormStats& s) {
    const auto& st = s.targets[static_cast<std::size_t>(h)];
    if (y.cols != st.mean.size()) throw DimensionError("invert_targets: column count differs from statistics");
    Dense out = y;
    for (std::size_t r = 0; r < y.rows; ++r)
        for (std::size_t c = 0; c < y.cols; ++c) out.at(r, c) = y.at(r, c) * st.std[c] + st.mean[c];
    return out;
}

std::vector<const HeteroGraph*> Dataset::graphs(Split s) const {
    std::vector<const HeteroGraph*> out;
    for (const auto& smp : samples)
        if (smp.split == s) out.push_back(&smp.graph);
    return out;
}

std::size_t Dataset::count(Split s) const {
    std::size_t n = 0;
    for (const auto& smp : samples) n += smp.split == s;
    return n;
}

DatasetHeader make_header(const GridNetwork& net, double dt_h, std::uint64_t seed) {
    StepState zero;
    zero.load_p.assign(net.loads.size(), {});
    zero.load_q.assign(net.loads.size(), {});
    zero.pv_p.assign(net.pvs.size(), {});
    const auto g = encode(net, zero);
    DatasetHeader h;
    h.network_name = net.name;
    h.base_kva = net.base_kva;
    h.dt_h = dt_h;
    h.eta_ch = net.storages.front().eta_ch;
    h.eta_dis = net.storages.front().eta_dis;
    h.seed = seed;
    for (std::size_t t = 0; t < kNodeTypes; ++t) h.counts[t] = g.x[t].rows;
    h.edges = g.edges;
    return h;
}

namespace {

constexpr std::string_view kDatasetMagic = "BGNNDSET";
constexpr std::uint32_t kDatasetVersion = 1;

void put_dense(binio::Writer& w, const Dense& d) {
    w.u64(d.rows);
    w.u64(d.cols);
    for (double x : d.v) w.f64(x);
}

Dense get_dense(binio::Reader& r) {
    const auto rows = r.u64(), cols = r.u64();
    if (rows > (1u << 24) || cols > 64) throw FormatError("dataset: implausible block shape");
    Dense d(rows, cols);
    for (auto& x : d.v) x = r.f64();
    return d;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
    const auto& h = ds.header;
    binio::Writer w;
    w.raw(kDatasetMagic);
    w.u32(kDatasetVersion);
    w.str(h.network_name);
    w.f64(h.base_kva);
    w.f64(h.dt_h);
    w.f64(h.eta_ch);
    w.f64(h.eta_dis);
    w.u64(h.seed);
    for (auto c : h.counts) w.u64(c);
    const auto& rels = default_relations();
    if (h.edges.size() != rels.size()) throw DimensionError("save_dataset: header edges do not match the schema");
    w.u64(rels.size());
    for (std::size_t r = 0; r < rels.size(); ++r) {
        w.u8(static_cast<std::uint8_t>(rels[r].src));
        w.u8(static_cast<std::uint8_t>(rels[r].dst));
        w.u64(h.edges[r].size());
        for (std::size_t k = 0; k < h.edges[r].size(); ++k) {
            w.u64(h.edges[r].src[k]);
            w.u64(h.edges[r].dst[k]);
        }
    }
    w.u64(ds.samples.size());
    std::ostringstream index;
    index << "record,scenario_id,step,split,price,soc\n";
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const auto& s = ds.samples[i];
        for (std::size_t t = 0; t < kNodeTypes; ++t)
            if (s.graph.x[t].rows != h.counts[t]) throw DimensionError("save_dataset: sample node counts differ");
        w.u64(s.scenario_id);
        w.u64(s.step);
        w.u8(static_cast<std::uint8_t>(s.split));
        w.f64(s.price);
        w.f64(s.soc);
        for (const auto& x : s.graph.x) put_dense(w, x);
        for (const auto& y : s.graph.y) put_dense(w, y);
        index << i << ',' << s.scenario_id << ',' << s.step << ',' << (s.split == Split::Train ? "train" : "val")
              << ',' << fmt(s.price) << ',' << fmt(s.soc) << '\n';
    }
    w.u64(binio::fnv1a(w.bytes()));
    binio::write_file(path, w.bytes());
    auto idx_path = path;
    idx_path += ".index.csv";
    binio::write_file(idx_path, index.str());
}

Dataset load_dataset(const std::filesystem::path& path) {
    const std::string bytes = binio::read_file(path);
    const std::string what = "dataset " + path.string();
    if (bytes.size() < kDatasetMagic.size() + 12) throw FormatError(what + ": file too short");
    {
        binio::Reader tail(std::string_view(bytes).substr(bytes.size() - 8), what);
        if (tail.u64() != binio::fnv1a(std::string_view(bytes).substr(0, bytes.size() - 8)))
            throw FormatError(what + ": checksum mismatch (corrupt or truncated)");
    }
    binio::Reader r(std::string_view(bytes).substr(0, bytes.size() - 8), what);
    if (r.raw(kDatasetMagic.size()) != kDatasetMagic) throw FormatError(what + ": bad magic");
    if (auto v = r.u32(); v != kDatasetVersion)
        throw FormatError(what + ": unsupported version " + std::to_string(v));
    Dataset ds;
    auto& h = ds.header;
    h.network_name = r.str();
    h.base_kva = r.f64();
    h.dt_h = r.f64();
    h.eta_ch = r.f64();
    h.eta_dis = r.f64();
    h.seed = r.u64();
    for (auto& c : h.counts) c = r.u64();
    const auto& rels = default_relations();
    if (r.u64() != rels.size()) throw SchemaError(what + ": relation count differs from schema");
    h.edges.resize(rels.size());
    for (std::size_t k = 0; k < rels.size(); ++k) {
        const auto src = r.u8(), dst = r.u8();
        if (src != static_cast<std::uint8_t>(rels[k].src) || dst != static_cast<std::uint8_t>(rels[k].dst))
            throw SchemaError(what + ": relation " + std::to_string(k) + " differs from schema");
        const auto n = r.u64();
        for (std::uint64_t e = 0; e < n; ++e) {
            h.edges[k].src.push_back(r.u64());
            h.edges[k].dst.push_back(r.u64());
        }
    }
    const auto n = r.u64();
    ds.samples.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        Sample s;
        s.scenario_id = r.u64();
        s.step = r.u64();
        const auto split = r.u8();
        if (split > 1) throw FormatError(what + ": bad split tag");
        s.split = static_cast<Split>(split);
        s.price = r.f64();
        s.soc = r.f64();
        for (auto& x : s.graph.x) x = get_dense(r);
        for (auto& y : s.graph.y) y = get_dense(r);
        s.graph.edges = h.edges;
        ds.samples.push_back(std::move(s));
    }
    if (r.remaining() != 0) throw FormatError(what + ": trailing bytes");
    return ds;
}

} // namespace bessgnn
