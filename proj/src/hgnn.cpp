#include "bessgnn/hgnn.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "bessgnn/binio.hpp"
#include "bessgnn/errors.hpp"
#include "bessgnn/random.hpp"

namespace bessgnn {

using nn::Tensor;

std::string to_string(Arch a) {
    switch (a) {
    case Arch::GCN: return "gcn";
    case Arch::SAGE: return "sage";
    case Arch::GAT: return "gat";
    }
    throw InvariantError("unknown architecture");
}

Arch arch_from_string(const std::string& s) {
    std::string l = s;
    std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (l == "gcn") return Arch::GCN;
    if (l == "sage" || l == "graphsage") return Arch::SAGE;
    if (l == "gat") return Arch::GAT;
    throw ParameterError("unknown architecture '" + s + "' (expected gcn, sage, or gat)");
}

void ModelConfig::check() const {
    if (layers < 1) throw ParameterError("model: layer count must be at least 1");
    if (hidden < 4) throw ParameterError("model: hidden width must be at least 4");
    if (arch == Arch::GAT && (heads < 1 || hidden % heads != 0))
        throw ParameterError("model: hidden width " + std::to_string(hidden) + " not divisible by " +
                             std::to_string(heads) + " attention heads");
}

const Tensor& ModelState::param(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw SchemaError("model has no parameter '" + name + "'");
    return params[it->second];
}

Tensor& ModelState::param(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw SchemaError("model has no parameter '" + name + "'");
    return params[it->second];
}

bool ModelState::has(const std::string& name) const { return index_.count(name) > 0; }

std::size_t ModelState::count_prefix(const std::string& prefix) const {
    return static_cast<std::size_t>(
        std::count_if(names.begin(), names.end(), [&](const auto& n) { return n.rfind(prefix, 0) == 0; }));
}

std::size_t ModelState::n_scalars() const {
    std::size_t n = 0;
    for (const auto& p : params) n += p.size();
    return n;
}

void ModelState::reindex() {
    index_.clear();
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (!index_.emplace(names[i], i).second) throw InvariantError("duplicate parameter name " + names[i]);
    }
}

namespace {

bool feeds_head(NodeType t) { return t == NodeType::Bus || t == NodeType::Ext || t == NodeType::Storage; }

bool updated_at(const ModelConfig& c, std::size_t layer, NodeType t) {
    return layer + 1 < c.layers || feeds_head(t);
}

std::string lname(std::size_t l) { return "l" + std::to_string(l); }

} // namespace

ModelState init_model(const ModelConfig& cfg, const GraphSchema& schema) {
    cfg.check();
    const auto& canon = default_relations();
    for (std::size_t i = 0; i < schema.relations.size(); ++i) {
        const auto& r = schema.relations[i];
        if (std::find(canon.begin(), canon.end(), r) == canon.end())
            throw SchemaError("init_model: unknown relation " + r.name());
        for (std::size_t j = 0; j < i; ++j)
            if (schema.relations[j] == r) throw SchemaError("init_model: duplicate relation " + r.name());
    }
    for (std::size_t t = 0; t < kNodeTypes; ++t)
        if (schema.dims[t] == 0) throw SchemaError("init_model: zero feature width for " + to_string(NodeType(t)));

    ModelState s;
    s.config = cfg;
    s.schema = schema;
    const std::size_t d = cfg.hidden;
    std::uint64_t counter = 0;
    auto weight = [&](const std::string& name, nn::Shape shape) {
        s.names.push_back(name);
        s.params.push_back(nn::xavier_init(shape, derive_seed(cfg.seed, counter++)));
    };
    auto bias = [&](const std::string& name, std::size_t n) {
        s.names.push_back(name);
        s.params.push_back(Tensor::zeros({1, n}, true));
        ++counter;
    };

    for (std::size_t t = 0; t < kNodeTypes; ++t) {
        const auto tn = to_string(NodeType(t));
        weight("in." + tn + ".W", {schema.dims[t], d});
        bias("in." + tn + ".b", d);
    }
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        for (const auto& r : schema.relations) {
            if (!updated_at(cfg, l, r.dst)) continue;
            weight(lname(l) + ".rel." + r.name() + ".W", {d, d});
            if (cfg.arch == Arch::GAT) weight(lname(l) + ".att." + r.name(), {1, 2 * d});
        }
        for (std::size_t t = 0; t < kNodeTypes; ++t) {
            if (!updated_at(cfg, l, NodeType(t))) continue;
            const auto tn = to_string(NodeType(t));
            weight(lname(l) + ".self." + tn + ".W", {d, d});
            bias(lname(l) + ".self." + tn + ".b", d);
            weight(lname(l) + ".agg." + tn + ".W", {d, d});
        }
    }
    for (std::size_t h = 0; h < kHeads; ++h) {
        const auto hn = "head." + to_string(Head(h));
        weight(hn + ".W1", {d, d});
        bias(hn + ".b1", d);
        weight(hn + ".W2", {d, kTargetDim});
        bias(hn + ".b2", kTargetDim);
    }
    s.reindex();
    // identity normalization until fit on data
    for (std::size_t t = 0; t < kNodeTypes; ++t)
        s.norm.features[t] = ColumnStats{std::vector<double>(schema.dims[t], 0.0), std::vector<double>(schema.dims[t], 1.0)};
    for (auto& ts : s.norm.targets)
        ts = ColumnStats{std::vector<double>(kTargetDim, 0.0), std::vector<double>(kTargetDim, 1.0)};
    return s;
}

namespace {

Tensor dense_tensor(const Dense& d) { return Tensor({d.rows, d.cols}, d.v); }

struct Capture {
    std::size_t layer = static_cast<std::size_t>(-1);
    std::size_t rel = static_cast<std::size_t>(-1);
    Tensor alpha;
};

void check_graph_schema(const ModelState& s, const HeteroGraph& g) {
    if (g.edges.size() != default_relations().size())
        throw SchemaError("forward: graph has " + std::to_string(g.edges.size()) + " relations, model expects " +
                          std::to_string(default_relations().size()));
    for (std::size_t t = 0; t < kNodeTypes; ++t) {
        if (g.x[t].rows == 0) throw SchemaError("forward: graph has no " + to_string(NodeType(t)) + " nodes");
        if (g.x[t].cols != s.schema.dims[t])
            throw SchemaError("forward: " + to_string(NodeType(t)) + " features have width " +
                              std::to_string(g.x[t].cols) + ", model expects " + std::to_string(s.schema.dims[t]));
    }
}

std::size_t relation_slot(const Relation& r) {
    const auto& canon = default_relations();
    return static_cast<std::size_t>(std::find(canon.begin(), canon.end(), r) - canon.begin());
}

std::array<Tensor, kNodeTypes> run_layers(const ModelState& s, const HeteroGraph& g, Capture* cap) {
    check_graph_schema(s, g);
    const auto& cfg = s.config;
    const std::size_t d = cfg.hidden;

    std::array<Tensor, kNodeTypes> h;
    for (std::size_t t = 0; t < kNodeTypes; ++t) {
        const auto tn = to_string(NodeType(t));
        h[t] = nn::add_row(nn::matmul(dense_tensor(g.x[t]), s.param("in." + tn + ".W")), s.param("in." + tn + ".b"));
    }

    // head expansion [H x d]: row k is 1 on chunk k
    Tensor expand;
    if (cfg.arch == Arch::GAT) {
        const std::size_t H = cfg.heads, w = d / H;
        std::vector<double> e(H * d, 0.0);
        for (std::size_t k = 0; k < H; ++k)
            for (std::size_t c = k * w; c < (k + 1) * w; ++c) e[k * d + c] = 1.0;
        expand = Tensor({H, d}, std::move(e));
    }

    for (std::size_t l = 0; l < cfg.layers; ++l) {
        std::array<Tensor, kNodeTypes> m;
        for (const auto& rel : s.schema.relations) {
            const auto dst_t = idx(rel.dst), src_t = idx(rel.src);
            if (!updated_at(cfg, l, rel.dst)) continue;
            const auto slot = relation_slot(rel);
            const Edges& e = g.edges[slot];
            if (e.size() == 0) continue;
            const auto rn = lname(l) + ".rel." + rel.name();
            const std::size_t n_dst = g.count(rel.dst), n_src = g.count(rel.src);

            Tensor z = nn::matmul(h[src_t], s.param(rn + ".W"));
            Tensor zg = nn::gather_rows(z, e.src);
            Tensor msg;
            if (cfg.arch == Arch::GAT) {
                const auto& a = s.param(lname(l) + ".att." + rel.name());
                std::vector<std::size_t> lo(d), hi(d);
                std::iota(lo.begin(), lo.end(), 0);
                std::iota(hi.begin(), hi.end(), d);
                Tensor bs = nn::head_blocks(nn::select_cols(a, lo), cfg.heads);
                Tensor bd = nn::head_blocks(nn::select_cols(a, hi), cfg.heads);
                Tensor score = nn::add(nn::gather_rows(nn::matmul(z, bs), e.src),
                                       nn::gather_rows(nn::matmul(h[dst_t], bd), e.dst));
                Tensor alpha = nn::segment_softmax(nn::leaky_relu(score, 0.2), e.dst, n_dst);
                if (cap && cap->layer == l && cap->rel == slot) cap->alpha = alpha;
                msg = nn::mul(zg, nn::matmul(alpha, expand));
            } else {
                std::vector<double> deg_in(n_dst, 0.0), deg_out(n_src, 0.0), coef(e.size());
                for (std::size_t k = 0; k < e.size(); ++k) {
                    deg_in[e.dst[k]] += 1.0;
                    deg_out[e.src[k]] += 1.0;
                }
                for (std::size_t k = 0; k < e.size(); ++k)
                    coef[k] = cfg.arch == Arch::GCN ? 1.0 / std::sqrt(deg_in[e.dst[k]] * deg_out[e.src[k]])
                                                    : 1.0 / deg_in[e.dst[k]];
                msg = nn::mul_col(zg, Tensor::column(std::move(coef)));
            }
            Tensor agg = nn::scatter_add_rows(msg, e.dst, n_dst);
            m[dst_t] = m[dst_t].defined() ? nn::add(m[dst_t], agg) : agg;
        }
        std::array<Tensor, kNodeTypes> next = h;
        for (std::size_t t = 0; t < kNodeTypes; ++t) {
            if (!updated_at(cfg, l, NodeType(t))) continue;
            const auto base = lname(l) + ".self." + to_string(NodeType(t));
            Tensor pre = nn::add_row(nn::matmul(h[t], s.param(base + ".W")), s.param(base + ".b"));
            if (m[t].defined())
                pre = nn::add(pre, nn::matmul(m[t], s.param(lname(l) + ".agg." + to_string(NodeType(t)) + ".W")));
            next[t] = nn::relu(pre);
        }
        h = std::move(next);
    }
    return h;
}

} // namespace

std::array<Tensor, kNodeTypes> embeddings(const ModelState& state, const HeteroGraph& g) {
    return run_layers(state, g, nullptr);
}

Tensor attention_weights(const ModelState& state, const HeteroGraph& g, std::size_t layer, std::size_t rel) {
    if (state.config.arch != Arch::GAT) throw PreconditionError("attention_weights: model is not GAT");
    Capture cap{layer, rel, {}};
    run_layers(state, g, &cap);
    if (!cap.alpha.defined()) throw BoundsError("attention_weights: no attention at that layer and relation");
    return cap.alpha;
}

ForwardOutput forward(const ModelState& state, const HeteroGraph& g) {
    auto h = run_layers(state, g, nullptr);
    ForwardOutput out;
    for (std::size_t k = 0; k < kHeads; ++k) {
        const Head head = static_cast<Head>(k);
        const auto hn = "head." + to_string(head);
        Tensor hid = nn::relu(nn::add_row(nn::matmul(h[idx(head_node(head))], state.param(hn + ".W1")),
                                          state.param(hn + ".b1")));
        out.normalized[k] = nn::add_row(nn::matmul(hid, state.param(hn + ".W2")), state.param(hn + ".b2"));
        const auto& ts = state.norm.targets[k];
        out.raw[k] = nn::add_row(nn::mul_row(out.normalized[k], Tensor::row(ts.std)), Tensor::row(ts.mean));
    }
    return out;
}

Predictions predict(const ModelState& state, const HeteroGraph& g) {
    auto out = forward(state, g);
    Predictions p;
    for (std::size_t k = 0; k < kHeads; ++k) {
        const auto& t = out.raw[k];
        p.y[k] = Dense(t.rows(), t.cols());
        std::copy(t.data().begin(), t.data().end(), p.y[k].v.begin());
    }
    return p;
}

// ---- checkpoint ------------------------------------------------------------

namespace {

constexpr std::string_view kCkptMagic = "BGNNCKPT";
constexpr std::uint32_t kCkptVersion = 1;

void put_stats(binio::Writer& w, const ColumnStats& s) {
    w.f64s(s.mean);
    w.f64s(s.std);
}

ColumnStats get_stats(binio::Reader& r) {
    ColumnStats s;
    s.mean = r.f64s();
    s.std = r.f64s();
    if (s.mean.size() != s.std.size()) throw FormatError("checkpoint: ragged normalization statistics");
    return s;
}

} // namespace

std::string checkpoint_bytes(const Checkpoint& ck) {
    const auto& m = ck.model;
    binio::Writer w;
    w.raw(kCkptMagic);
    w.u32(kCkptVersion);
    w.u8(static_cast<std::uint8_t>(m.config.arch));
    w.u64(m.config.hidden);
    w.u64(m.config.layers);
    w.u64(m.config.heads);
    w.u64(m.config.seed);
    for (auto d : m.schema.dims) w.u64(d);
    w.u64(m.schema.relations.size());
    for (const auto& r : m.schema.relations) {
        w.u8(static_cast<std::uint8_t>(r.src));
        w.u8(static_cast<std::uint8_t>(r.dst));
    }
    for (const auto& s : m.norm.features) put_stats(w, s);
    for (const auto& s : m.norm.targets) put_stats(w, s);
    w.u64(m.params.size());
    for (std::size_t i = 0; i < m.params.size(); ++i) {
        w.str(m.names[i]);
        const auto& shape = m.params[i].shape();
        w.u64(shape.size());
        for (auto x : shape) w.u64(x);
        const auto data = m.params[i].data();
        w.f64s(std::vector<double>(data.begin(), data.end()));
    }
    w.u8(ck.adam ? 1 : 0);
    if (ck.adam) {
        if (ck.adam->m.size() != m.params.size() || ck.adam->v.size() != m.params.size())
            throw DimensionError("checkpoint: optimizer state does not match parameters");
        w.u64(static_cast<std::uint64_t>(ck.adam->steps));
        w.f64(ck.adam->lr);
        for (std::size_t i = 0; i < m.params.size(); ++i) {
            w.f64s(ck.adam->m[i]);
            w.f64s(ck.adam->v[i]);
        }
    }
    w.u64(ck.epoch);
    w.f64(ck.lambda_phys);
    w.f64(ck.best_val);
    w.u64(binio::fnv1a(w.bytes()));
    return w.bytes();
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
    binio::write_file(path, checkpoint_bytes(ck));
}

Checkpoint checkpoint_from_bytes(const std::string& bytes, const std::string& what) {
    if (bytes.size() < kCkptMagic.size() + 12) throw FormatError(what + ": file too short");
    if (std::string_view(bytes).substr(0, kCkptMagic.size()) != kCkptMagic) throw FormatError(what + ": bad magic");
    {
        binio::Reader tail(std::string_view(bytes).substr(bytes.size() - 8), what);
        if (tail.u64() != binio::fnv1a(std::string_view(bytes).substr(0, bytes.size() - 8)))
            throw FormatError(what + ": checksum mismatch (corrupt or truncated)");
    }
    binio::Reader r(std::string_view(bytes).substr(0, bytes.size() - 8), what);
    r.raw(kCkptMagic.size());
    if (auto v = r.u32(); v != kCkptVersion) throw FormatError(what + ": unsupported version " + std::to_string(v));

    ModelConfig cfg;
    const auto arch = r.u8();
    if (arch > 2) throw FormatError(what + ": unknown architecture tag");
    cfg.arch = static_cast<Arch>(arch);
    cfg.hidden = r.u64();
    cfg.layers = r.u64();
    cfg.heads = r.u64();
    cfg.seed = r.u64();
    GraphSchema schema;
    for (auto& d : schema.dims) d = r.u64();
    const auto n_rel = r.u64();
    if (n_rel > 64) throw FormatError(what + ": implausible relation count");
    schema.relations.clear();
    for (std::uint64_t i = 0; i < n_rel; ++i) {
        const auto src = r.u8(), dst = r.u8();
        if (src >= kNodeTypes || dst >= kNodeTypes) throw FormatError(what + ": bad relation tag");
        schema.relations.push_back({NodeType(src), NodeType(dst)});
    }

    Checkpoint ck;
    ck.model = init_model(cfg, schema);
    for (auto& s : ck.model.norm.features) s = get_stats(r);
    for (auto& s : ck.model.norm.targets) s = get_stats(r);
    const auto n = r.u64();
    if (n != ck.model.params.size())
        throw FormatError(what + ": " + std::to_string(n) + " parameters, config implies " +
                          std::to_string(ck.model.params.size()));
    for (std::size_t i = 0; i < n; ++i) {
        const auto name = r.str();
        if (name != ck.model.names[i]) throw FormatError(what + ": parameter " + name + " out of place");
        const auto rank = r.u64();
        nn::Shape shape(rank);
        for (auto& x : shape) x = r.u64();
        if (shape != ck.model.params[i].shape()) throw FormatError(what + ": shape mismatch for " + name);
        const auto values = r.f64s();
        auto dst = ck.model.params[i].mutable_data();
        if (values.size() != dst.size()) throw FormatError(what + ": size mismatch for " + name);
        std::copy(values.begin(), values.end(), dst.begin());
    }
    if (r.u8()) {
        AdamSnapshot a;
        a.steps = static_cast<std::int64_t>(r.u64());
        a.lr = r.f64();
        for (std::size_t i = 0; i < n; ++i) {
            a.m.push_back(r.f64s());
            a.v.push_back(r.f64s());
        }
        ck.adam = std::move(a);
    }
    ck.epoch = r.u64();
    ck.lambda_phys = r.f64();
    ck.best_val = r.f64();
    if (r.remaining() != 0) throw FormatError(what + ": trailing bytes");
    return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return checkpoint_from_bytes(binio::read_file(path), "checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
    auto ck = load_checkpoint(path);
    const auto& got = ck.model.config;
    if (!(got == expected)) {
        throw ConfigMismatchError("checkpoint " + path.string() + " was trained as " + to_string(got.arch) +
                                  " (d_h=" + std::to_string(got.hidden) + ", K=" + std::to_string(got.layers) +
                                  "), requested " + to_string(expected.arch) + " (d_h=" +
                                  std::to_string(expected.hidden) + ", K=" + std::to_string(expected.layers) + ")");
    }
    return ck;
}

} // namespace bessgnn
