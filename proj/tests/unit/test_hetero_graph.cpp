#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "bessgnn/binio.hpp"
#include "bessgnn/errors.hpp"
#include "bessgnn/hetero_graph.hpp"
#include "bessgnn/random.hpp"

using namespace bessgnn;

namespace {

std::vector<LabeledStep> labeled_day(std::uint64_t id) {
    auto net = build_cigre18();
    auto scn = sample_scenario(net, id, 8);
    auto lab = label_scenario(net, scn, optimize_dispatch(net, scn, 51));
    REQUIRE(lab.accepted);
    return lab.steps;
}

} // namespace

TEST_CASE("cigre18 encoding shape") {
    auto net = build_cigre18();
    auto steps = labeled_day(0);
    auto g = encode(net, steps[10].state, &steps[10].targets);
    CHECK(g.count(NodeType::Bus) == 18);
    CHECK(g.count(NodeType::Line) == 17);
    CHECK(g.count(NodeType::Load) == 5);
    CHECK(g.count(NodeType::Storage) == 1);
    CHECK(g.count(NodeType::Ext) == 1);
    for (std::size_t t = 0; t < kNodeTypes; ++t) CHECK(g.x[t].cols == kFeatureDims[t]);
    CHECK(check_graph(g).empty());
    CHECK(g.edges.size() == 8);
    CHECK(g.edges[0].size() == 34);
    CHECK(g.y[0].rows == 18);

    const auto s = net.slack_index();
    const auto& xb = g.features(NodeType::Bus);
    CHECK(xb.at(s, 0) == 0.4);
    CHECK(xb.at(s, 1) == 1.1);
    CHECK(xb.at(s, 2) == 0.9);
    CHECK(xb.at(s, 3) == 2.0);
    CHECK(xb.at(3, 3) == 0.0);

    CHECK(g.features(NodeType::Storage).at(0, feat::st_soc) == steps[10].state.soc_before);
    CHECK(g.features(NodeType::Ext).at(0, feat::ext_p_max) == net.ext_grid.P_max);
}

TEST_CASE("every line node touches exactly two buses") {
    auto net = build_cigre18();
    auto g = encode(net, labeled_day(0)[0].state);
    std::vector<int> deg(17, 0);
    for (auto s : g.edges[0].src) ++deg[s];
    for (int d : deg) CHECK(d == 2);
    // reverse relation mirrors the forward one
    for (std::size_t k = 0; k < g.edges[0].size(); ++k) {
        CHECK(g.edges[1].src[k] == g.edges[0].dst[k]);
        CHECK(g.edges[1].dst[k] == g.edges[0].src[k]);
    }
}

TEST_CASE("load rows carry net demand after PV") {
    auto net = build_cigre18();
    auto st = labeled_day(0)[12].state; // midday
    auto g = encode(net, st);
    const auto& xl = g.features(NodeType::Load);
    CHECK(xl.at(1, 0) == doctest::Approx(st.load_p[1][0] - st.pv_p[1][0]));
    CHECK(xl.at(1, 5) == st.load_q[1][2]);

    auto orphan = net;
    orphan.pvs[0].bus = 4;
    CHECK_THROWS_AS(encode(orphan, st), PreconditionError);
}

TEST_CASE("counts and relations depend only on topology") {
    auto net = build_cigre18();
    auto steps = labeled_day(2);
    auto a = encode(net, steps[0].state);
    auto b = encode(net, steps[17].state);
    CHECK(a.edges == b.edges);
    for (std::size_t t = 0; t < kNodeTypes; ++t) CHECK(a.x[t].rows == b.x[t].rows);
}

TEST_CASE("bus permutation permutes rows consistently") {
    auto net = build_cigre18();
    auto st = labeled_day(0)[5].state;
    auto g = encode(net, st);
    auto perm_net = net;
    std::vector<std::size_t> perm(18);
    for (std::size_t i = 0; i < 18; ++i) perm[i] = i;
    Rng rng(3);
    rng.shuffle(perm);
    for (std::size_t i = 0; i < 18; ++i) perm_net.buses[i] = net.buses[perm[i]];
    auto h = encode(perm_net, st);
    // bus row i of h is bus row perm[i] of g
    for (std::size_t i = 0; i < 18; ++i)
        for (std::size_t c = 0; c < 4; ++c)
            CHECK(h.features(NodeType::Bus).at(i, c) == g.features(NodeType::Bus).at(perm[i], c));
    std::vector<std::size_t> inv(18);
    for (std::size_t i = 0; i < 18; ++i) inv[perm[i]] = i;
    for (std::size_t r = 0; r < 8; ++r) {
        const auto& rel = default_relations()[r];
        for (std::size_t k = 0; k < g.edges[r].size(); ++k) {
            auto s = g.edges[r].src[k], d = g.edges[r].dst[k];
            if (rel.src == NodeType::Bus) s = inv[s];
            if (rel.dst == NodeType::Bus) d = inv[d];
            CHECK(h.edges[r].src[k] == s);
            CHECK(h.edges[r].dst[k] == d);
        }
    }
}

TEST_CASE("normalization statistics") {
    auto net = build_cigre18();
    std::vector<HeteroGraph> gs;
    for (const auto& ls : labeled_day(1)) gs.push_back(encode(net, ls.state, &ls.targets));
    std::vector<const HeteroGraph*> ptr;
    for (const auto& g : gs) ptr.push_back(&g);
    auto stats = fit_norm(ptr);

    // constant column (V_rated) passes through unchanged
    CHECK(stats.features[idx(NodeType::Bus)].std[0] == 1.0);
    CHECK(stats.features[idx(NodeType::Bus)].mean[0] == 0.0);

    std::vector<HeteroGraph> normed;
    for (const auto& g : gs) normed.push_back(apply_norm(g, stats));
    CHECK(normed[3].features(NodeType::Bus).at(0, 0) == gs[3].features(NodeType::Bus).at(0, 0));

    for (std::size_t t = 0; t < kNodeTypes; ++t) {
        const auto& cs = stats.features[t];
        for (std::size_t c = 0; c < cs.mean.size(); ++c) {
            if (cs.std[c] == 1.0 && cs.mean[c] == 0.0) continue;
            double sum = 0.0;
            std::size_t n = 0;
            for (const auto& g : normed)
                for (std::size_t r = 0; r < g.x[t].rows; ++r, ++n) sum += g.x[t].at(r, c);
            CHECK(std::abs(sum / static_cast<double>(n)) < 1e-10);
        }
    }
    for (const auto& g : normed) CHECK(check_graph(g).empty());

    for (std::size_t h = 0; h < kHeads; ++h) {
        const auto head = static_cast<Head>(h);
        auto y = gs[7].y[h];
        auto back = invert_targets(normalize_targets(y, head, stats), head, stats);
        for (std::size_t i = 0; i < y.v.size(); ++i) CHECK(std::abs(back.v[i] - y.v[i]) < 1e-12);
    }

    CHECK_THROWS_AS(fit_norm({ptr[0]}), SizeError);
}

TEST_CASE("batching is a disjoint union") {
    auto net = build_cigre18();
    auto steps = labeled_day(0);
    auto a = encode(net, steps[0].state, &steps[0].targets);
    auto b = encode(net, steps[1].state, &steps[1].targets);
    auto u = batch_graphs({&a, &b});
    CHECK(u.n_graphs == 2);
    CHECK(u.count(NodeType::Bus) == 36);
    CHECK(u.count(NodeType::Storage) == 2);
    CHECK(u.y[0].rows == 36);
    CHECK(check_graph(u).empty());
    CHECK(u.edges[0].size() == 68);
    CHECK(u.edges[0].src[34] == a.edges[0].src[0] + 17);
    CHECK(u.edges[0].dst[34] == a.edges[0].dst[0] + 18);
    CHECK(u.features(NodeType::Load).at(5, 0) == b.features(NodeType::Load).at(0, 0));
}

TEST_CASE("dataset file round trip and corruption") {
    auto net = build_cigre18();
    Dataset ds;
    ds.header = make_header(net, 1.0, 99);
    for (const auto& ls : labeled_day(4)) {
        Sample s;
        s.scenario_id = ls.state.scenario_id;
        s.step = ls.state.step;
        s.split = ls.state.step % 5 == 0 ? Split::Val : Split::Train;
        s.price = ls.state.price;
        s.soc = ls.state.soc_before;
        s.graph = encode(net, ls.state, &ls.targets);
        ds.samples.push_back(std::move(s));
    }
    auto path = std::filesystem::temp_directory_path() / "bessgnn_ds_rt.bin";
    save_dataset(ds, path);
    auto back = load_dataset(path);
    REQUIRE(back.samples.size() == ds.samples.size());
    CHECK(back.header.counts == ds.header.counts);
    CHECK(back.header.edges == ds.header.edges);
    CHECK(back.header.seed == 99);
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        CHECK(back.samples[i].graph.x == ds.samples[i].graph.x);
        CHECK(back.samples[i].graph.y == ds.samples[i].graph.y);
        CHECK(back.samples[i].split == ds.samples[i].split);
        CHECK(back.samples[i].soc == ds.samples[i].soc);
    }
    CHECK(back.count(Split::Val) == 5);

    auto index = path;
    index += ".index.csv";
    std::ifstream in(index);
    std::string header;
    std::getline(in, header);
    CHECK(header == "record,scenario_id,step,split,price,soc");

    auto bytes = binio::read_file(path);
    binio::write_file(path, bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(load_dataset(path), FormatError);
    bytes[100] ^= 0x5a;
    binio::write_file(path, bytes);
    CHECK_THROWS_AS(load_dataset(path), FormatError);
    std::filesystem::remove(path);
    std::filesystem::remove(index);
}
