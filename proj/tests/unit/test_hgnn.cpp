#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "bessgnn/binio.hpp"
#include "bessgnn/errors.hpp"
#include "bessgnn/hgnn.hpp"
#include "support/gradcheck.hpp"
#include "support/toy.hpp"

using namespace bessgnn;
using nn::Tensor;

namespace {

ModelConfig config(Arch a, std::size_t d = 16, std::size_t k = 2, std::uint64_t seed = 1) {
    ModelConfig c;
    c.arch = a;
    c.hidden = d;
    c.layers = k;
    c.heads = 4;
    c.seed = seed;
    return c;
}

Tensor training_loss(const ModelState& s, const HeteroGraph& g) {
    auto out = forward(s, g);
    Tensor total = Tensor::scalar(0.0);
    for (std::size_t k = 0; k < kHeads; ++k)
        total = nn::add(total, nn::mse(out.normalized[k], Tensor({g.y[k].rows, g.y[k].cols}, g.y[k].v)));
    return total;
}

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

} // namespace

TEST_CASE("initialization is deterministic by seed") {
    auto a = init_model(config(Arch::GAT));
    auto b = init_model(config(Arch::GAT));
    auto c = init_model(config(Arch::GAT, 16, 2, 2));
    REQUIRE(a.names == b.names);
    bool differs = false;
    for (std::size_t i = 0; i < a.params.size(); ++i) {
        CHECK(values(a.params[i]) == values(b.params[i]));
        differs |= values(a.params[i]) != values(c.params[i]);
    }
    CHECK(differs);
}

TEST_CASE("parameter counting") {
    // the last layer only updates node types that feed a head (bus, ext, storage)
    auto gcn = init_model(config(Arch::GCN, 64, 2));
    CHECK(gcn.count_prefix("l0.rel.") == 8);
    CHECK(gcn.count_prefix("l1.rel.") == 6);
    CHECK(gcn.count_prefix("l0.self.") == 2 * 5); // W and b
    CHECK(gcn.count_prefix("l1.self.") == 2 * 3);
    CHECK(gcn.count_prefix("l0.agg.") == 5);
    CHECK(gcn.count_prefix("l1.agg.") == 3);
    CHECK(gcn.count_prefix("in.") == 2 * 5);
    CHECK(gcn.count_prefix("head.") == 4 * 3);
    CHECK(gcn.count_prefix("l0.att.") == 0);
    CHECK(gcn.param("l0.rel.line->bus.W").shape() == nn::Shape{64, 64});
    CHECK(gcn.param("in.line.W").shape() == nn::Shape{15, 64});

    auto gat = init_model(config(Arch::GAT, 64, 2));
    CHECK(gat.count_prefix("l0.att.") == 8);
    CHECK(gat.count_prefix("l1.att.") == 6);
    CHECK(gat.params.size() == gcn.params.size() + 14);

    GraphSchema bad;
    bad.relations.push_back({NodeType::Load, NodeType::Line});
    CHECK_THROWS_AS(init_model(config(Arch::GCN), bad), SchemaError);
    GraphSchema dup;
    dup.relations.push_back(dup.relations[0]);
    CHECK_THROWS_AS(init_model(config(Arch::GCN), dup), SchemaError);
    CHECK_THROWS_AS(init_model(config(Arch::GAT, 18)), ParameterError);
    CHECK_THROWS_AS(init_model(config(Arch::GCN, 16, 0)), ParameterError);
}

TEST_CASE("node without in-relations depends only on its self path") {
    auto g = testing::random_toy_graph(3);
    g.edges[4] = Edges{}; // storage->bus
    g.edges[5] = Edges{}; // bus->storage
    auto s = init_model(config(Arch::SAGE, 8, 2));
    auto before = embeddings(s, g)[idx(NodeType::Storage)];
    auto h = g;
    for (auto& v : h.x[idx(NodeType::Bus)].v) v += 0.37;
    auto after = embeddings(s, h)[idx(NodeType::Storage)];
    CHECK(values(before) == values(after));
    // and it still differs from a graph where the edges exist
    auto linked = embeddings(s, testing::random_toy_graph(3))[idx(NodeType::Storage)];
    CHECK(values(linked) != values(before));
}

TEST_CASE("zero relation weights reduce to the no-message ablation") {
    auto g = testing::random_toy_graph(4);
    auto s = init_model(config(Arch::GCN, 8, 1));
    for (std::size_t i = 0; i < s.names.size(); ++i)
        if (s.names[i].find(".rel.") != std::string::npos)
            for (auto& v : s.params[i].mutable_data()) v = 0.0;
    auto out = forward(s, g);
    for (std::size_t k = 0; k < kHeads; ++k) {
        const auto head = static_cast<Head>(k);
        const auto t = to_string(head_node(head));
        const auto hn = "head." + to_string(head);
        Tensor x({g.x[idx(head_node(head))].rows, g.x[idx(head_node(head))].cols}, g.x[idx(head_node(head))].v);
        Tensor p = nn::add_row(nn::matmul(x, s.param("in." + t + ".W")), s.param("in." + t + ".b"));
        Tensor e = nn::relu(nn::add_row(nn::matmul(p, s.param("l0.self." + t + ".W")), s.param("l0.self." + t + ".b")));
        Tensor hid = nn::relu(nn::add_row(nn::matmul(e, s.param(hn + ".W1")), s.param(hn + ".b1")));
        Tensor y = nn::add_row(nn::matmul(hid, s.param(hn + ".W2")), s.param(hn + ".b2"));
        CHECK(values(out.normalized[k]) == values(y));
    }
}

TEST_CASE("gat attention") {
    auto net = build_cigre18();
    auto g = encode(net, [&] {
        StepState st;
        st.load_p.assign(5, {1.0, 2.0, 3.0});
        st.load_q.assign(5, {0.5, 0.5, 0.5});
        st.pv_p.assign(5, {0.1, 0.1, 0.1});
        st.soc_before = 0.4;
        return st;
    }());
    for (auto& block : g.x)
        for (auto& v : block.v) v = std::tanh(v);
    auto s = init_model(config(Arch::GAT, 16, 2));

    // each storage node has a single bus neighbour
    auto single = attention_weights(s, g, 0, 5);
    for (double a : single.data()) CHECK(a == 1.0);

    // line->bus: weights over each bus's in-neighbours sum to one per head
    auto alpha = attention_weights(s, g, 1, 0);
    const auto& e = g.edges[0];
    std::vector<std::array<double, 4>> total(18, {0, 0, 0, 0});
    for (std::size_t k = 0; k < e.size(); ++k)
        for (std::size_t hd = 0; hd < 4; ++hd) total[e.dst[k]][hd] += alpha.at(k, hd);
    for (const auto& t : total)
        for (double x : t) CHECK(std::abs(x - 1.0) < 1e-12);
    CHECK_THROWS_AS(attention_weights(init_model(config(Arch::GCN)), g, 0, 0), PreconditionError);
}

TEST_CASE("full-model gradients match finite differences") {
    for (Arch a : {Arch::GCN, Arch::SAGE, Arch::GAT}) {
        CAPTURE(to_string(a));
        auto g = testing::random_toy_graph(11);
        auto s = init_model(config(a, 8, 2, 5));
        Tensor loss = training_loss(s, g);
        loss.backward();
        for (std::size_t i = 0; i < s.params.size(); ++i) {
            CAPTURE(s.names[i]);
            auto& p = s.params[i];
            REQUIRE(p.has_grad());
            std::vector<double> analytic(p.grad().begin(), p.grad().end());
            const std::vector<double> x0 = values(p);
            auto f = [&](const std::vector<double>& x) {
                std::copy(x.begin(), x.end(), p.mutable_data().begin());
                const double v = training_loss(s, g).item();
                std::copy(x0.begin(), x0.end(), p.mutable_data().begin());
                return v;
            };
            const auto numeric = testing::numeric_gradient(f, x0, 1e-6);
            CHECK(testing::relative_error(analytic, numeric) < 1e-4);
        }
    }
}

TEST_CASE("bus permutation permutes predictions exactly") {
    auto net = testing::toy5();
    StepState st;
    st.load_p = {{3, 4, 5}, {6, 2, 1}};
    st.load_q = {{1, 1, 2}, {0.5, 0.2, 0.1}};
    st.pv_p = {{1, 1, 1}};
    st.soc_before = 0.6;
    auto g = encode(net, st);
    auto perm_net = net;
    const std::size_t perm[5] = {3, 0, 4, 1, 2};
    for (std::size_t i = 0; i < 5; ++i) perm_net.buses[i] = net.buses[perm[i]];
    auto h = encode(perm_net, st);
    for (Arch a : {Arch::GCN, Arch::SAGE, Arch::GAT}) {
        auto s = init_model(config(a, 16, 3));
        auto pg = predict(s, g), ph = predict(s, h);
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t c = 0; c < 6; ++c) CHECK(ph.y[0].at(i, c) == pg.y[0].at(perm[i], c));
        CHECK(ph.y[1] == pg.y[1]);
        CHECK(ph.y[2] == pg.y[2]);
    }
}

TEST_CASE("forward is deterministic and shapes follow the graph") {
    auto g = testing::random_toy_graph(2);
    auto s = init_model(config(Arch::GAT, 16, 3));
    auto a = predict(s, g), b = predict(s, g);
    CHECK(a.y == b.y);
    CHECK(a.y[0].rows == 5);
    CHECK(a.y[1].rows == 1);
    CHECK(a.y[2].cols == 6);

    auto narrow = g;
    narrow.x[idx(NodeType::Line)] = Dense(4, 3);
    CHECK_THROWS_AS(forward(s, narrow), SchemaError);
}

TEST_CASE("every parameter receives gradient on a cigre batch") {
    auto net = build_cigre18();
    auto scn = sample_scenario(net, 0, 5);
    auto lab = label_scenario(net, scn, optimize_dispatch(net, scn, 41));
    REQUIRE(lab.accepted);
    std::vector<HeteroGraph> gs;
    for (const auto& ls : lab.steps) gs.push_back(encode(net, ls.state, &ls.targets));
    std::vector<const HeteroGraph*> ptr;
    for (const auto& x : gs) ptr.push_back(&x);
    auto stats = fit_norm(ptr);
    std::vector<HeteroGraph> normed;
    for (const auto& x : gs) normed.push_back(apply_norm(x, stats));
    std::vector<const HeteroGraph*> nptr;
    for (const auto& x : normed) nptr.push_back(&x);
    auto batch = batch_graphs(nptr);

    for (Arch a : {Arch::GCN, Arch::SAGE, Arch::GAT}) {
        CAPTURE(to_string(a));
        auto s = init_model(config(a, 16, 3));
        s.norm = stats;
        training_loss(s, batch).backward();
        for (std::size_t i = 0; i < s.params.size(); ++i) {
            CAPTURE(s.names[i]);
            bool nonzero = false;
            if (s.params[i].has_grad())
                for (double x : s.params[i].grad()) nonzero |= x != 0.0;
            // attention over a single neighbour is constant 1, so its vector cannot learn;
            // on this feeder only line->bus and bus->line have several in-neighbours
            const bool singleton_attention = s.names[i].find(".att.") != std::string::npos &&
                                             s.names[i].find("line") == std::string::npos;
            CHECK(nonzero == !singleton_attention);
        }
    }
}

TEST_CASE("checkpoint round trip") {
    auto g = testing::random_toy_graph(9);
    auto s = init_model(config(Arch::GCN, 16, 2));
    s.norm.targets[0].mean[3] = 0.25;
    s.norm.targets[0].std[3] = 2.0;
    Checkpoint ck{s, AdamSnapshot{7, 1e-3, {}, {}}, 12, 1.0, 0.5};
    for (const auto& p : s.params) {
        ck.adam->m.push_back(std::vector<double>(p.size(), 0.1));
        ck.adam->v.push_back(std::vector<double>(p.size(), 0.2));
    }
    auto path = std::filesystem::temp_directory_path() / "bessgnn_ckpt_rt.bin";
    save_checkpoint(ck, path);
    auto back = load_checkpoint(path, s.config);
    CHECK(back.model.norm == s.norm);
    CHECK(back.epoch == 12);
    CHECK(back.adam->steps == 7);
    CHECK(back.adam->m == ck.adam->m);
    CHECK(predict(back.model, g).y == predict(s, g).y);
    CHECK(checkpoint_bytes(back) == checkpoint_bytes(ck));

    CHECK_THROWS_AS(load_checkpoint(path, config(Arch::GAT, 16, 2)), ConfigMismatchError);

    auto bytes = binio::read_file(path);
    binio::write_file(path, bytes.substr(0, bytes.size() - 100));
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);
    bytes[bytes.size() / 2] ^= 1;
    binio::write_file(path, bytes);
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);
    std::filesystem::remove(path);
}
