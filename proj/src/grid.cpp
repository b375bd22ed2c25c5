#include "bessgnn/grid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <queue>
#include <set>
#include <sstream>

#include <json.hpp>

#include "bessgnn/errors.hpp"

namespace bessgnn {

using json = nlohmann::json;

std::string to_string(BusType t) {
    switch (t) {
    case BusType::PQ: return "PQ";
    case BusType::PV: return "PV";
    case BusType::Slack: return "slack";
    }
    return "PQ";
}

BusType bus_type_from_string(const std::string& s) {
    if (s == "PQ") return BusType::PQ;
    if (s == "PV") return BusType::PV;
    if (s == "slack") return BusType::Slack;
    throw FormatError("unknown bus_type '" + s + "'");
}

double Storage::discharge_limit() const { return std::min(P_max_dis, C_rate * E_max); }
double Storage::charge_limit() const { return std::min(P_max_ch, C_rate * E_max); }

std::size_t GridNetwork::bus_index(int id) const {
    for (std::size_t i = 0; i < buses.size(); ++i)
        if (buses[i].id == id) return i;
    throw TopologyError("unknown bus id " + std::to_string(id));
}

std::size_t GridNetwork::slack_index() const {
    for (std::size_t i = 0; i < buses.size(); ++i)
        if (buses[i].bus_type == BusType::Slack) return i;
    throw TopologyError("network has no slack bus");
}

// ---- CIGRE LV residential feeder ------------------------------------------

namespace {

struct CableType {
    double r, x;          // ohm/km
    double b_us, df;      // uS/km, loss factor
    std::array<double, 3> mutual; // G_ab, G_bc, G_ca (uS/km)
};

// Underground cable types of the benchmark (UG1 main feeder, UG3 service).
// Mutual terms give coupling of roughly a fifth of the self impedance.
constexpr CableType kUG1{0.162, 0.0832, 100.0, 5e-4, {2.6e7, 2.9e7, 3.2e7}};
constexpr CableType kUG3{0.822, 0.0847, 80.0, 5e-4, {5.8e6, 6.3e6, 6.9e6}};

Line make_line(const std::string& name, int from, int to, double km, const CableType& c, bool symmetric) {
    Line l;
    l.name = name;
    l.from_bus = from;
    l.to_bus = to;
    l.length = km;
    l.r_ohm = c.r;
    l.x_ohm = c.x;
    l.b_us = c.b_us;
    l.df = c.df;
    l.g_us = c.b_us * c.df;
    l.c_par = 1.0;
    // slight per-phase asymmetry from unequal conductor geometry
    const std::array<double, 3> rf = symmetric ? std::array<double, 3>{1, 1, 1} : std::array<double, 3>{1.00, 1.03, 0.97};
    const std::array<double, 3> xf = symmetric ? std::array<double, 3>{1, 1, 1} : std::array<double, 3>{1.00, 1.02, 0.98};
    l.R_a = c.r * rf[0];
    l.R_b = c.r * rf[1];
    l.R_c = c.r * rf[2];
    l.X_a = c.x * xf[0];
    l.X_b = c.x * xf[1];
    l.X_c = c.x * xf[2];
    if (symmetric) {
        const double g = (c.mutual[0] + c.mutual[1] + c.mutual[2]) / 3.0;
        l.G_ab = l.G_bc = l.G_ca = g;
    } else {
        l.G_ab = c.mutual[0];
        l.G_bc = c.mutual[1];
        l.G_ca = c.mutual[2];
    }
    return l;
}

} // namespace

GridNetwork build_cigre18(const Cigre18Options& opts) {
    const bool sym = opts.phase_symmetric;
    GridNetwork net;
    net.name = sym ? "cigre18-symmetric" : "cigre18";
    net.base_kva = 1000.0;

    for (int i = 1; i <= 18; ++i) {
        Bus b;
        b.id = i;
        b.name = "R" + std::to_string(i);
        b.V_rated = 0.4;
        b.V_max = 1.1;
        b.V_min = 0.9;
        b.bus_type = i == 1 ? BusType::Slack : BusType::PQ;
        net.buses.push_back(b);
    }

    struct Seg { int from, to; double km; const CableType* type; };
    const Seg segs[] = {
        {1, 2, 0.035, &kUG1},  {2, 3, 0.035, &kUG1},   {3, 4, 0.035, &kUG1},   {4, 5, 0.035, &kUG1},
        {5, 6, 0.035, &kUG1},  {6, 7, 0.035, &kUG1},   {7, 8, 0.035, &kUG1},   {8, 9, 0.035, &kUG1},
        {9, 10, 0.035, &kUG1}, {3, 11, 0.030, &kUG3},  {4, 12, 0.035, &kUG3},  {12, 13, 0.035, &kUG3},
        {13, 14, 0.035, &kUG3}, {14, 15, 0.030, &kUG3}, {6, 16, 0.030, &kUG3}, {9, 17, 0.030, &kUG3},
        {10, 18, 0.030, &kUG3},
    };
    for (const auto& s : segs) {
        net.lines.push_back(make_line("R" + std::to_string(s.from) + "-R" + std::to_string(s.to), s.from, s.to,
                                      s.km, *s.type, sym));
    }

    // Benchmark apparent powers (kVA, pf 0.95) with +-20% per-phase unbalance.
    struct Demand { int bus; double kva; };
    const Demand demands[] = {{11, 15.0}, {15, 52.0}, {16, 55.0}, {17, 35.0}, {18, 47.0}};
    const std::array<std::array<double, 3>, 3> unbalance = {{{1.2, 1.0, 0.8}, {0.8, 1.2, 1.0}, {1.0, 0.8, 1.2}}};
    const double pf = 0.95;
    const double qf = std::sqrt(1.0 - pf * pf);
    for (std::size_t k = 0; k < std::size(demands); ++k) {
        const auto& f = sym ? std::array<double, 3>{1, 1, 1} : unbalance[k % 3];
        const double s = demands[k].kva / 3.0;
        Load l;
        l.name = "load_R" + std::to_string(demands[k].bus);
        l.bus = demands[k].bus;
        l.P_a = s * pf * f[0];
        l.Q_a = s * qf * f[0];
        l.P_b = s * pf * f[1];
        l.Q_b = s * qf * f[1];
        l.P_c = s * pf * f[2];
        l.Q_c = s * qf * f[2];
        net.loads.push_back(l);
    }

    // Rooftop PV co-located with the loads, three-phase inverters (equal split).
    const std::array<double, 5> pv_kw = {10.0, 20.0, 20.0, 15.0, 25.0};
    for (std::size_t k = 0; k < pv_kw.size(); ++k) {
        const std::array<double, 3> f{1.0 / 3, 1.0 / 3, 1.0 / 3};
        PvUnit pv;
        pv.name = "pv_R" + std::to_string(demands[k].bus);
        pv.bus = demands[k].bus;
        pv.P_a = pv_kw[k] * f[0];
        pv.P_b = pv_kw[k] * f[1];
        pv.P_c = pv_kw[k] * f[2];
        net.pvs.push_back(pv);
    }

    Storage st;
    st.name = "bess_R5";
    st.bus = 5;
    st.SoC = 0.5;
    st.E_max = 150.0;
    st.SoC_max = 0.9;
    st.SoC_min = 0.1;
    st.P_max_ch = 50.0;
    st.P_max_dis = 50.0;
    st.Q_max_ch = 30.0;
    st.Q_max_dis = 30.0;
    st.C_rate = 0.25;
    net.storages.push_back(st);

    net.ext_grid = ExtGrid{1, -150.0, 150.0, -80.0, 80.0};
    return net;
}

// ---- validation ------------------------------------------------------------

std::vector<std::string> validate(const GridNetwork& net) {
    std::vector<std::string> v;
    auto finite = [](double x) { return std::isfinite(x); };

    if (!(net.base_kva > 0.0)) v.push_back("base power must be positive");

    std::map<int, std::size_t> index;
    std::size_t slack_count = 0;
    for (std::size_t i = 0; i < net.buses.size(); ++i) {
        const auto& b = net.buses[i];
        const std::string tag = "bus " + std::to_string(b.id);
        if (!index.emplace(b.id, i).second) v.push_back("duplicate bus id " + std::to_string(b.id));
        if (!(b.V_min < b.V_max)) v.push_back(tag + ": V_min must be below V_max");
        if (!(b.V_rated > 0.0)) v.push_back(tag + ": V_rated must be positive");
        if (b.bus_type == BusType::Slack) ++slack_count;
    }
    if (slack_count == 0) v.push_back("no slack bus");
    if (slack_count > 1) v.push_back("multiple slack buses (" + std::to_string(slack_count) + ")");

    auto resolves = [&](int id) { return index.count(id) > 0; };
    auto dangling = [&](const std::string& who, int id) {
        v.push_back(who + ": dangling reference to bus " + std::to_string(id));
    };

    for (const auto& l : net.lines) {
        const std::string tag = "line " + l.name;
        if (!resolves(l.from_bus)) dangling(tag, l.from_bus);
        if (!resolves(l.to_bus)) dangling(tag, l.to_bus);
        if (l.from_bus == l.to_bus) v.push_back(tag + ": connects a bus to itself");
        if (!(l.length > 0.0)) v.push_back(tag + ": length must be positive");
        for (double x : {l.R_a, l.X_a, l.R_b, l.X_b, l.R_c, l.X_c}) {
            if (!(x >= 0.0) || !finite(x)) {
                v.push_back(tag + ": per-phase R/X must be finite and non-negative");
                break;
            }
        }
        for (double x : {l.G_ab, l.G_bc, l.G_ca, l.g_us, l.b_us}) {
            if (!finite(x) || x < 0.0) {
                v.push_back(tag + ": admittance terms must be finite and non-negative");
                break;
            }
        }
        if (!(l.c_par >= 1.0)) v.push_back(tag + ": c_par must be at least 1");
    }

    for (const auto& l : net.loads) {
        if (!resolves(l.bus)) dangling("load " + l.name, l.bus);
        for (double x : {l.P_a, l.Q_a, l.P_b, l.Q_b, l.P_c, l.Q_c}) {
            if (!finite(x)) {
                v.push_back("load " + l.name + ": non-finite demand");
                break;
            }
        }
    }
    for (const auto& p : net.pvs) {
        if (!resolves(p.bus)) dangling("pv " + p.name, p.bus);
        if (!(p.P_a >= 0.0 && p.P_b >= 0.0 && p.P_c >= 0.0)) v.push_back("pv " + p.name + ": negative output");
    }
    for (const auto& s : net.storages) {
        const std::string tag = "storage " + s.name;
        if (!resolves(s.bus)) dangling(tag, s.bus);
        if (!(s.SoC_min <= s.SoC && s.SoC <= s.SoC_max)) v.push_back(tag + ": SoC outside [SoC_min, SoC_max]");
        if (!(s.SoC_min >= 0.0 && s.SoC_max <= 1.0)) v.push_back(tag + ": SoC bounds outside [0, 1]");
        if (!(s.E_max > 0.0)) v.push_back(tag + ": E_max must be positive");
        if (!(s.C_rate > 0.0)) v.push_back(tag + ": C_rate must be positive");
        if (!(s.P_max_ch >= 0.0 && s.P_max_dis >= 0.0)) v.push_back(tag + ": negative power rating");
        if (!(s.eta_ch > 0.0 && s.eta_ch <= 1.0 && s.eta_dis > 0.0 && s.eta_dis <= 1.0))
            v.push_back(tag + ": efficiencies must lie in (0, 1]");
    }

    const auto& e = net.ext_grid;
    if (!resolves(e.bus)) dangling("ext_grid", e.bus);
    else if (net.buses[index[e.bus]].bus_type != BusType::Slack) v.push_back("ext_grid must sit on the slack bus");
    if (!(e.P_min < e.P_max)) v.push_back("ext_grid: P_min must be below P_max");
    if (!(e.Q_min < e.Q_max)) v.push_back("ext_grid: Q_min must be below Q_max");

    // Radiality: n-1 lines and every bus reachable from the slack.
    if (!net.buses.empty()) {
        if (net.lines.size() + 1 != net.buses.size()) {
            v.push_back("not radial: " + std::to_string(net.lines.size()) + " lines for " +
                        std::to_string(net.buses.size()) + " buses");
        }
        std::vector<std::vector<std::size_t>> adj(net.buses.size());
        for (const auto& l : net.lines) {
            if (resolves(l.from_bus) && resolves(l.to_bus)) {
                adj[index[l.from_bus]].push_back(index[l.to_bus]);
                adj[index[l.to_bus]].push_back(index[l.from_bus]);
            }
        }
        std::size_t root = 0;
        for (std::size_t i = 0; i < net.buses.size(); ++i)
            if (net.buses[i].bus_type == BusType::Slack) root = i;
        std::vector<bool> seen(net.buses.size(), false);
        std::queue<std::size_t> q;
        q.push(root);
        seen[root] = true;
        while (!q.empty()) {
            auto u = q.front();
            q.pop();
            for (auto w : adj[u])
                if (!seen[w]) {
                    seen[w] = true;
                    q.push(w);
                }
        }
        for (std::size_t i = 0; i < seen.size(); ++i)
            if (!seen[i]) v.push_back("disconnected bus " + std::to_string(net.buses[i].id));
    }
    return v;
}

// ---- line matrices -----------------------------------------------------------

Matrix3c line_impedance_matrix(const Line& line) {
    const std::array<std::complex<double>, 3> self = {
        std::complex<double>(line.R_a, line.X_a), std::complex<double>(line.R_b, line.X_b),
        std::complex<double>(line.R_c, line.X_c)};
    for (const auto& z : self) {
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
            throw ParameterError("line " + line.name + ": non-finite impedance");
        }
        if (std::abs(z) == 0.0) throw ParameterError("line " + line.name + ": zero self impedance makes Z singular");
    }
    for (double g : {line.G_ab, line.G_bc, line.G_ca, line.length, line.c_par}) {
        if (!std::isfinite(g) || g < 0.0) throw ParameterError("line " + line.name + ": invalid coupling or length");
    }
    if (!(line.c_par > 0.0)) throw ParameterError("line " + line.name + ": c_par must be positive");

    // Mutual coupling: |Z_m| = 1e6 / G (G in uS/km, Z_m in ohm/km), capped at
    // 30% of the smallest self impedance, at the mean self-impedance angle.
    double min_self = std::abs(self[0]);
    double mean_angle = 0.0;
    for (const auto& z : self) {
        min_self = std::min(min_self, std::abs(z));
        mean_angle += std::arg(z) / 3.0;
    }
    auto mutual = [&](double g) -> std::complex<double> {
        if (g == 0.0) return {0.0, 0.0};
        const double mag = std::min(1e6 / g, 0.3 * min_self);
        return std::polar(mag, mean_angle);
    };

    Matrix3c z = Matrix3c::Zero();
    for (int i = 0; i < 3; ++i) z(i, i) = self[static_cast<std::size_t>(i)];
    z(0, 1) = z(1, 0) = mutual(line.G_ab);
    z(1, 2) = z(2, 1) = mutual(line.G_bc);
    z(2, 0) = z(0, 2) = mutual(line.G_ca);
    return z * (line.length / line.c_par);
}

Matrix3c line_shunt_admittance(const Line& line) {
    const std::complex<double> y(line.g_us * 1e-6, line.b_us * 1e-6);
    return Matrix3c::Identity() * (y * line.length * line.c_par);
}

// ---- per-unit ----------------------------------------------------------------

namespace {

// kind: multiplies impedances by zf, admittances by yf, powers/energies by sf.
GridNetwork rescale(const GridNetwork& net, double zf, double yf, double sf) {
    GridNetwork out = net;
    for (auto& l : out.lines) {
        for (double* p : {&l.r_ohm, &l.x_ohm, &l.R_a, &l.X_a, &l.R_b, &l.X_b, &l.R_c, &l.X_c}) *p *= zf;
        for (double* p : {&l.g_us, &l.b_us, &l.G_ab, &l.G_bc, &l.G_ca}) *p *= yf;
    }
    for (auto& l : out.loads)
        for (double* p : {&l.P_a, &l.Q_a, &l.P_b, &l.Q_b, &l.P_c, &l.Q_c}) *p *= sf;
    for (auto& p : out.pvs)
        for (double* x : {&p.P_a, &p.P_b, &p.P_c}) *x *= sf;
    for (auto& s : out.storages)
        for (double* x : {&s.E_max, &s.P_max_ch, &s.P_max_dis, &s.Q_max_ch, &s.Q_max_dis}) *x *= sf;
    for (double* x : {&out.ext_grid.P_min, &out.ext_grid.P_max, &out.ext_grid.Q_min, &out.ext_grid.Q_max}) *x *= sf;
    return out;
}

} // namespace

GridNetwork to_per_unit(const GridNetwork& net) {
    if (net.per_unit) return net;
    if (!(net.base_kva > 0.0)) throw ParameterError("per-unit: base power must be positive");
    if (net.buses.empty()) throw ParameterError("per-unit: network has no buses");
    const double v_kv = net.buses.front().V_rated;
    for (const auto& b : net.buses) {
        if (!(b.V_rated > 0.0)) throw ParameterError("per-unit: bus " + std::to_string(b.id) + " has zero rated voltage");
        if (b.V_rated != v_kv) throw ParameterError("per-unit: mixed rated voltages need transformers (unsupported)");
    }
    const double z_base = v_kv * v_kv / (net.base_kva / 1000.0); // ohm
    GridNetwork out = rescale(net, 1.0 / z_base, z_base, 1.0 / net.base_kva);
    for (auto& b : out.buses) b.V_rated = 1.0;
    out.per_unit = true;
    out.v_base_kv = v_kv;
    return out;
}

GridNetwork from_per_unit(const GridNetwork& net) {
    if (!net.per_unit) return net;
    const double v_kv = net.v_base_kv;
    if (!(v_kv > 0.0)) throw ParameterError("per-unit: missing voltage base");
    const double z_base = v_kv * v_kv / (net.base_kva / 1000.0);
    GridNetwork out = rescale(net, z_base, 1.0 / z_base, net.base_kva);
    for (auto& b : out.buses) b.V_rated = v_kv;
    out.per_unit = false;
    out.v_base_kv = 0.0;
    return out;
}

// ---- serialization -------------------------------------------------------------

std::string network_to_text(const GridNetwork& net) {
    json j;
    j["format"] = "bessgnn-network";
    j["version"] = 1;
    j["name"] = net.name;
    j["base_kva"] = net.base_kva;
    j["per_unit"] = net.per_unit;
    j["v_base_kv"] = net.v_base_kv;
    j["buses"] = json::array();
    for (const auto& b : net.buses) {
        j["buses"].push_back({{"id", b.id}, {"name", b.name}, {"V_rated", b.V_rated}, {"V_max", b.V_max},
                              {"V_min", b.V_min}, {"bus_type", to_string(b.bus_type)}});
    }
    j["lines"] = json::array();
    for (const auto& l : net.lines) {
        j["lines"].push_back({{"name", l.name}, {"from_bus", l.from_bus}, {"to_bus", l.to_bus},
                              {"length", l.length}, {"r_ohm", l.r_ohm}, {"x_ohm", l.x_ohm},
                              {"g_us", l.g_us}, {"b_us", l.b_us}, {"c_par", l.c_par}, {"df", l.df},
                              {"R_a", l.R_a}, {"X_a", l.X_a}, {"R_b", l.R_b}, {"X_b", l.X_b},
                              {"R_c", l.R_c}, {"X_c", l.X_c}, {"G_ab", l.G_ab}, {"G_bc", l.G_bc},
                              {"G_ca", l.G_ca}});
    }
    j["loads"] = json::array();
    for (const auto& l : net.loads) {
        j["loads"].push_back({{"name", l.name}, {"bus", l.bus}, {"P_a", l.P_a}, {"Q_a", l.Q_a},
                              {"P_b", l.P_b}, {"Q_b", l.Q_b}, {"P_c", l.P_c}, {"Q_c", l.Q_c}});
    }
    j["pvs"] = json::array();
    for (const auto& p : net.pvs) {
        j["pvs"].push_back({{"name", p.name}, {"bus", p.bus}, {"P_a", p.P_a}, {"P_b", p.P_b}, {"P_c", p.P_c}});
    }
    j["storages"] = json::array();
    for (const auto& s : net.storages) {
        j["storages"].push_back({{"name", s.name}, {"bus", s.bus}, {"SoC", s.SoC}, {"E_max", s.E_max},
                                 {"SoC_max", s.SoC_max}, {"SoC_min", s.SoC_min}, {"P_max_ch", s.P_max_ch},
                                 {"P_max_dis", s.P_max_dis}, {"Q_max_ch", s.Q_max_ch},
                                 {"Q_max_dis", s.Q_max_dis}, {"C_rate", s.C_rate}, {"eta_ch", s.eta_ch},
                                 {"eta_dis", s.eta_dis}});
    }
    const auto& e = net.ext_grid;
    j["ext_grid"] = {{"bus", e.bus}, {"P_min", e.P_min}, {"P_max", e.P_max}, {"Q_min", e.Q_min}, {"Q_max", e.Q_max}};
    return j.dump(2);
}

GridNetwork network_from_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& ex) {
        throw FormatError(std::string("network document: ") + ex.what());
    }
    try {
        if (j.value("format", "") != "bessgnn-network") throw FormatError("network document: wrong format tag");
        if (j.value("version", 0) != 1) throw FormatError("network document: unsupported version");
        GridNetwork net;
        net.name = j.at("name").get<std::string>();
        net.base_kva = j.at("base_kva").get<double>();
        net.per_unit = j.at("per_unit").get<bool>();
        net.v_base_kv = j.at("v_base_kv").get<double>();
        for (const auto& b : j.at("buses")) {
            Bus x;
            x.id = b.at("id").get<int>();
            x.name = b.at("name").get<std::string>();
            x.V_rated = b.at("V_rated").get<double>();
            x.V_max = b.at("V_max").get<double>();
            x.V_min = b.at("V_min").get<double>();
            x.bus_type = bus_type_from_string(b.at("bus_type").get<std::string>());
            net.buses.push_back(x);
        }
        for (const auto& l : j.at("lines")) {
            Line x;
            x.name = l.at("name").get<std::string>();
            x.from_bus = l.at("from_bus").get<int>();
            x.to_bus = l.at("to_bus").get<int>();
            x.length = l.at("length").get<double>();
            x.r_ohm = l.at("r_ohm").get<double>();
            x.x_ohm = l.at("x_ohm").get<double>();
            x.g_us = l.at("g_us").get<double>();
            x.b_us = l.at("b_us").get<double>();
            x.c_par = l.at("c_par").get<double>();
            x.df = l.at("df").get<double>();
            x.R_a = l.at("R_a").get<double>();
            x.X_a = l.at("X_a").get<double>();
            x.R_b = l.at("R_b").get<double>();
            x.X_b = l.at("X_b").get<double>();
            x.R_c = l.at("R_c").get<double>();
            x.X_c = l.at("X_c").get<double>();
            x.G_ab = l.at("G_ab").get<double>();
            x.G_bc = l.at("G_bc").get<double>();
            x.G_ca = l.at("G_ca").get<double>();
            net.lines.push_back(x);
        }
        for (const auto& l : j.at("loads")) {
            Load x;
            x.name = l.at("name").get<std::string>();
            x.bus = l.at("bus").get<int>();
            x.P_a = l.at("P_a").get<double>();
            x.Q_a = l.at("Q_a").get<double>();
            x.P_b = l.at("P_b").get<double>();
            x.Q_b = l.at("Q_b").get<double>();
            x.P_c = l.at("P_c").get<double>();
            x.Q_c = l.at("Q_c").get<double>();
            net.loads.push_back(x);
        }
        for (const auto& p : j.at("pvs")) {
            PvUnit x;
            x.name = p.at("name").get<std::string>();
            x.bus = p.at("bus").get<int>();
            x.P_a = p.at("P_a").get<double>();
            x.P_b = p.at("P_b").get<double>();
            x.P_c = p.at("P_c").get<double>();
            net.pvs.push_back(x);
        }
        for (const auto& s : j.at("storages")) {
            Storage x;
            x.name = s.at("name").get<std::string>();
            x.bus = s.at("bus").get<int>();
            x.SoC = s.at("SoC").get<double>();
            x.E_max = s.at("E_max").get<double>();
            x.SoC_max = s.at("SoC_max").get<double>();
            x.SoC_min = s.at("SoC_min").get<double>();
            x.P_max_ch = s.at("P_max_ch").get<double>();
            x.P_max_dis = s.at("P_max_dis").get<double>();
            x.Q_max_ch = s.at("Q_max_ch").get<double>();
            x.Q_max_dis = s.at("Q_max_dis").get<double>();
            x.C_rate = s.at("C_rate").get<double>();
            x.eta_ch = s.value("eta_ch", 0.95);
            x.eta_dis = s.value("eta_dis", 0.95);
            net.storages.push_back(x);
        }
        const auto& e = j.at("ext_grid");
        net.ext_grid.bus = e.at("bus").get<int>();
        net.ext_grid.P_min = e.at("P_min").get<double>();
        net.ext_grid.P_max = e.at("P_max").get<double>();
        net.ext_grid.Q_min = e.at("Q_min").get<double>();
        net.ext_grid.Q_max = e.at("Q_max").get<double>();
        return net;
    } catch (const json::exception& ex) {
        throw FormatError(std::string("network document: ") + ex.what());
    }
}

void save_network(const GridNetwork& net, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot write " + path.string());
    os << network_to_text(net) << '\n';
}

GridNetwork load_network(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot read " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return network_from_text(ss.str());
}

} // namespace bessgnn
