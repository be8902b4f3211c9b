#include "gridsite/netmodel.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <queue>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace gridsite {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(sep, start);
        out.push_back(trim(line.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

template <typename T>
T parse_number(std::string_view field, std::string_view what, std::size_t line_no) {
    T value{};
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size()) {
        throw NetworkError("line " + std::to_string(line_no) + ": cannot parse " + std::string(what) +
                           " from '" + std::string(field) + "'");
    }
    return value;
}

// Data rows of a CSV table after checking the header names.
std::vector<std::pair<std::size_t, std::vector<std::string_view>>> read_table(
    std::string_view text, const std::vector<std::string_view>& columns) {
    std::vector<std::pair<std::size_t, std::vector<std::string_view>>> rows;
    bool have_header = false;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto line = trim(text.substr(start, end - start));
        ++line_no;
        start = end + 1;
        if (line.empty() || line.front() == '#') continue;
        auto fields = split(line, ',');
        if (!have_header) {
            if (fields.size() != columns.size() || !std::equal(fields.begin(), fields.end(), columns.begin())) {
                std::string expected;
                for (auto c : columns) expected += (expected.empty() ? "" : ",") + std::string(c);
                throw NetworkError("line " + std::to_string(line_no) + ": expected header '" + expected + "'");
            }
            have_header = true;
            continue;
        }
        if (fields.size() != columns.size()) {
            throw NetworkError("line " + std::to_string(line_no) + ": expected " + std::to_string(columns.size()) +
                               " fields, got " + std::to_string(fields.size()));
        }
        rows.emplace_back(line_no, std::move(fields));
    }
    if (!have_header) throw NetworkError("missing CSV header");
    return rows;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw NetworkError("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::size_t NetworkModel::index_of(int id) const {
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (buses[i].id == id) return i;
    }
    throw NetworkError("unknown bus " + std::to_string(id));
}

bool NetworkModel::has_bus(int id) const {
    return std::any_of(buses.begin(), buses.end(), [id](const Bus& b) { return b.id == id; });
}

double NetworkModel::total_p_load() const {
    return std::accumulate(buses.begin(), buses.end(), 0.0, [](double s, const Bus& b) { return s + b.p_load; });
}

double NetworkModel::total_q_load() const {
    return std::accumulate(buses.begin(), buses.end(), 0.0, [](double s, const Bus& b) { return s + b.q_load; });
}

int TopologyReport::max_depth() const {
    return depth.empty() ? 0 : *std::max_element(depth.begin(), depth.end());
}

TopologyReport validate_radial(const NetworkModel& net) {
    const std::size_t n = net.buses.size();
    if (n == 0) throw NetworkError("network has no buses");

    std::unordered_map<int, std::size_t> pos;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& b = net.buses[i];
        if (!pos.emplace(b.id, i).second) throw NetworkError("duplicate bus id " + std::to_string(b.id));
        if (!(b.p_load >= 0.0)) throw NetworkError("negative active load at bus " + std::to_string(b.id));
    }
    auto slack_it = pos.find(net.slack_bus);
    if (slack_it == pos.end()) throw NetworkError("slack bus " + std::to_string(net.slack_bus) + " not found");

    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(n);  // (neighbor, branch)
    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const auto& br = net.branches[k];
        auto f = pos.find(br.from_bus);
        auto t = pos.find(br.to_bus);
        if (f == pos.end() || t == pos.end()) {
            throw NetworkError("branch " + std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus) +
                               " references an unknown bus");
        }
        if (br.from_bus == br.to_bus) throw NetworkError("self-loop branch at bus " + std::to_string(br.from_bus));
        if (!(br.r >= 0.0) || !(br.x >= 0.0)) {
            throw NetworkError("negative impedance on branch " + std::to_string(br.from_bus) + "-" +
                               std::to_string(br.to_bus));
        }
        adj[f->second].emplace_back(t->second, k);
        adj[t->second].emplace_back(f->second, k);
    }

    TopologyReport rep;
    rep.depth.assign(n, -1);
    rep.path.assign(n, {});
    rep.parent_branch.assign(n, -1);
    rep.parent_bus.assign(n, -1);

    const std::size_t root = slack_it->second;
    rep.depth[root] = 0;
    std::queue<std::size_t> frontier;
    frontier.push(root);
    while (!frontier.empty()) {
        auto u = frontier.front();
        frontier.pop();
        for (auto [v, k] : adj[u]) {
            if (static_cast<std::ptrdiff_t>(k) == rep.parent_branch[u]) continue;
            if (rep.depth[v] >= 0) throw NetworkError("cycle detected at bus " + std::to_string(net.buses[v].id));
            rep.depth[v] = rep.depth[u] + 1;
            rep.parent_branch[v] = static_cast<std::ptrdiff_t>(k);
            rep.parent_bus[v] = static_cast<std::ptrdiff_t>(u);
            rep.path[v] = rep.path[u];
            rep.path[v].push_back(k);
            frontier.push(v);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (rep.depth[i] < 0) throw NetworkError("unreachable bus " + std::to_string(net.buses[i].id));
    }
    // Connected and acyclic implies branch count = bus count - 1; kept as a
    // separate guard against duplicated branch records.
    if (net.branches.size() + 1 != n) throw NetworkError("branch count must equal bus count - 1");
    return rep;
}

NetworkModel make_network(std::vector<Bus> buses, std::vector<Branch> branches, int slack_bus, double v_base_kv,
                          double v0) {
    if (!(v_base_kv > 0.0)) throw NetworkError("v_base_kv must be positive");
    if (!(v0 > 0.0)) throw NetworkError("v0 must be positive");

    NetworkModel raw{std::move(buses), std::move(branches), slack_bus, v_base_kv, v0};
    const auto rep = validate_radial(raw);

    std::vector<std::size_t> order(raw.buses.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const bool sa = raw.buses[a].id == slack_bus;
        const bool sb = raw.buses[b].id == slack_bus;
        if (sa != sb) return sa;
        return raw.buses[a].id < raw.buses[b].id;
    });

    NetworkModel net;
    net.slack_bus = slack_bus;
    net.v_base = v_base_kv;
    net.v0 = v0;
    net.buses.reserve(order.size());
    for (auto i : order) net.buses.push_back(raw.buses[i]);
    net.branches.reserve(raw.branches.size());
    for (std::size_t k = 1; k < order.size(); ++k) {
        const auto child = order[k];
        Branch br = raw.branches[static_cast<std::size_t>(rep.parent_branch[child])];
        br.from_bus = raw.buses[static_cast<std::size_t>(rep.parent_bus[child])].id;
        br.to_bus = raw.buses[child].id;
        net.branches.push_back(br);
    }
    return net;
}

NetworkModel parse_network(std::string_view header_json, std::string_view buses_csv, std::string_view branches_csv) {
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_json);
    } catch (const nlohmann::json::exception& e) {
        throw NetworkError(std::string("header: ") + e.what());
    }
    double v_base = 0.0;
    int slack = 0;
    double v0 = 1.0;
    try {
        v_base = header.at("v_base_kv").get<double>();
        slack = header.at("slack").get<int>();
        v0 = header.value("v0", 1.0);
    } catch (const nlohmann::json::exception& e) {
        throw NetworkError(std::string("header: ") + e.what());
    }

    std::vector<Bus> buses;
    for (const auto& [line, f] : read_table(buses_csv, {"id", "p_load_kw", "q_load_kvar"})) {
        buses.push_back({parse_number<int>(f[0], "id", line), parse_number<double>(f[1], "p_load_kw", line),
                         parse_number<double>(f[2], "q_load_kvar", line)});
    }
    std::vector<Branch> branches;
    for (const auto& [line, f] : read_table(branches_csv, {"from", "to", "r_ohm", "x_ohm"})) {
        branches.push_back({parse_number<int>(f[0], "from", line), parse_number<int>(f[1], "to", line),
                            parse_number<double>(f[2], "r_ohm", line), parse_number<double>(f[3], "x_ohm", line)});
    }
    return make_network(std::move(buses), std::move(branches), slack, v_base, v0);
}

NetworkModel load_network(const std::filesystem::path& source) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(source)) {
        if (source == "ieee33") return ieee33();
        throw NetworkError("dataset not found: " + source.string());
    }
    return parse_network(read_file(source / "header.json"), read_file(source / "buses.csv"),
                         read_file(source / "branches.csv"));
}

NetworkModel ieee33() {
    const auto& t = ieee33_text();
    return parse_network(t.header_json, t.buses_csv, t.branches_csv);
}

void write_network(const NetworkModel& net, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json header{{"v_base_kv", net.v_base}, {"slack", net.slack_bus}, {"v0", net.v0}};
    std::ofstream(dir / "header.json") << header.dump(2) << '\n';
    std::ofstream buses(dir / "buses.csv");
    buses.precision(17);
    buses << "id,p_load_kw,q_load_kvar\n";
    for (const auto& b : net.buses) buses << b.id << ',' << b.p_load << ',' << b.q_load << '\n';
    std::ofstream branches(dir / "branches.csv");
    branches.precision(17);
    branches << "from,to,r_ohm,x_ohm\n";
    for (const auto& br : net.branches) branches << br.from_bus << ',' << br.to_bus << ',' << br.r << ',' << br.x << '\n';
}

SweepMatrices build_sweep_matrices(const NetworkModel& net) {
    const auto rep = validate_radial(net);
    if (net.buses.front().id != net.slack_bus) throw NetworkError("slack bus must be first; use make_network()");

    const auto n = static_cast<Eigen::Index>(net.buses.size()) - 1;
    const auto m = static_cast<Eigen::Index>(net.branches.size());
    SweepMatrices mats;
    mats.bibc = Eigen::MatrixXd::Zero(m, n);
    for (Eigen::Index col = 0; col < n; ++col) {
        for (auto k : rep.path[static_cast<std::size_t>(col) + 1]) mats.bibc(static_cast<Eigen::Index>(k), col) = 1.0;
    }
    mats.bcbv = mats.bibc.transpose().cast<std::complex<double>>();
    for (Eigen::Index k = 0; k < m; ++k) mats.bcbv.col(k) *= net.branches[static_cast<std::size_t>(k)].impedance();
    mats.drop = mats.bcbv * mats.bibc.cast<std::complex<double>>();
    return mats;
}

}  // namespace gridsite
