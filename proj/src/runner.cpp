#include "gridsite/runner.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

namespace gridsite {

using nlohmann::json;

std::string_view to_string(CaseFamily family) {
    switch (family) {
        case CaseFamily::BessOnly: return "BESS_ONLY";
        case CaseFamily::WtOnly: return "WT_ONLY";
        case CaseFamily::JointLoss: return "JOINT_LOSS";
        case CaseFamily::JointLossCost: return "JOINT_LOSS_COST";
    }
    return "?";
}

CaseFamily parse_case_family(std::string_view text) {
    for (auto f : {CaseFamily::BessOnly, CaseFamily::WtOnly, CaseFamily::JointLoss, CaseFamily::JointLossCost}) {
        if (text == to_string(f)) return f;
    }
    throw std::invalid_argument("unknown case family '" + std::string(text) + "'");
}

void CaseConfig::validate() const {
    switch (family) {
        case CaseFamily::BessOnly:
            if (n_wt != 0) throw std::invalid_argument(name + ": BESS_ONLY cases cannot have wind turbines");
            break;
        case CaseFamily::WtOnly:
            if (n_bess != 0) throw std::invalid_argument(name + ": WT_ONLY cases cannot have batteries");
            break;
        case CaseFamily::JointLoss:
        case CaseFamily::JointLossCost:
            if (n_wt < 1 || n_bess < 1) throw std::invalid_argument(name + ": joint cases need at least one WT and one BESS");
            break;
    }
    if (!(h >= 0.0)) throw std::invalid_argument(name + ": h must be non-negative");
    if (inverter_eta && !(*inverter_eta > 0.0 && *inverter_eta <= 1.0)) {
        throw std::invalid_argument(name + ": inverter_eta must lie in (0, 1]");
    }
    effective_weights();
    solver.validate();
    penalty.validate();
    devices.battery(battery_type);
}

ObjectiveWeights CaseConfig::effective_weights() const {
    if (family == CaseFamily::JointLossCost) return weights.normalized();
    return ObjectiveWeights{0.0, 0.0, 1.0};
}

DeviceBounds CaseConfig::effective_bounds() const {
    if (bounds) return *bounds;
    auto b = DeviceBounds::for_budget(h);
    if (chart_mode == ChartMode::Strict) b.chart = PqChartParams::strict_mode(b.wt_p_max);
    return b;
}

Evaluator::Settings CaseConfig::evaluator_settings() const {
    Evaluator::Settings s;
    s.h = h;
    s.bounds = effective_bounds();
    s.solver = solver;
    s.penalty = penalty;
    s.weights = effective_weights();
    s.scales = scales;
    s.devices = devices;
    s.battery_type = battery_type;
    return s;
}

std::vector<DevicePlacement> CaseReport::placements() const {
    std::vector<DevicePlacement> out;
    out.reserve(devices.size());
    for (const auto& d : devices) out.push_back({d.kind, d.bus, d.p, d.q});
    return out;
}

namespace {

CaseReport assemble(const CaseConfig& cfg, const Evaluator& ev, const Candidate& best) {
    const auto& net = ev.network();
    CaseReport r;
    r.name = cfg.name;
    r.family = std::string(to_string(cfg.family));
    r.seed = cfg.ga.seed;
    r.h = cfg.h;
    r.base_loss = ev.base_loss();
    r.fitness = best.fitness;
    r.penalty = best.penalty;
    r.violations = best.violations;
    r.converged = !best.flow_failed;
    if (best.flow) {
        r.p_loss = best.flow->total_loss.real();
        r.q_loss = best.flow->total_loss.imag();
        r.loss = best.flow->loss_magnitude();
    } else {
        r.loss = best.loss;
    }
    r.loss_reduction_pct = r.base_loss > 0.0 ? 100.0 * (1.0 - r.loss / r.base_loss) : 0.0;

    const auto costs = cost_terms(best.placements, ev.composer(), ev.battery());
    r.wt_cost = costs.wt_cost;
    r.wt_power = costs.wt_power;
    r.wt_cost_ratio = costs.wt_ratio;
    r.bess_cost = costs.bess_cost;
    const double eta = cfg.inverter_eta.value_or(ev.battery().eta);
    std::size_t fleet_idx = 0;
    for (const auto& d : best.placements) {
        DeviceReport dr{d.kind, d.bus, d.p, d.q, apparent_power(d.p, d.q), 0.0, 0.0, {}};
        if (d.kind == DeviceKind::BESS) {
            dr.dc_capacity = bess_dc_capacity(dr.s, eta);
            dr.cost = bess_cost(d.p, ev.battery());
        } else {
            dr.fleet = costs.fleets[fleet_idx++];
            dr.cost = wt_fleet_cost(dr.fleet, ev.composer().catalog(), ev.composer().options());
        }
        r.devices.push_back(std::move(dr));
    }

    r.bus_ids.reserve(net.bus_count());
    for (const auto& b : net.buses) r.bus_ids.push_back(b.id);
    r.v_base = ev.base_flow().voltage_magnitudes();
    r.v_after = best.flow ? best.flow->voltage_magnitudes() : std::vector<double>(net.bus_count(), 0.0);
    return r;
}

}  // namespace

CaseReport run_case(const CaseConfig& cfg, const NetworkModel& net) {
    cfg.validate();
    auto ga = cfg.ga;
    ga.h = cfg.h;
    ga.n_wt = cfg.n_wt;
    ga.n_bess = cfg.n_bess;
    const Evaluator ev(std::make_shared<const NetworkModel>(net), cfg.evaluator_settings());
    auto result = run(ga, ev);
    auto report = assemble(cfg, ev, result.best);
    report.seed = ga.seed;
    report.trace = std::move(result.trace);
    report.evaluations = result.evaluations;
    return report;
}

CaseReport evaluate_fixed(const std::vector<DevicePlacement>& placements, const NetworkModel& net,
                          const CaseConfig& cfg, const EvaluateOptions& opts) {
    auto settings = cfg.evaluator_settings();
    Candidate c;
    c.placements = placements;
    for (auto& d : c.placements) {
        d.bus += opts.bus_offset;
        if (!net.has_bus(d.bus) || d.bus == net.slack_bus) {
            throw std::invalid_argument("placement bus " + std::to_string(d.bus) + " is not a non-slack bus");
        }
    }
    // As-published plans keep their own total.
    if (!opts.repair) settings.h = total_active_power(c.placements);
    const Evaluator ev(std::make_shared<const NetworkModel>(net), settings);
    if (opts.repair) c = ev.repair(std::move(c));

    loss_objective(c, ev.network(), ev.matrices(), settings.solver, ev.sentinel());
    if (c.flow_failed) {
        c.fitness = ev.sentinel();
    } else {
        penalty(c, *c.flow, settings.penalty, settings.bounds);
        cost_objective(c, ev.composer(), ev.battery());
        c.fitness = combined_objective(c, ev.settings().weights, settings.scales);
    }

    CaseConfig named = cfg;
    if (named.name == "case") named.name = "evaluate";
    named.h = settings.h;
    auto report = assemble(named, ev, c);
    report.family = "FIXED";
    report.evaluations = 1;
    if (!report.converged) {
        report.status = "failed";
        report.error = "load flow did not converge";
    }
    return report;
}

// ---------------------------------------------------------------------------
// Suite

SuiteResult run_suite(const std::vector<CaseConfig>& configs, const NetworkModel& net, std::size_t threads) {
    SuiteResult suite;
    suite.reports.resize(configs.size());
    auto one = [&](std::size_t i) {
        try {
            suite.reports[i] = run_case(configs[i], net);
        } catch (const std::exception& e) {
            CaseReport failed;
            failed.name = configs[i].name;
            failed.family = std::string(to_string(configs[i].family));
            failed.seed = configs[i].ga.seed;
            failed.h = configs[i].h;
            failed.status = "failed";
            failed.error = e.what();
            failed.converged = false;
            suite.reports[i] = std::move(failed);
        }
    };
    threads = std::max<std::size_t>(1, std::min(threads, configs.size()));
    if (threads == 1) {
        for (std::size_t i = 0; i < configs.size(); ++i) one(i);
        return suite;
    }
    std::mutex m;
    std::size_t next = 0;
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            while (true) {
                std::size_t i;
                {
                    std::lock_guard lock(m);
                    if (next == configs.size()) return;
                    i = next++;
                }
                one(i);
            }
        });
    }
    pool.clear();
    return suite;
}

std::vector<CaseConfig> case_study_suite(const GaConfig& ga) {
    std::vector<CaseConfig> out;
    auto add = [&](std::string name, CaseFamily family, std::size_t n_wt, std::size_t n_bess) {
        CaseConfig c;
        c.name = std::move(name);
        c.family = family;
        c.n_wt = n_wt;
        c.n_bess = n_bess;
        c.ga = ga;
        if (family == CaseFamily::JointLossCost) c.weights = {1.0 / 3, 1.0 / 3, 1.0 / 3};
        out.push_back(std::move(c));
    };
    for (std::size_t n = 1; n <= 6; ++n) add("bess_only_" + std::to_string(n), CaseFamily::BessOnly, 0, n);
    for (std::size_t n = 1; n <= 6; ++n) add("wt_only_" + std::to_string(n), CaseFamily::WtOnly, n, 0);
    for (auto [family, prefix] : {std::pair{CaseFamily::JointLoss, "joint_loss_"}, std::pair{CaseFamily::JointLossCost, "joint_cost_"}}) {
        int k = 1;
        for (std::size_t w = 1; w <= 3; ++w) {
            for (std::size_t b = 1; b <= 3; ++b) add(prefix + std::to_string(k++), family, w, b);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Serialization

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw std::runtime_error("cannot format number");
    return std::string(buf, ptr);
}

namespace {

std::string join(const std::vector<std::string>& items, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += sep;
        out += items[i];
    }
    return out;
}

std::string fixed(double v, int digits) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(digits) << v;
    return ss.str();
}

std::string size_text(const DeviceReport& d) {
    return fixed(d.p, 2) + (d.q < 0 ? "-j" : "+j") + fixed(std::abs(d.q), 2);
}

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
}

}  // namespace

void to_json(json& j, const CaseReport& r) {
    json devices = json::array();
    for (const auto& d : r.devices) {
        json dj{{"kind", to_string(d.kind)}, {"bus", d.bus}, {"p_kw", d.p}, {"q_kvar", d.q}, {"s_kva", d.s}, {"cost", d.cost}};
        if (d.kind == DeviceKind::BESS) dj["dc_capacity_kva"] = d.dc_capacity;
        else dj["fleet"] = d.fleet;
        devices.push_back(std::move(dj));
    }
    j = json{
        {"name", r.name},
        {"family", r.family},
        {"status", r.status},
        {"seed", r.seed},
        {"h_kw", r.h},
        {"devices", std::move(devices)},
        {"loss", {{"p_kw", r.p_loss}, {"q_kvar", r.q_loss}, {"s_kva", r.loss}, {"base_s_kva", r.base_loss},
                  {"reduction_pct", r.loss_reduction_pct}}},
        {"costs", {{"wt_total", r.wt_cost}, {"wt_power_kw", r.wt_power}, {"wt_ratio", r.wt_cost_ratio},
                   {"bess_total", r.bess_cost}}},
        {"fitness", r.fitness},
        {"penalty", r.penalty},
        {"violations", {{"voltage", r.violations.voltage}, {"bounds", r.violations.bounds}, {"chart", r.violations.chart}}},
        {"converged", r.converged},
        {"evaluations", r.evaluations},
        {"voltage_profile", {{"bus", r.bus_ids}, {"v_base_pu", r.v_base}, {"v_after_pu", r.v_after}}},
        {"ga_trace", "ga_trace.csv"},
    };
    if (!r.error.empty()) j["error"] = r.error;
}

void from_json(const json& j, CaseReport& r) {
    r = CaseReport{};
    r.name = j.at("name").get<std::string>();
    r.family = j.at("family").get<std::string>();
    r.status = j.at("status").get<std::string>();
    r.error = j.value("error", std::string{});
    r.seed = j.at("seed").get<std::uint64_t>();
    r.h = j.at("h_kw").get<double>();
    for (const auto& dj : j.at("devices")) {
        DeviceReport d;
        d.kind = parse_device_kind(dj.at("kind").get<std::string>());
        d.bus = dj.at("bus").get<int>();
        d.p = dj.at("p_kw").get<double>();
        d.q = dj.at("q_kvar").get<double>();
        d.s = dj.at("s_kva").get<double>();
        d.cost = dj.at("cost").get<double>();
        d.dc_capacity = dj.value("dc_capacity_kva", 0.0);
        if (dj.contains("fleet")) d.fleet = dj.at("fleet").get<FleetCounts>();
        r.devices.push_back(std::move(d));
    }
    const auto& loss = j.at("loss");
    r.p_loss = loss.at("p_kw").get<double>();
    r.q_loss = loss.at("q_kvar").get<double>();
    r.loss = loss.at("s_kva").get<double>();
    r.base_loss = loss.at("base_s_kva").get<double>();
    r.loss_reduction_pct = loss.at("reduction_pct").get<double>();
    const auto& costs = j.at("costs");
    r.wt_cost = costs.at("wt_total").get<double>();
    r.wt_power = costs.at("wt_power_kw").get<double>();
    r.wt_cost_ratio = costs.at("wt_ratio").get<double>();
    r.bess_cost = costs.at("bess_total").get<double>();
    r.fitness = j.at("fitness").get<double>();
    r.penalty = j.at("penalty").get<double>();
    const auto& v = j.at("violations");
    r.violations = {v.at("voltage").get<double>(), v.at("bounds").get<double>(), v.at("chart").get<double>()};
    r.converged = j.at("converged").get<bool>();
    r.evaluations = j.at("evaluations").get<std::size_t>();
    const auto& vp = j.at("voltage_profile");
    r.bus_ids = vp.at("bus").get<std::vector<int>>();
    r.v_base = vp.at("v_base_pu").get<std::vector<double>>();
    r.v_after = vp.at("v_after_pu").get<std::vector<double>>();
}

void to_json(json& j, const CaseConfig& c) {
    j = json{
        {"name", c.name},
        {"family", to_string(c.family)},
        {"n_wt", c.n_wt},
        {"n_bess", c.n_bess},
        {"h", c.h},
        {"weights", {c.weights.w1, c.weights.w2, c.weights.w3}},
        {"battery_type", c.battery_type},
        {"chart_mode", c.chart_mode == ChartMode::Strict ? "strict" : "vertex"},
        {"ga", {{"population", c.ga.population}, {"generations", c.ga.generations},
                {"crossover_rate", c.ga.crossover_rate}, {"mutation_rate", c.ga.mutation_rate},
                {"tournament_size", c.ga.tournament_size}, {"elitism", c.ga.elitism}, {"seed", c.ga.seed},
                {"sigma_p", c.ga.sigma_p}, {"sigma_q", c.ga.sigma_q}, {"levels", c.ga.levels}}},
        {"solver", {{"tol", c.solver.tol}, {"max_iter", c.solver.max_iter}, {"s_base_kva", c.solver.s_base_kva}}},
        {"penalty", {{"voltage_weight", c.penalty.voltage_weight}, {"bound_weight", c.penalty.bound_weight},
                     {"chart_weight", c.penalty.chart_weight}, {"v_min", c.penalty.v_min}, {"v_max", c.penalty.v_max}}},
        {"scales", {{"wt_ratio", c.scales.wt_ratio}, {"bess_cost", c.scales.bess_cost}, {"loss", c.scales.loss}}},
        {"devices", c.devices},
    };
    if (c.inverter_eta) j["inverter_eta"] = *c.inverter_eta;
    if (c.bounds) {
        j["bounds"] = {{"bess_p_min", c.bounds->bess_p_min}, {"bess_p_max", c.bounds->bess_p_max},
                       {"bess_q_min", c.bounds->bess_q_min}, {"bess_q_max", c.bounds->bess_q_max},
                       {"wt_p_max", c.bounds->wt_p_max}, {"q_cap", c.bounds->chart.q_cap},
                       {"slope", c.bounds->chart.slope}};
    }
}

void from_json(const json& j, CaseConfig& c) {
    c = CaseConfig{};
    c.name = j.value("name", c.name);
    c.family = parse_case_family(j.at("family").get<std::string>());
    c.n_wt = j.value("n_wt", std::size_t{0});
    c.n_bess = j.value("n_bess", std::size_t{0});
    c.h = j.value("h", c.h);
    if (j.contains("weights")) {
        const auto& w = j.at("weights");
        if (w.is_array()) {
            if (w.size() != 3) throw std::invalid_argument("weights must have three entries");
            c.weights = {w[0].get<double>(), w[1].get<double>(), w[2].get<double>()};
        } else {
            c.weights = {w.value("w1", 0.0), w.value("w2", 0.0), w.value("w3", 0.0)};
        }
    }
    c.battery_type = j.value("battery_type", c.battery_type);
    if (j.contains("inverter_eta")) c.inverter_eta = j.at("inverter_eta").get<double>();
    if (j.contains("chart_mode")) {
        const auto mode = j.at("chart_mode").get<std::string>();
        if (mode == "strict") c.chart_mode = ChartMode::Strict;
        else if (mode == "vertex") c.chart_mode = ChartMode::Vertex;
        else throw std::invalid_argument("chart_mode must be 'vertex' or 'strict'");
    }
    if (j.contains("ga")) {
        const auto& g = j.at("ga");
        c.ga.population = g.value("population", c.ga.population);
        c.ga.generations = g.value("generations", c.ga.generations);
        c.ga.crossover_rate = g.value("crossover_rate", c.ga.crossover_rate);
        c.ga.mutation_rate = g.value("mutation_rate", c.ga.mutation_rate);
        c.ga.tournament_size = g.value("tournament_size", c.ga.tournament_size);
        c.ga.elitism = g.value("elitism", c.ga.elitism);
        c.ga.seed = g.value("seed", c.ga.seed);
        c.ga.sigma_p = g.value("sigma_p", c.ga.sigma_p);
        c.ga.sigma_q = g.value("sigma_q", c.ga.sigma_q);
        c.ga.levels = g.value("levels", c.ga.levels);
        c.ga.workers = g.value("workers", c.ga.workers);
    }
    if (j.contains("solver")) {
        const auto& s = j.at("solver");
        c.solver.tol = s.value("tol", c.solver.tol);
        c.solver.max_iter = s.value("max_iter", c.solver.max_iter);
        c.solver.s_base_kva = s.value("s_base_kva", c.solver.s_base_kva);
    }
    if (j.contains("penalty")) {
        const auto& p = j.at("penalty");
        c.penalty.voltage_weight = p.value("voltage_weight", c.penalty.voltage_weight);
        c.penalty.bound_weight = p.value("bound_weight", c.penalty.bound_weight);
        c.penalty.chart_weight = p.value("chart_weight", c.penalty.chart_weight);
        c.penalty.v_min = p.value("v_min", c.penalty.v_min);
        c.penalty.v_max = p.value("v_max", c.penalty.v_max);
    }
    if (j.contains("scales")) {
        const auto& s = j.at("scales");
        c.scales.wt_ratio = s.value("wt_ratio", c.scales.wt_ratio);
        c.scales.bess_cost = s.value("bess_cost", c.scales.bess_cost);
        c.scales.loss = s.value("loss", c.scales.loss);
    }
    if (j.contains("bounds")) {
        const auto& b = j.at("bounds");
        DeviceBounds d = DeviceBounds::for_budget(c.h);
        d.bess_p_min = b.value("bess_p_min", d.bess_p_min);
        d.bess_p_max = b.value("bess_p_max", d.bess_p_max);
        d.bess_q_min = b.value("bess_q_min", d.bess_q_min);
        d.bess_q_max = b.value("bess_q_max", d.bess_q_max);
        d.wt_p_max = b.value("wt_p_max", d.wt_p_max);
        d.chart.q_cap = b.value("q_cap", d.chart.q_cap);
        d.chart.slope = b.value("slope", d.chart.slope);
        d.validate();
        c.bounds = d;
    }
    if (j.contains("devices")) c.devices = j.at("devices").get<DeviceConfig>();
}

std::string voltage_profile_csv(const CaseReport& report) {
    std::string out = "bus_id,v_base_pu,v_after_pu\n";
    for (std::size_t i = 0; i < report.bus_ids.size(); ++i) {
        out += std::to_string(report.bus_ids[i]) + ',' + format_double(report.v_base[i]) + ',' +
               format_double(report.v_after[i]) + '\n';
    }
    return out;
}

void write_case_outputs(const CaseReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_text(dir / "report.json", json(report).dump(2) + "\n");
    write_text(dir / "voltage_profile.csv", voltage_profile_csv(report));
    std::ostringstream trace;
    report.trace.write_csv(trace);
    write_text(dir / "ga_trace.csv", trace.str());
}

std::string SuiteResult::summary_csv() const {
    std::string out = "case,family,status,n_wt,n_bess,wt_buses,bess_buses,wt_sizes,bess_sizes,loss_kva,reduction_pct,wt_cost,bess_cost\n";
    for (const auto& r : reports) {
        std::vector<std::string> wt_bus, bess_bus, wt_size, bess_size;
        for (const auto& d : r.devices) {
            (d.kind == DeviceKind::WT ? wt_bus : bess_bus).push_back(std::to_string(d.bus));
            (d.kind == DeviceKind::WT ? wt_size : bess_size).push_back(size_text(d));
        }
        out += r.name + ',' + r.family + ',' + r.status + ',' + std::to_string(wt_bus.size()) + ',' +
               std::to_string(bess_bus.size()) + ',' + join(wt_bus, " ") + ',' + join(bess_bus, " ") + ',' +
               join(wt_size, " ") + ',' + join(bess_size, " ") + ',' + format_double(r.loss) + ',' +
               format_double(r.loss_reduction_pct) + ',' + format_double(r.wt_cost) + ',' +
               format_double(r.bess_cost) + '\n';
    }
    return out;
}

std::string SuiteResult::summary_text() const {
    std::ostringstream out;
    out << std::left << std::setw(16) << "case" << std::setw(17) << "family" << std::setw(12) << "WT buses"
        << std::setw(16) << "BESS buses" << std::right << std::setw(10) << "loss kVA" << std::setw(9) << "red. %"
        << std::setw(12) << "WT $" << std::setw(12) << "BESS $" << '\n';
    for (const auto& r : reports) {
        std::vector<std::string> wt_bus, bess_bus;
        for (const auto& d : r.devices) (d.kind == DeviceKind::WT ? wt_bus : bess_bus).push_back(std::to_string(d.bus));
        out << std::left << std::setw(16) << r.name << std::setw(17) << r.family;
        if (r.status != "ok") {
            out << "FAILED: " << r.error << '\n';
            continue;
        }
        out << std::setw(11) << (wt_bus.empty() ? "-" : join(wt_bus, ",")) << ' ' << std::setw(15)
            << (bess_bus.empty() ? "-" : join(bess_bus, ",")) << ' ' << std::right << std::setw(10) << fixed(r.loss, 3)
            << std::setw(9) << fixed(r.loss_reduction_pct, 2) << std::setw(12) << std::setprecision(3)
            << std::scientific << r.wt_cost << std::setw(12) << r.bess_cost << std::defaultfloat << '\n';
    }
    return out.str();
}

void write_suite_outputs(const SuiteResult& suite, const std::filesystem::path& root) {
    std::filesystem::create_directories(root);
    for (const auto& r : suite.reports) write_case_outputs(r, root / "reports" / r.name);
    write_text(root / "summary.csv", suite.summary_csv());
}

}  // namespace gridsite
