// gridsite: site and size wind turbines and batteries on a radial feeder.
//
//   gridsite solve    --dataset ieee33
//   gridsite optimize --config case.json [--seed N]
//   gridsite evaluate --placements plan.json
//   gridsite suite    [--config suite.json]
//   gridsite catalog  [--config devices.json]

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gridsite/runner.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kOk = 0;
constexpr int kRuntimeError = 1;
constexpr int kUsageError = 2;

/// Bad flags, missing files, malformed configs.
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Options {
    std::string dataset = "ieee33";
    std::string config;
    std::string placements;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::size_t threads = 1;
    bool quiet = false;
};

fs::path output_dir(const Options& o) {
    if (!o.out.empty()) return o.out;
    if (const char* env = std::getenv("GRIDSITE_OUT"); env && *env) return env;
    return "gridsite_out";
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("config not found: " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw InputError(path + ": " + e.what());
    }
}

gridsite::NetworkModel dataset(const Options& o) {
    try {
        return gridsite::load_network(o.dataset);
    } catch (const gridsite::NetworkError& e) {
        throw InputError(e.what());
    }
}

template <typename T>
T parse_config(const json& j, const std::string& what) {
    try {
        return j.get<T>();
    } catch (const std::exception& e) {
        throw InputError(what + ": " + e.what());
    }
}

void write_file(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
}

void print_case(const gridsite::CaseReport& r, std::ostream& out) {
    out << std::fixed << std::setprecision(3);
    out << r.name << " (" << r.family << ")\n";
    for (const auto& d : r.devices) {
        out << "  " << std::setw(4) << gridsite::to_string(d.kind) << " bus " << std::setw(3) << d.bus << "  "
            << d.p << (d.q < 0 ? " - j" : " + j") << std::abs(d.q) << "  |S| " << d.s << " kVA\n";
    }
    out << "  loss " << r.p_loss << " + j" << r.q_loss << "  |S_TL| " << r.loss << " kVA  (base " << r.base_loss
        << ", reduction " << std::setprecision(2) << r.loss_reduction_pct << "%)\n";
    out << std::defaultfloat;
}

int cmd_solve(const Options& o) {
    const auto net = dataset(o);
    const gridsite::CaseConfig cfg;
    auto report = gridsite::evaluate_fixed({}, net, cfg);
    report.name = "base";
    const auto dir = output_dir(o);
    write_file(dir / "voltage_profile.csv", gridsite::voltage_profile_csv(report));

    std::size_t worst = 0;
    for (std::size_t i = 1; i < report.v_base.size(); ++i) {
        if (report.v_base[i] < report.v_base[worst]) worst = i;
    }
    std::cout << std::fixed << std::setprecision(3);
    std::cout << "buses " << net.bus_count() << ", branches " << net.branch_count() << ", load "
              << net.total_p_load() << " kW + j" << net.total_q_load() << " kvar\n";
    std::cout << "active loss   " << report.p_loss << " kW\n";
    std::cout << "reactive loss " << report.q_loss << " kvar\n";
    std::cout << "|S_TL|        " << report.loss << " kVA\n";
    std::cout << "min voltage   " << std::setprecision(5) << report.v_base[worst] << " p.u. at bus "
              << report.bus_ids[worst] << '\n';
    if (!o.quiet) std::cout << "voltage profile: " << (dir / "voltage_profile.csv").string() << '\n';
    return kOk;
}

int cmd_optimize(const Options& o) {
    if (o.config.empty()) throw InputError("optimize needs --config");
    auto cfg = parse_config<gridsite::CaseConfig>(read_json(o.config), o.config);
    if (o.seed) cfg.ga.seed = *o.seed;
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    }
    const auto net = dataset(o);
    const auto report = gridsite::run_case(cfg, net);
    const auto dir = output_dir(o) / "reports" / report.name;
    gridsite::write_case_outputs(report, dir);
    if (!o.quiet) {
        print_case(report, std::cout);
        std::cout << "report: " << (dir / "report.json").string() << '\n';
    }
    return kOk;
}

int cmd_evaluate(const Options& o) {
    const auto path = !o.placements.empty() ? o.placements : o.config;
    if (path.empty()) throw InputError("evaluate needs --placements");
    const auto j = read_json(path);
    gridsite::CaseConfig cfg;
    std::vector<gridsite::DevicePlacement> plan;
    gridsite::EvaluateOptions eo;
    try {
        if (j.contains("case")) cfg = j.at("case").get<gridsite::CaseConfig>();
        cfg.name = j.value("name", std::string("evaluate"));
        cfg.h = j.value("h", cfg.h);
        eo.repair = j.value("repair", true);
        eo.bus_offset = j.value("bus_offset", 0);
        for (const auto& pj : j.value("placements", json::array())) {
            plan.push_back({gridsite::parse_device_kind(pj.at("kind").get<std::string>()), pj.at("bus").get<int>(),
                            pj.at("p").get<double>(), pj.at("q").get<double>()});
        }
    } catch (const std::exception& e) {
        throw InputError(path + ": " + e.what());
    }
    const auto net = dataset(o);
    gridsite::CaseReport report;
    try {
        report = gridsite::evaluate_fixed(plan, net, cfg, eo);
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    }
    const auto dir = output_dir(o) / "reports" / report.name;
    gridsite::write_case_outputs(report, dir);
    if (!o.quiet) {
        print_case(report, std::cout);
        std::cout << "report: " << (dir / "report.json").string() << '\n';
    }
    return report.converged ? kOk : kRuntimeError;
}

int cmd_suite(const Options& o) {
    std::vector<gridsite::CaseConfig> configs;
    if (o.config.empty() || o.config == "builtin") {
        configs = gridsite::case_study_suite();
    } else {
        const auto j = read_json(o.config);
        if (!j.contains("cases")) throw InputError(o.config + ": missing 'cases'");
        configs = parse_config<std::vector<gridsite::CaseConfig>>(j.at("cases"), o.config);
    }
    if (o.seed) {
        for (auto& c : configs) c.ga.seed = *o.seed;
    }
    const auto net = dataset(o);
    const auto suite = gridsite::run_suite(configs, net, o.threads);
    const auto dir = output_dir(o);
    gridsite::write_suite_outputs(suite, dir);
    if (!o.quiet) {
        std::cout << suite.summary_text();
        std::cout << "summary: " << (dir / "summary.csv").string() << '\n';
    }
    const bool any_failed =
        std::any_of(suite.reports.begin(), suite.reports.end(), [](const auto& r) { return r.status != "ok"; });
    return any_failed ? kRuntimeError : kOk;
}

int cmd_catalog(const Options& o) {
    gridsite::DeviceConfig devices;
    if (!o.config.empty()) devices = parse_config<gridsite::DeviceConfig>(read_json(o.config), o.config);
    std::cout << "Wind turbines\n";
    std::cout << std::setw(6) << "type" << std::setw(12) << "rated kW" << std::setw(14) << "cost $" << std::setw(14)
              << "maint. $/yr" << std::setw(12) << "$/kW" << '\n';
    for (std::size_t k = 0; k < devices.wt_catalog.size(); ++k) {
        const auto& e = devices.wt_catalog[k];
        std::cout << std::setw(6) << k + 1 << std::setw(12) << e.rated_p << std::setw(14) << std::fixed
                  << std::setprecision(0) << e.cost << std::setw(14) << e.maintenance << std::setw(12)
                  << e.cost / e.rated_p << std::defaultfloat << '\n';
    }
    std::cout << "\nBatteries\n";
    std::cout << std::left << std::setw(12) << "type" << std::right << std::setw(10) << "c_e $/kWh" << std::setw(10)
              << "c_p $/kW" << std::setw(10) << "BoP $" << std::setw(8) << "eta" << std::setw(12) << "duration h"
              << '\n';
    for (const auto& b : devices.batteries) {
        std::cout << std::left << std::setw(12) << b.name << std::right << std::setw(10) << b.c_e << std::setw(10)
                  << b.c_p << std::setw(10) << b.bop << std::setw(8) << b.eta << std::setw(12) << b.duration_h << '\n';
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Siting and sizing of wind turbines and batteries on radial feeders"};
    app.require_subcommand(1);
    Options o;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--dataset", o.dataset, "feeder directory or 'ieee33'");
        sub->add_option("--out", o.out, "output directory (env GRIDSITE_OUT)");
        sub->add_flag("--quiet", o.quiet, "suppress progress output");
    };
    auto* solve = app.add_subcommand("solve", "base-case load flow");
    add_common(solve);
    auto* optimize = app.add_subcommand("optimize", "run one case");
    add_common(optimize);
    optimize->add_option("--config", o.config, "case config JSON");
    optimize->add_option("--seed", o.seed, "override the GA seed");
    auto* evaluate = app.add_subcommand("evaluate", "score a fixed plan");
    add_common(evaluate);
    evaluate->add_option("--placements,--config", o.placements, "placements JSON");
    auto* suite = app.add_subcommand("suite", "run a list of cases");
    add_common(suite);
    suite->add_option("--config", o.config, "suite JSON with a 'cases' array (default: built-in case studies)");
    suite->add_option("--seed", o.seed, "override every case's GA seed");
    suite->add_option("--threads", o.threads, "cases run concurrently")->check(CLI::PositiveNumber);
    auto* catalog = app.add_subcommand("catalog", "print turbine and battery cost data");
    catalog->add_option("--config", o.config, "device config JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsageError;
    }

    try {
        if (*solve) return cmd_solve(o);
        if (*optimize) return cmd_optimize(o);
        if (*evaluate) return cmd_evaluate(o);
        if (*suite) return cmd_suite(o);
        if (*catalog) return cmd_catalog(o);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
    return kUsageError;
}
