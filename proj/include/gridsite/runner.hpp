#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gridsite/ga.hpp"
#include "gridsite/objectives.hpp"

namespace gridsite {

enum class CaseFamily { BessOnly, WtOnly, JointLoss, JointLossCost };

std::string_view to_string(CaseFamily family);
CaseFamily parse_case_family(std::string_view text);

enum class ChartMode { Vertex, Strict };

struct CaseConfig {
    std::string name = "case";
    CaseFamily family = CaseFamily::BessOnly;
    std::size_t n_wt = 0;
    std::size_t n_bess = 1;
    double h = 1000.0;
    ObjectiveWeights weights;
    std::string battery_type = "Li-ion";
    /// Inverter efficiency for the DC capacity column; defaults to the battery's efficiency.
    std::optional<double> inverter_eta;
    GaConfig ga;
    SolverOptions solver;
    PenaltyConfig penalty;
    TermScales scales;
    ChartMode chart_mode = ChartMode::Vertex;
    std::optional<DeviceBounds> bounds;  // defaults follow h and chart_mode
    DeviceConfig devices;

    /// Family/count consistency; JointLoss forces weights (0, 0, 1).
    void validate() const;
    ObjectiveWeights effective_weights() const;
    DeviceBounds effective_bounds() const;
    Evaluator::Settings evaluator_settings() const;
};

struct DeviceReport {
    DeviceKind kind = DeviceKind::BESS;
    int bus = 0;
    double p = 0.0;
    double q = 0.0;
    double s = 0.0;            // kVA
    double dc_capacity = 0.0;  // kVA, BESS only
    double cost = 0.0;         // $
    FleetCounts fleet;         // WT only
};

struct CaseReport {
    std::string name;
    std::string family;
    std::string status = "ok";
    std::string error;
    std::uint64_t seed = 0;
    double h = 0.0;
    std::vector<DeviceReport> devices;
    double p_loss = 0.0;         // kW
    double q_loss = 0.0;         // kvar
    double loss = 0.0;           // |S_TL|, kVA
    double base_loss = 0.0;      // kVA
    double loss_reduction_pct = 0.0;
    double wt_cost = 0.0;
    double wt_power = 0.0;
    double wt_cost_ratio = 0.0;
    double bess_cost = 0.0;
    double fitness = 0.0;
    double penalty = 0.0;
    Violations violations;
    bool converged = true;
    std::size_t evaluations = 0;
    std::vector<int> bus_ids;
    std::vector<double> v_base;
    std::vector<double> v_after;
    GaTrace trace;  // written to ga_trace.csv, not to report.json

    std::vector<DevicePlacement> placements() const;
};

void to_json(nlohmann::json& j, const CaseReport& r);
void from_json(const nlohmann::json& j, CaseReport& r);
void to_json(nlohmann::json& j, const CaseConfig& c);
void from_json(const nlohmann::json& j, CaseConfig& c);

/// Base solve, GA search, final solve, and report assembly.
CaseReport run_case(const CaseConfig& cfg, const NetworkModel& net);

struct EvaluateOptions {
    bool repair = true;
    /// Added to every bus id before evaluation, for plans published with
    /// zero-based bus labels.
    int bus_offset = 0;
};

/// Scores a given plan without searching.
CaseReport evaluate_fixed(const std::vector<DevicePlacement>& placements, const NetworkModel& net,
                          const CaseConfig& cfg = {}, const EvaluateOptions& opts = {});

struct SuiteResult {
    std::vector<CaseReport> reports;  // one per config, in config order

    /// One row per case, shaped like the published result tables.
    std::string summary_csv() const;
    std::string summary_text() const;
};

/// Runs every case; a failing case is recorded with status "failed".
SuiteResult run_suite(const std::vector<CaseConfig>& configs, const NetworkModel& net, std::size_t threads = 1);

/// The 30 case-study configurations: 6 BESS-only, 6 WT-only, 9 joint loss,
/// and 9 joint loss-and-cost cases.
std::vector<CaseConfig> case_study_suite(const GaConfig& ga = {});

/// report.json, voltage_profile.csv and ga_trace.csv under `dir`.
void write_case_outputs(const CaseReport& report, const std::filesystem::path& dir);
/// reports/<case>/... per case plus summary.csv under `root`.
void write_suite_outputs(const SuiteResult& suite, const std::filesystem::path& root);

std::string voltage_profile_csv(const CaseReport& report);

/// Shortest round-trip decimal text for a double.
std::string format_double(double v);

}  // namespace gridsite
