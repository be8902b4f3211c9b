#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace gridsite {

enum class DeviceKind { WT, BESS };

std::string_view to_string(DeviceKind kind);
DeviceKind parse_device_kind(std::string_view text);

/// One wind turbine or battery: bus id plus injected P (kW) and Q (kvar).
struct DevicePlacement {
    DeviceKind kind = DeviceKind::BESS;
    int bus = 0;
    double p = 0.0;
    double q = 0.0;

    friend bool operator==(const DevicePlacement&, const DevicePlacement&) = default;
};

struct WtCatalogEntry {
    double rated_p = 0.0;      // kW
    double cost = 0.0;         // $ per unit
    double maintenance = 0.0;  // $ per unit per year
};

struct BatteryCostParams {
    std::string name;
    double c_e = 0.0;          // $/kWh
    double c_p = 0.0;          // $/kW
    double bop = 0.0;          // $
    double eta = 1.0;          // storage efficiency
    double duration_h = 1.0;   // energy-to-power ratio

    void validate() const;
};

/// Wind-plant capability polytope: |q| <= q_cap and |q| <= slope * p.
struct PqChartParams {
    double q_cap = 640.0;  // kvar
    double slope = 0.64;

    void validate() const;
    /// q_cap = 0.64 h; matches the reported optimum at (h, 0.64 h).
    static PqChartParams vertex_mode(double h);
    /// q_cap = 0.32 p_max, the literal per-unit reading of the reactive cap.
    static PqChartParams strict_mode(double p_max);
};

/// How per-type turbine prices combine into a fleet cost.
enum class FleetCostMode {
    PerUnit,  // sum n_k cost_k
    Literal,  // sum n_k P_k cost_k
};

struct WtCostOptions {
    FleetCostMode mode = FleetCostMode::PerUnit;
    double horizon_years = 0.0;  // adds maintenance * years per unit when > 0
};

/// Bounds on device set-points (kW / kvar).
struct DeviceBounds {
    double bess_p_min = 0.0;
    double bess_p_max = 1000.0;
    double bess_q_min = 0.0;
    double bess_q_max = 1000.0;
    double wt_p_max = 1000.0;
    PqChartParams chart;

    /// Defaults scaled to the installable budget h.
    static DeviceBounds for_budget(double h);
    void validate() const;
};

std::vector<WtCatalogEntry> default_wt_catalog();
BatteryCostParams li_ion();
BatteryCostParams lead_acid();

bool wt_feasible(double p, double q, const PqChartParams& chart, double p_max);

/// Clamps q into the chart's reactive band at active power p.
double project_wt_q(double p, double q, const PqChartParams& chart, double p_max);

double apparent_power(double p, double q);

/// AC capacity divided by inverter efficiency.
double bess_dc_capacity(double s_ac, double eta_inverter);

/// c_e E / eta + c_p P + BoP with E = P * duration_h.
double bess_cost(double p, const BatteryCostParams& params);

using FleetCounts = std::vector<long>;

double wt_fleet_cost(const FleetCounts& counts, const std::vector<WtCatalogEntry>& catalog,
                     const WtCostOptions& opts = {});
double wt_fleet_power(const FleetCounts& counts, const std::vector<WtCatalogEntry>& catalog);

/// Cheapest integer turbine mix whose rated power lies in
/// [target, target + smallest rating). Ties go to fewer units, then to the
/// lexicographically smallest count vector.
///
/// The exact-total table is built once up to `max_target` and shared by every
/// compose() call, so one composer serves a whole optimization run.
class FleetComposer {
  public:
    FleetComposer(std::vector<WtCatalogEntry> catalog, WtCostOptions opts, double max_target);

    FleetCounts compose(double target_p) const;
    double max_target() const { return max_target_; }
    const std::vector<WtCatalogEntry>& catalog() const { return catalog_; }
    const WtCostOptions& options() const { return opts_; }

  private:
    struct State {
        bool reachable = false;
        double cost = 0.0;
        long units = 0;
    };

    bool better(long long a, long long b) const;
    std::vector<long>::const_iterator counts_of(long long w) const;

    std::vector<WtCatalogEntry> catalog_;
    WtCostOptions opts_;
    double max_target_ = 0.0;
    long long grid_mw_ = 0;  // milliwatts per table step
    std::vector<long long> rating_;
    long long smallest_ = 0;
    std::vector<State> best_;
    std::vector<long> counts_;
};

FleetCounts compose_fleet(double target_p, const std::vector<WtCatalogEntry>& catalog,
                          const WtCostOptions& opts = {});

/// Device catalog and battery types, loadable from JSON.
struct DeviceConfig {
    std::vector<WtCatalogEntry> wt_catalog = default_wt_catalog();
    std::vector<BatteryCostParams> batteries = {li_ion(), lead_acid()};
    WtCostOptions wt_cost;

    const BatteryCostParams& battery(std::string_view name) const;
};

void to_json(nlohmann::json& j, const DeviceConfig& cfg);
void from_json(const nlohmann::json& j, DeviceConfig& cfg);

}  // namespace gridsite
