#pragma once

#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "gridsite/devices.hpp"
#include "gridsite/netmodel.hpp"
#include "gridsite/powerflow.hpp"

namespace gridsite {

/// Weights of the combined objective (WT cost ratio, BESS cost, loss).
struct ObjectiveWeights {
    double w1 = 0.0;
    double w2 = 0.0;
    double w3 = 1.0;

    /// Divides by the sum; throws if any weight is negative or all are zero.
    ObjectiveWeights normalized() const;
};

/// Per-term divisors applied before weighting. Unit scales sum $/kW, $ and kVA as-is.
struct TermScales {
    double wt_ratio = 1.0;
    double bess_cost = 1.0;
    double loss = 1.0;
};

struct PenaltyConfig {
    double voltage_weight = 1e6;
    double bound_weight = 1.0;
    double chart_weight = 1.0;
    double v_min = 0.90;
    double v_max = 1.05;

    void validate() const;
};

/// Sums of squared constraint violations, unweighted.
struct Violations {
    double voltage = 0.0;  // p.u.^2
    double bounds = 0.0;   // kW^2 / kvar^2
    double chart = 0.0;    // kvar^2

    bool feasible() const { return voltage == 0.0 && bounds == 0.0 && chart == 0.0; }
};

struct CostTerms {
    double wt_cost = 0.0;    // $
    double wt_power = 0.0;   // kW of composed fleets
    double wt_ratio = 0.0;   // $/kW, zero when no turbine power
    double bess_cost = 0.0;  // $
    std::vector<FleetCounts> fleets;  // one per WT placement, in placement order

    double total() const { return wt_ratio + bess_cost; }
};

/// A siting/sizing plan plus whatever has been evaluated for it.
struct Candidate {
    std::vector<DevicePlacement> placements;
    double fitness = std::numeric_limits<double>::infinity();
    double loss = 0.0;       // |S_TL| in kVA
    double penalty = 0.0;
    bool flow_failed = false;
    Violations violations;
    std::optional<CostTerms> costs;
    std::optional<LoadFlowResult> flow;
};

double total_active_power(const std::vector<DevicePlacement>& placements);

/// Scales every active set-point so they sum to h, then projects each device
/// back into its bounds (chart projection for WTs, box clamp for BESSs).
/// All-zero active power is replaced by an equal split of h.
Candidate repair_power_balance(Candidate candidate, double h, const DeviceBounds& bounds);

/// Bus loads with device output subtracted; co-located devices add up.
InjectionSet injections_with_devices(const NetworkModel& net, const std::vector<DevicePlacement>& placements);

/// Solves the load flow for the candidate, caches it and returns |S_TL|.
/// Returns `sentinel` and marks flow_failed when the sweep does not converge.
double loss_objective(Candidate& candidate, const NetworkModel& net, const SweepMatrices& mats,
                      const SolverOptions& opts, double sentinel = std::numeric_limits<double>::max());

/// WT cost ratio (fleet cost over fleet power) plus summed BESS cost.
CostTerms cost_terms(const std::vector<DevicePlacement>& placements, const FleetComposer& composer,
                     const BatteryCostParams& battery);
double cost_objective(Candidate& candidate, const FleetComposer& composer, const BatteryCostParams& battery);

Violations violations(const std::vector<DevicePlacement>& placements, const LoadFlowResult& flow,
                      const PenaltyConfig& cfg, const DeviceBounds& bounds);
double penalty(const Violations& v, const PenaltyConfig& cfg);
double penalty(Candidate& candidate, const LoadFlowResult& flow, const PenaltyConfig& cfg, const DeviceBounds& bounds);

/// Weighted sum of the cached objective terms plus the cached penalty.
/// Terms with zero weight are skipped entirely.
double combined_objective(const Candidate& candidate, const ObjectiveWeights& weights, const TermScales& scales = {});

/// Everything needed to score candidates on one feeder. Immutable once built;
/// evaluate() may run concurrently on distinct candidates.
class Evaluator {
  public:
    struct Settings {
        double h = 1000.0;
        DeviceBounds bounds = DeviceBounds::for_budget(1000.0);
        SolverOptions solver;
        PenaltyConfig penalty;
        ObjectiveWeights weights;
        TermScales scales;
        DeviceConfig devices;
        std::string battery_type = "Li-ion";
    };

    Evaluator(std::shared_ptr<const NetworkModel> net, Settings settings);

    /// Repairs, solves, and scores the candidate; returns its fitness.
    double evaluate(Candidate& candidate) const;
    Candidate repair(Candidate candidate) const;

    const NetworkModel& network() const { return *net_; }
    const SweepMatrices& matrices() const { return *mats_; }
    const Settings& settings() const { return settings_; }
    const LoadFlowResult& base_flow() const { return base_flow_; }
    double base_loss() const { return base_flow_.loss_magnitude(); }
    double sentinel() const { return 1e6 * base_loss(); }
    const FleetComposer& composer() const { return *composer_; }
    const BatteryCostParams& battery() const { return battery_; }

  private:
    std::shared_ptr<const NetworkModel> net_;
    std::shared_ptr<const SweepMatrices> mats_;
    Settings settings_;
    LoadFlowResult base_flow_;
    std::shared_ptr<const FleetComposer> composer_;
    BatteryCostParams battery_;
};

}  // namespace gridsite
