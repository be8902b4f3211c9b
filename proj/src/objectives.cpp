#include "gridsite/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace gridsite {

ObjectiveWeights ObjectiveWeights::normalized() const {
    if (w1 < 0.0 || w2 < 0.0 || w3 < 0.0) throw std::invalid_argument("objective weights must be non-negative");
    const double sum = w1 + w2 + w3;
    if (!(sum > 0.0)) throw std::invalid_argument("objective weights must not all be zero");
    if (sum == 1.0) return *this;
    return {w1 / sum, w2 / sum, w3 / sum};
}

void PenaltyConfig::validate() const {
    if (voltage_weight < 0.0 || bound_weight < 0.0 || chart_weight < 0.0) {
        throw std::invalid_argument("penalty weights must be non-negative");
    }
    if (!(v_min < v_max)) throw std::invalid_argument("v_min must be below v_max");
}

double total_active_power(const std::vector<DevicePlacement>& placements) {
    return std::accumulate(placements.begin(), placements.end(), 0.0,
                           [](double s, const DevicePlacement& d) { return s + d.p; });
}

Candidate repair_power_balance(Candidate candidate, double h, const DeviceBounds& bounds) {
    auto& devs = candidate.placements;
    if (devs.empty()) return candidate;
    if (!(h >= 0.0)) throw std::invalid_argument("installable power h must be non-negative");

    const std::size_t n = devs.size();
    std::vector<double> lo(n), hi(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (devs[i].kind == DeviceKind::BESS) {
            lo[i] = bounds.bess_p_min;
            hi[i] = bounds.bess_p_max;
        } else {
            lo[i] = 0.0;
            hi[i] = bounds.wt_p_max;
        }
        if (!std::isfinite(devs[i].p)) devs[i].p = lo[i];
        devs[i].p = std::clamp(devs[i].p, lo[i], hi[i]);
    }
    if (std::accumulate(hi.begin(), hi.end(), 0.0) < h * (1 - 1e-12) ||
        std::accumulate(lo.begin(), lo.end(), 0.0) > h * (1 + 1e-12)) {
        throw std::invalid_argument("device bounds cannot meet the installable power h");
    }

    // Already balanced plans are left bit-for-bit alone so repair is idempotent.
    const double tol = 1e-12 * std::max(h, 1.0);
    if (std::abs(total_active_power(devs) - h) > tol) {
        std::vector<bool> fixed(n, false);
        for (std::size_t round = 0; round < n; ++round) {
            double target = h;
            double free_sum = 0.0;
            std::size_t free_count = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (fixed[i]) {
                    target -= devs[i].p;
                } else {
                    free_sum += devs[i].p;
                    ++free_count;
                }
            }
            if (free_count == 0) break;
            for (std::size_t i = 0; i < n; ++i) {
                if (fixed[i]) continue;
                devs[i].p = free_sum > 0.0 ? devs[i].p * (target / free_sum) : target / static_cast<double>(free_count);
            }
            bool clipped = false;
            for (std::size_t i = 0; i < n; ++i) {
                if (fixed[i] || (devs[i].p >= lo[i] && devs[i].p <= hi[i])) continue;
                devs[i].p = std::clamp(devs[i].p, lo[i], hi[i]);
                fixed[i] = true;
                clipped = true;
            }
            if (!clipped) break;
        }
    }

    for (auto& d : devs) {
        if (!std::isfinite(d.q)) d.q = 0.0;
        if (d.kind == DeviceKind::WT) {
            d.q = project_wt_q(d.p, d.q, bounds.chart, bounds.wt_p_max);
        } else {
            d.q = std::clamp(d.q, bounds.bess_q_min, bounds.bess_q_max);
        }
    }
    return candidate;
}

InjectionSet injections_with_devices(const NetworkModel& net, const std::vector<DevicePlacement>& placements) {
    auto s = base_injections(net);
    for (const auto& d : placements) {
        if (d.bus == net.slack_bus) throw std::invalid_argument("devices cannot be placed at the slack bus");
        s[net.index_of(d.bus)] -= Complex{d.p, d.q};
    }
    return s;
}

double loss_objective(Candidate& candidate, const NetworkModel& net, const SweepMatrices& mats,
                      const SolverOptions& opts, double sentinel) {
    candidate.flow_failed = false;
    try {
        candidate.flow = solve(net, mats, injections_with_devices(net, candidate.placements), opts);
    } catch (const SingularInjectionError&) {
        candidate.flow.reset();
        candidate.flow_failed = true;
    }
    if (candidate.flow && (!candidate.flow->converged || !std::isfinite(candidate.flow->loss_magnitude()))) {
        candidate.flow_failed = true;
    }
    candidate.loss = candidate.flow_failed ? sentinel : candidate.flow->loss_magnitude();
    return candidate.loss;
}

CostTerms cost_terms(const std::vector<DevicePlacement>& placements, const FleetComposer& composer,
                     const BatteryCostParams& battery) {
    CostTerms t;
    for (const auto& d : placements) {
        if (d.kind == DeviceKind::WT) {
            auto fleet = composer.compose(std::max(d.p, 0.0));
            t.wt_cost += wt_fleet_cost(fleet, composer.catalog(), composer.options());
            t.wt_power += wt_fleet_power(fleet, composer.catalog());
            t.fleets.push_back(std::move(fleet));
        } else {
            t.bess_cost += bess_cost(d.p, battery);
        }
    }
    t.wt_ratio = t.wt_power > 0.0 ? t.wt_cost / t.wt_power : 0.0;
    return t;
}

double cost_objective(Candidate& candidate, const FleetComposer& composer, const BatteryCostParams& battery) {
    candidate.costs = cost_terms(candidate.placements, composer, battery);
    return candidate.costs->total();
}

Violations violations(const std::vector<DevicePlacement>& placements, const LoadFlowResult& flow,
                      const PenaltyConfig& cfg, const DeviceBounds& bounds) {
    auto sq = [](double x) { return x > 0.0 ? x * x : 0.0; };
    Violations v;
    for (const auto& volt : flow.voltages) {
        const double m = std::abs(volt);
        v.voltage += sq(cfg.v_min - m) + sq(m - cfg.v_max);
    }
    for (const auto& d : placements) {
        if (d.kind == DeviceKind::BESS) {
            v.bounds += sq(bounds.bess_p_min - d.p) + sq(d.p - bounds.bess_p_max);
            v.bounds += sq(bounds.bess_q_min - d.q) + sq(d.q - bounds.bess_q_max);
        } else {
            v.bounds += sq(-d.p) + sq(d.p - bounds.wt_p_max);
            v.chart += sq(std::abs(d.q) - bounds.chart.q_cap);
            v.chart += sq(d.q - bounds.chart.slope * d.p) + sq(-d.q - bounds.chart.slope * d.p);
        }
    }
    return v;
}

double penalty(const Violations& v, const PenaltyConfig& cfg) {
    return cfg.voltage_weight * v.voltage + cfg.bound_weight * v.bounds + cfg.chart_weight * v.chart;
}

double penalty(Candidate& candidate, const LoadFlowResult& flow, const PenaltyConfig& cfg, const DeviceBounds& bounds) {
    candidate.violations = violations(candidate.placements, flow, cfg, bounds);
    candidate.penalty = penalty(candidate.violations, cfg);
    return candidate.penalty;
}

double combined_objective(const Candidate& candidate, const ObjectiveWeights& weights, const TermScales& scales) {
    double f = 0.0;
    if (weights.w1 != 0.0 || weights.w2 != 0.0) {
        if (!candidate.costs) throw std::logic_error("cost terms not evaluated for this candidate");
        if (weights.w1 != 0.0) f += weights.w1 * (candidate.costs->wt_ratio / scales.wt_ratio);
        if (weights.w2 != 0.0) f += weights.w2 * (candidate.costs->bess_cost / scales.bess_cost);
    }
    if (weights.w3 != 0.0) f += weights.w3 * (candidate.loss / scales.loss);
    return f + candidate.penalty;
}

Evaluator::Evaluator(std::shared_ptr<const NetworkModel> net, Settings settings)
    : net_(std::move(net)), settings_(std::move(settings)) {
    if (!net_) throw std::invalid_argument("evaluator needs a network");
    settings_.solver.validate();
    settings_.penalty.validate();
    settings_.bounds.validate();
    settings_.weights = settings_.weights.normalized();
    if (!(settings_.h >= 0.0)) throw std::invalid_argument("installable power h must be non-negative");
    if (!(settings_.scales.wt_ratio > 0.0 && settings_.scales.bess_cost > 0.0 && settings_.scales.loss > 0.0)) {
        throw std::invalid_argument("term scales must be positive");
    }
    mats_ = std::make_shared<const SweepMatrices>(build_sweep_matrices(*net_));
    base_flow_ = solve(*net_, *mats_, base_injections(*net_), settings_.solver);
    if (!base_flow_.converged) throw std::runtime_error("base-case load flow did not converge");
    composer_ = std::make_shared<const FleetComposer>(settings_.devices.wt_catalog, settings_.devices.wt_cost,
                                                      std::max(settings_.h, settings_.bounds.wt_p_max));
    battery_ = settings_.devices.battery(settings_.battery_type);
}

Candidate Evaluator::repair(Candidate candidate) const {
    return repair_power_balance(std::move(candidate), settings_.h, settings_.bounds);
}

double Evaluator::evaluate(Candidate& candidate) const {
    candidate = repair(std::move(candidate));
    loss_objective(candidate, *net_, *mats_, settings_.solver, sentinel());
    if (candidate.flow_failed) {
        candidate.penalty = 0.0;
        candidate.costs.reset();
        candidate.fitness = sentinel();
        return candidate.fitness;
    }
    penalty(candidate, *candidate.flow, settings_.penalty, settings_.bounds);
    const auto& w = settings_.weights;
    if (w.w1 != 0.0 || w.w2 != 0.0) cost_objective(candidate, *composer_, battery_);
    candidate.fitness = combined_objective(candidate, w, settings_.scales);
    return candidate.fitness;
}

}  // namespace gridsite
