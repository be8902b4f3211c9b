#include "gridsite/devices.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace gridsite {

std::string_view to_string(DeviceKind kind) { return kind == DeviceKind::WT ? "WT" : "BESS"; }

DeviceKind parse_device_kind(std::string_view text) {
    if (text == "WT") return DeviceKind::WT;
    if (text == "BESS") return DeviceKind::BESS;
    throw std::invalid_argument("unknown device kind '" + std::string(text) + "'");
}

void BatteryCostParams::validate() const {
    if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("battery eta must lie in (0, 1]");
    if (c_e < 0.0 || c_p < 0.0 || bop < 0.0) throw std::invalid_argument("battery costs must be non-negative");
    if (!(duration_h > 0.0)) throw std::invalid_argument("battery duration_h must be positive");
}

void PqChartParams::validate() const {
    if (!(q_cap > 0.0) || !(slope > 0.0)) throw std::invalid_argument("PQ chart q_cap and slope must be positive");
}

PqChartParams PqChartParams::vertex_mode(double h) { return {0.64 * h, 0.64}; }

PqChartParams PqChartParams::strict_mode(double p_max) { return {0.32 * p_max, 0.64}; }

DeviceBounds DeviceBounds::for_budget(double h) {
    return {0.0, h, 0.0, h, h, PqChartParams::vertex_mode(h)};
}

void DeviceBounds::validate() const {
    if (bess_p_min > bess_p_max || bess_q_min > bess_q_max) throw std::invalid_argument("empty BESS bounds");
    if (!(wt_p_max >= 0.0)) throw std::invalid_argument("wt_p_max must be non-negative");
    chart.validate();
}

std::vector<WtCatalogEntry> default_wt_catalog() {
    return {
        {1.0, 2130, 48},         {1.5, 9000, 72},          {2.5, 17000, 120},
        {5.0, 32000, 240},       {10.0, 64000, 480},       {15.0, 100000, 720},
        {800.0, 1813000, 38400}, {1500.0, 3200000, 72000}, {2500.0, 4014700, 120000},
    };
}

BatteryCostParams li_ion() { return {"Li-ion", 500, 175, 0, 0.85, 1.0}; }

BatteryCostParams lead_acid() { return {"Lead-acid", 200, 175, 50, 0.75, 1.0}; }

bool wt_feasible(double p, double q, const PqChartParams& chart, double p_max) {
    return p >= 0.0 && p <= p_max && std::abs(q) <= chart.q_cap && q - chart.slope * p <= 0.0 &&
           -q - chart.slope * p <= 0.0;
}

double project_wt_q(double p, double q, const PqChartParams& chart, double p_max) {
    const double pc = std::clamp(p, 0.0, p_max);
    const double band = std::min(chart.q_cap, chart.slope * pc);
    return std::clamp(q, -band, band);
}

double apparent_power(double p, double q) { return std::hypot(p, q); }

double bess_dc_capacity(double s_ac, double eta_inverter) {
    if (!(eta_inverter > 0.0 && eta_inverter <= 1.0)) throw std::invalid_argument("inverter efficiency must lie in (0, 1]");
    return s_ac / eta_inverter;
}

double bess_cost(double p, const BatteryCostParams& params) {
    const double energy = p * params.duration_h;
    return params.c_e * energy / params.eta + params.c_p * p + params.bop;
}

namespace {

double unit_price(const WtCatalogEntry& e, const WtCostOptions& opts) {
    double price = opts.mode == FleetCostMode::Literal ? e.rated_p * e.cost : e.cost;
    if (opts.horizon_years > 0.0) price += opts.horizon_years * e.maintenance;
    return price;
}

}  // namespace

double wt_fleet_cost(const FleetCounts& counts, const std::vector<WtCatalogEntry>& catalog, const WtCostOptions& opts) {
    if (counts.size() != catalog.size()) throw std::invalid_argument("fleet counts must match catalog size");
    double cost = 0.0;
    for (std::size_t k = 0; k < counts.size(); ++k) cost += static_cast<double>(counts[k]) * unit_price(catalog[k], opts);
    return cost;
}

double wt_fleet_power(const FleetCounts& counts, const std::vector<WtCatalogEntry>& catalog) {
    if (counts.size() != catalog.size()) throw std::invalid_argument("fleet counts must match catalog size");
    double p = 0.0;
    for (std::size_t k = 0; k < counts.size(); ++k) p += static_cast<double>(counts[k]) * catalog[k].rated_p;
    return p;
}

FleetComposer::FleetComposer(std::vector<WtCatalogEntry> catalog, WtCostOptions opts, double max_target)
    : catalog_(std::move(catalog)), opts_(opts), max_target_(max_target) {
    if (catalog_.empty()) throw std::invalid_argument("turbine catalog is empty");
    if (!(max_target >= 0.0)) throw std::invalid_argument("fleet target must be non-negative");
    const std::size_t types = catalog_.size();

    // Integer power grid: the gcd of the ratings in milliwatts.
    rating_.resize(types);
    for (std::size_t k = 0; k < types; ++k) {
        if (!(catalog_[k].rated_p > 0.0)) throw std::invalid_argument("turbine rating must be positive");
        rating_[k] = std::llround(catalog_[k].rated_p * 1e6);
        if (rating_[k] <= 0) throw std::invalid_argument("turbine rating below 1 mW resolution");
        grid_mw_ = std::gcd(grid_mw_, rating_[k]);
    }
    for (auto& r : rating_) r /= grid_mw_;
    smallest_ = *std::min_element(rating_.begin(), rating_.end());

    // Any target window can be widened by at most one largest unit before
    // some total becomes reachable.
    const auto top = static_cast<long long>(std::ceil(max_target * 1e6 / static_cast<double>(grid_mw_) - 1e-9)) +
                     *std::max_element(rating_.begin(), rating_.end());
    constexpr long long kMaxStates = 2'000'000;
    if (top > kMaxStates) throw std::invalid_argument("fleet target too large for the turbine catalog resolution");

    const auto states = static_cast<std::size_t>(top + 1);
    best_.assign(states, {});
    counts_.assign(states * types, 0);
    best_[0].reachable = true;

    std::vector<long> trial(types);
    for (long long w = 1; w <= top; ++w) {
        auto& cur = best_[static_cast<std::size_t>(w)];
        auto cur_counts = counts_.begin() + static_cast<std::ptrdiff_t>(w) * static_cast<std::ptrdiff_t>(types);
        for (std::size_t k = 0; k < types; ++k) {
            const long long from = w - rating_[k];
            if (from < 0 || !best_[static_cast<std::size_t>(from)].reachable) continue;
            std::copy_n(counts_of(from), types, trial.begin());
            ++trial[k];
            // Cost is recomputed from the counts so equal mixes compare equal.
            double cost = 0.0;
            for (std::size_t t = 0; t < types; ++t) cost += static_cast<double>(trial[t]) * unit_price(catalog_[t], opts_);
            const long units = best_[static_cast<std::size_t>(from)].units + 1;
            bool take = !cur.reachable || cost < cur.cost || (cost == cur.cost && units < cur.units);
            if (cur.reachable && cost == cur.cost && units == cur.units) {
                take = std::lexicographical_compare(trial.begin(), trial.end(), cur_counts,
                                                    cur_counts + static_cast<std::ptrdiff_t>(types));
            }
            if (take) {
                cur = {true, cost, units};
                std::copy(trial.begin(), trial.end(), cur_counts);
            }
        }
    }
}

std::vector<long>::const_iterator FleetComposer::counts_of(long long w) const {
    return counts_.cbegin() + static_cast<std::ptrdiff_t>(w) * static_cast<std::ptrdiff_t>(catalog_.size());
}

bool FleetComposer::better(long long a, long long b) const {
    const auto& sa = best_[static_cast<std::size_t>(a)];
    const auto& sb = best_[static_cast<std::size_t>(b)];
    if (sa.cost != sb.cost) return sa.cost < sb.cost;
    if (sa.units != sb.units) return sa.units < sb.units;
    const auto n = static_cast<std::ptrdiff_t>(catalog_.size());
    return std::lexicographical_compare(counts_of(a), counts_of(a) + n, counts_of(b), counts_of(b) + n);
}

FleetCounts FleetComposer::compose(double target_p) const {
    if (!(target_p >= 0.0)) throw std::invalid_argument("fleet target must be non-negative");
    const std::size_t types = catalog_.size();
    if (target_p == 0.0) return FleetCounts(types, 0);
    if (target_p > max_target_ * (1 + 1e-12)) throw std::invalid_argument("fleet target exceeds composer range");

    const double target_units = target_p * 1e6 / static_cast<double>(grid_mw_);
    const auto lo = static_cast<long long>(std::ceil(target_units - 1e-9));
    const auto top = static_cast<long long>(best_.size()) - 1;
    auto hi = std::min(top, static_cast<long long>(std::ceil(target_units + static_cast<double>(smallest_) - 1e-9)) - 1);

    auto pick = [&](long long a, long long b) {
        long long chosen = -1;
        for (long long w = a; w <= b; ++w) {
            if (!best_[static_cast<std::size_t>(w)].reachable) continue;
            if (chosen < 0 || better(w, chosen)) chosen = w;
        }
        return chosen;
    };
    long long chosen = pick(lo, hi);
    while (chosen < 0 && hi < top) {
        hi = std::min(top, hi + smallest_);
        chosen = pick(lo, hi);
    }
    if (chosen < 0) throw std::invalid_argument("no turbine mix reaches the target");
    return FleetCounts(counts_of(chosen), counts_of(chosen) + static_cast<std::ptrdiff_t>(types));
}

FleetCounts compose_fleet(double target_p, const std::vector<WtCatalogEntry>& catalog, const WtCostOptions& opts) {
    return FleetComposer(catalog, opts, target_p).compose(target_p);
}

const BatteryCostParams& DeviceConfig::battery(std::string_view name) const {
    for (const auto& b : batteries) {
        if (b.name == name) return b;
    }
    throw std::invalid_argument("unknown battery type '" + std::string(name) + "'");
}

void to_json(nlohmann::json& j, const DeviceConfig& cfg) {
    j = nlohmann::json::object();
    auto& wt = j["wt_catalog"] = nlohmann::json::array();
    for (const auto& e : cfg.wt_catalog) wt.push_back({{"rated_kw", e.rated_p}, {"cost", e.cost}, {"maintenance", e.maintenance}});
    auto& bat = j["batteries"] = nlohmann::json::array();
    for (const auto& b : cfg.batteries) {
        bat.push_back({{"name", b.name}, {"c_e", b.c_e}, {"c_p", b.c_p}, {"bop", b.bop}, {"eta", b.eta},
                       {"duration_h", b.duration_h}});
    }
    j["wt_cost_mode"] = cfg.wt_cost.mode == FleetCostMode::Literal ? "literal" : "per_unit";
    j["maintenance_horizon_years"] = cfg.wt_cost.horizon_years;
}

void from_json(const nlohmann::json& j, DeviceConfig& cfg) {
    if (j.contains("wt_catalog")) {
        cfg.wt_catalog.clear();
        for (const auto& e : j.at("wt_catalog")) {
            WtCatalogEntry entry{e.at("rated_kw").get<double>(), e.at("cost").get<double>(), e.value("maintenance", 0.0)};
            if (!(entry.rated_p > 0.0) || !(entry.cost > 0.0)) throw std::invalid_argument("catalog entries need positive rating and cost");
            cfg.wt_catalog.push_back(entry);
        }
    }
    if (j.contains("batteries")) {
        cfg.batteries.clear();
        for (const auto& b : j.at("batteries")) {
            BatteryCostParams p{b.at("name").get<std::string>(), b.at("c_e").get<double>(), b.at("c_p").get<double>(),
                                b.value("bop", 0.0), b.at("eta").get<double>(), b.value("duration_h", 1.0)};
            p.validate();
            cfg.batteries.push_back(p);
        }
    }
    if (j.contains("wt_cost_mode")) {
        const auto mode = j.at("wt_cost_mode").get<std::string>();
        if (mode == "literal") cfg.wt_cost.mode = FleetCostMode::Literal;
        else if (mode == "per_unit") cfg.wt_cost.mode = FleetCostMode::PerUnit;
        else throw std::invalid_argument("wt_cost_mode must be 'per_unit' or 'literal'");
    }
    cfg.wt_cost.horizon_years = j.value("maintenance_horizon_years", cfg.wt_cost.horizon_years);
}

}  // namespace gridsite
