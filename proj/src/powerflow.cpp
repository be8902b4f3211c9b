#include "gridsite/powerflow.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gridsite {

void SolverOptions::validate() const {
    if (!(tol > 0.0)) throw std::invalid_argument("solver tol must be positive");
    if (max_iter < 1) throw std::invalid_argument("solver max_iter must be >= 1");
    if (!(s_base_kva > 0.0)) throw std::invalid_argument("solver s_base_kva must be positive");
}

InjectionSet base_injections(const NetworkModel& net) {
    InjectionSet s(net.buses.size());
    for (std::size_t i = 0; i < net.buses.size(); ++i) s[i] = {net.buses[i].p_load, net.buses[i].q_load};
    return s;
}

std::vector<double> LoadFlowResult::voltage_magnitudes() const {
    std::vector<double> out(voltages.size());
    std::transform(voltages.begin(), voltages.end(), out.begin(), [](Complex v) { return std::abs(v); });
    return out;
}

std::vector<double> LoadFlowResult::voltage_angles() const {
    std::vector<double> out(voltages.size());
    std::transform(voltages.begin(), voltages.end(), out.begin(),
                   [](Complex v) { return std::atan2(v.imag(), v.real()); });
    return out;
}

std::size_t LoadFlowResult::min_voltage_index() const {
    auto mags = voltage_magnitudes();
    return static_cast<std::size_t>(std::min_element(mags.begin(), mags.end()) - mags.begin());
}

std::vector<Complex> equivalent_currents(std::span<const Complex> injections, std::span<const Complex> voltages) {
    if (injections.size() != voltages.size()) throw std::invalid_argument("injection/voltage size mismatch");
    std::vector<Complex> out(injections.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (voltages[i] == Complex{}) {
            throw SingularInjectionError("zero voltage at bus position " + std::to_string(i));
        }
        out[i] = std::conj(injections[i] / voltages[i]);
    }
    return out;
}

BranchLoss ohmic_loss(double r, double x, double current_magnitude) {
    const double i2 = current_magnitude * current_magnitude;
    return {r * i2, x * i2};
}

double impedance_base(const NetworkModel& net, const SolverOptions& opts) {
    // kV^2 / MVA = ohm
    return net.v_base * net.v_base / (opts.s_base_kva / 1000.0);
}

std::vector<BranchLoss> branch_losses(const NetworkModel& net, std::span<const Complex> branch_currents,
                                      const SolverOptions& opts) {
    const double zb = impedance_base(net, opts);
    std::vector<BranchLoss> out(net.branches.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        const auto& br = net.branches[k];
        auto pu = ohmic_loss(br.r / zb, br.x / zb, std::abs(branch_currents[k]));
        out[k] = {pu.p * opts.s_base_kva, pu.q * opts.s_base_kva};
    }
    return out;
}

Complex total_loss(std::span<const BranchLoss> losses) {
    Complex s{};
    for (const auto& l : losses) s += Complex{l.p, l.q};
    return s;
}

LoadFlowResult solve(const NetworkModel& net, const SweepMatrices& mats, const InjectionSet& injections,
                     const SolverOptions& opts) {
    opts.validate();
    const auto n_bus = net.buses.size();
    if (injections.size() != n_bus) throw std::invalid_argument("injection set must cover every bus");
    const auto n = static_cast<Eigen::Index>(n_bus) - 1;
    if (mats.drop.rows() != n || mats.bibc.rows() != static_cast<Eigen::Index>(net.branches.size())) {
        throw std::invalid_argument("sweep matrices do not match the network");
    }

    const double zb = impedance_base(net, opts);
    const Complex v_slack{net.v0, 0.0};

    std::vector<Complex> s_pu(n_bus);
    for (std::size_t i = 1; i < n_bus; ++i) s_pu[i] = injections[i] / opts.s_base_kva;

    LoadFlowResult res;
    res.voltages.assign(n_bus, v_slack);
    Eigen::VectorXcd current(n);

    for (int it = 1; it <= opts.max_iter; ++it) {
        auto inj = equivalent_currents(std::span(s_pu).subspan(1), std::span<const Complex>(res.voltages).subspan(1));
        for (Eigen::Index i = 0; i < n; ++i) current(i) = inj[static_cast<std::size_t>(i)];
        const Eigen::VectorXcd dv = (mats.drop * current) / zb;

        double change = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const Complex v_new = v_slack - dv(i);
            auto& v_old = res.voltages[static_cast<std::size_t>(i) + 1];
            change = std::max(change, std::abs(v_new - v_old));
            v_old = v_new;
        }
        res.iterations = it;
        res.residual = change;
        if (!std::isfinite(change)) break;
        if (change < opts.tol) {
            res.converged = true;
            break;
        }
    }

    // Branch currents and losses at the final voltages.
    auto inj = equivalent_currents(std::span(s_pu).subspan(1), std::span<const Complex>(res.voltages).subspan(1));
    for (Eigen::Index i = 0; i < n; ++i) current(i) = inj[static_cast<std::size_t>(i)];
    const Eigen::VectorXcd b = mats.bibc.cast<Complex>() * current;
    res.branch_currents.assign(b.data(), b.data() + b.size());
    res.branch_losses = branch_losses(net, res.branch_currents, opts);
    res.total_loss = total_loss(res.branch_losses);
    return res;
}

}  // namespace gridsite
