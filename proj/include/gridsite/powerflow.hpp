#pragma once

#include <complex>
#include <span>
#include <stdexcept>
#include <vector>

#include "gridsite/netmodel.hpp"

namespace gridsite {

using Complex = std::complex<double>;

/// A bus whose voltage collapsed to zero cannot carry a constant-power injection.
class SingularInjectionError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct SolverOptions {
    double tol = 1e-6;         // p.u., max per-bus voltage update
    int max_iter = 100;
    double s_base_kva = 1000;  // power base for per-unit conversion

    void validate() const;
};

/// Net complex demand per bus (kW + j kvar), indexed like NetworkModel::buses.
/// Load minus generation; the slack entry is ignored.
using InjectionSet = std::vector<Complex>;

/// Per-bus loads of `net` with no devices connected.
InjectionSet base_injections(const NetworkModel& net);

struct BranchLoss {
    double p = 0.0;  // kW
    double q = 0.0;  // kvar
};

struct LoadFlowResult {
    std::vector<Complex> voltages;         // p.u., per bus
    std::vector<Complex> branch_currents;  // p.u., per branch
    std::vector<BranchLoss> branch_losses;
    Complex total_loss;                    // kW + j kvar
    int iterations = 0;
    bool converged = false;
    double residual = 0.0;                 // last max voltage update, p.u.

    double loss_magnitude() const { return std::abs(total_loss); }
    std::vector<double> voltage_magnitudes() const;
    std::vector<double> voltage_angles() const;  // radians
    /// Position of the bus with the lowest voltage magnitude.
    std::size_t min_voltage_index() const;
};

/// conj(S_i / V_i) per bus, both in p.u.
std::vector<Complex> equivalent_currents(std::span<const Complex> injections, std::span<const Complex> voltages);

/// Ohmic loss r|I|^2 + j x|I|^2 in whatever units the inputs carry.
BranchLoss ohmic_loss(double r, double x, double current_magnitude);

/// Per-branch losses in kW/kvar from per-unit branch currents.
std::vector<BranchLoss> branch_losses(const NetworkModel& net, std::span<const Complex> branch_currents,
                                      const SolverOptions& opts);

Complex total_loss(std::span<const BranchLoss> losses);

/// Backward-forward sweep from a flat start. Non-convergence is reported via
/// `converged` and `residual`, not thrown.
LoadFlowResult solve(const NetworkModel& net, const SweepMatrices& mats, const InjectionSet& injections,
                     const SolverOptions& opts = {});

/// Impedance base in ohm for the given options.
double impedance_base(const NetworkModel& net, const SolverOptions& opts);

}  // namespace gridsite
