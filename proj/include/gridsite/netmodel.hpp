#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace gridsite {

/// Raised for malformed feeder data and for non-radial topologies.
class NetworkError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct Bus {
    int id = 0;
    double p_load = 0.0;  // kW
    double q_load = 0.0;  // kvar, capacitive loads may be negative
};

struct Branch {
    int from_bus = 0;
    int to_bus = 0;
    double r = 0.0;  // ohm
    double x = 0.0;  // ohm

    std::complex<double> impedance() const { return {r, x}; }
};

/// One radial feeder.
///
/// Networks produced by make_network() / load_network() are canonical:
/// buses[0] is the slack, the remaining buses follow in ascending id order,
/// and branches[k] is the branch feeding buses[k + 1], oriented parent to
/// child. Raw (non-canonical) instances may still be handed to
/// validate_radial() for diagnostics.
struct NetworkModel {
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    int slack_bus = 1;
    double v_base = 12.66;  // line voltage base, kV
    double v0 = 1.0;        // slack magnitude, p.u.

    std::size_t bus_count() const { return buses.size(); }
    std::size_t branch_count() const { return branches.size(); }

    /// Position of bus `id` in `buses`; throws NetworkError if absent.
    std::size_t index_of(int id) const;
    bool has_bus(int id) const;

    double total_p_load() const;
    double total_q_load() const;
};

/// Result of a radiality check, indexed by position in NetworkModel::buses.
struct TopologyReport {
    std::vector<int> depth;                             // branches between slack and bus
    std::vector<std::vector<std::size_t>> path;         // branch positions, slack side first
    std::vector<std::ptrdiff_t> parent_branch;          // -1 for the slack
    std::vector<std::ptrdiff_t> parent_bus;             // -1 for the slack

    int max_depth() const;
};

/// Bus-injection-to-branch-current and branch-current-to-bus-voltage matrices.
///
/// Rows of `bibc` are branches, columns are non-slack buses (position - 1).
/// `bcbv` is non-slack buses x branches in ohm. `drop` caches bcbv * bibc,
/// the bus-current to voltage-drop map used by every sweep.
struct SweepMatrices {
    Eigen::MatrixXd bibc;
    Eigen::MatrixXcd bcbv;
    Eigen::MatrixXcd drop;
};

/// Checks radiality and reports the slack-to-bus branch path of every bus.
/// Throws NetworkError ("cycle detected", "unreachable bus", ...).
TopologyReport validate_radial(const NetworkModel& net);

/// Validates and canonicalizes raw feeder data.
NetworkModel make_network(std::vector<Bus> buses, std::vector<Branch> branches, int slack_bus,
                          double v_base_kv, double v0 = 1.0);

/// Parses the feeder format: a JSON header plus bus and branch CSV tables.
NetworkModel parse_network(std::string_view header_json, std::string_view buses_csv,
                           std::string_view branches_csv);

/// Loads a feeder from a directory holding header.json, buses.csv and
/// branches.csv. The name "ieee33" resolves to the built-in 33-bus feeder
/// unless a directory of that name exists.
NetworkModel load_network(const std::filesystem::path& source);

/// The built-in IEEE 33-bus test feeder.
NetworkModel ieee33();

/// Raw text of the built-in feeder files (header, buses, branches).
struct FeederText {
    std::string header_json;
    std::string buses_csv;
    std::string branches_csv;
};
const FeederText& ieee33_text();

/// Writes `net` in the feeder format into directory `dir`.
void write_network(const NetworkModel& net, const std::filesystem::path& dir);

SweepMatrices build_sweep_matrices(const NetworkModel& net);

}  // namespace gridsite
