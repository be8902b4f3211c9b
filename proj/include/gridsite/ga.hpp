#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <random>
#include <tuple>
#include <vector>

#include "gridsite/objectives.hpp"

namespace gridsite {

/// One device slot: bus position in NetworkModel::buses (never the slack),
/// active set-point (kW) and reactive set-point (kvar).
struct Gene {
    std::size_t bus = 1;
    double p = 0.0;
    double q = 0.0;

    friend bool operator==(const Gene&, const Gene&) = default;
};

/// WT slots first, then BESS slots.
struct Genome {
    std::vector<Gene> slots;

    friend bool operator==(const Genome&, const Genome&) = default;
};

struct GaConfig {
    std::size_t population = 100;
    std::size_t generations = 200;
    double crossover_rate = 0.9;
    double mutation_rate = 0.1;  // per gene
    std::size_t tournament_size = 3;
    std::size_t elitism = 2;
    std::uint64_t seed = 42;
    double h = 1000.0;
    std::size_t n_wt = 0;
    std::size_t n_bess = 1;
    double sigma_p = 0.1;  // fraction of h
    double sigma_q = 0.1;  // fraction of the device's q range
    /// 0 searches P/Q continuously; L >= 2 restricts genes to L evenly spaced levels.
    std::size_t levels = 0;
    /// Evaluation threads; 0 uses the hardware concurrency.
    std::size_t workers = 0;

    std::size_t slot_count() const { return n_wt + n_bess; }
    DeviceKind kind_of(std::size_t slot) const { return slot < n_wt ? DeviceKind::WT : DeviceKind::BESS; }
    void validate() const;
};

struct Individual {
    Genome genome;
    Candidate candidate;
};

using Population = std::vector<Individual>;

struct GenerationStats {
    std::size_t generation = 0;
    double best = 0.0;
    double mean = 0.0;
    Genome best_genome;
};

struct GaTrace {
    std::vector<GenerationStats> generations;

    void write_csv(std::ostream& out) const;
};

struct GaResult {
    Candidate best;
    Genome best_genome;
    GaTrace trace;
    std::size_t evaluations = 0;  // load-flow evaluations actually run
};

/// Genome <-> candidate mapping plus cached, optionally parallel evaluation.
/// Owned by a single coordinator; not safe for concurrent use itself.
class GaProblem {
  public:
    GaProblem(const Evaluator& evaluator, GaConfig cfg);

    Candidate decode(const Genome& genome) const;
    /// Writes repaired set-points back into the genome (continuous mode only).
    void repair(Genome& genome) const;
    /// Evaluates each individual's genome, filling its candidate.
    void evaluate(std::vector<Individual*> batch);

    /// Reactive range searched for a slot.
    std::pair<double, double> q_range(std::size_t slot) const;
    std::size_t bus_min() const { return 1; }
    std::size_t bus_max() const { return evaluator_.network().bus_count() - 1; }
    double snap_p(std::size_t level) const;
    double snap_q(std::size_t slot, std::size_t level) const;

    const GaConfig& config() const { return cfg_; }
    const Evaluator& evaluator() const { return evaluator_; }
    std::size_t evaluations() const { return evaluations_; }

  private:
    using Key = std::vector<std::tuple<std::size_t, long long, long long>>;
    Key key_of(const Genome& genome) const;

    const Evaluator& evaluator_;
    GaConfig cfg_;
    std::map<Key, Candidate> cache_;
    std::size_t evaluations_ = 0;
};

using Rng = std::mt19937_64;

/// Random initial population, repaired and evaluated.
Population init_population(GaProblem& problem, Rng& rng);

/// Tournament selection, uniform slot crossover, Gaussian P/Q and
/// random-reset bus mutation; the best `elitism` individuals survive verbatim.
Population evolve_step(const Population& population, GaProblem& problem, Rng& rng, GenerationStats* stats = nullptr);

GenerationStats population_stats(const Population& population, std::size_t generation);

/// Full run; the best-ever candidate is re-evaluated so its cached flow is exact.
GaResult run(const GaConfig& cfg, const Evaluator& evaluator);

}  // namespace gridsite
