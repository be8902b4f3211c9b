#include "gridsite/ga.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace gridsite {

void GaConfig::validate() const {
    if (population < 2) throw std::invalid_argument("GA population must be at least 2");
    if (elitism > population) throw std::invalid_argument("GA elitism exceeds the population size");
    if (crossover_rate < 0.0 || crossover_rate > 1.0 || mutation_rate < 0.0 || mutation_rate > 1.0) {
        throw std::invalid_argument("GA rates must lie in [0, 1]");
    }
    if (tournament_size < 1) throw std::invalid_argument("GA tournament size must be at least 1");
    if (!(h >= 0.0)) throw std::invalid_argument("installable power h must be non-negative");
    if (levels == 1) throw std::invalid_argument("GA levels must be 0 (continuous) or at least 2");
    if (sigma_p < 0.0 || sigma_q < 0.0) throw std::invalid_argument("GA mutation widths must be non-negative");
}

void GaTrace::write_csv(std::ostream& out) const {
    const auto old = out.precision(17);
    out << "generation,best,mean\n";
    for (const auto& g : generations) out << g.generation << ',' << g.best << ',' << g.mean << '\n';
    out.precision(old);
}

GaProblem::GaProblem(const Evaluator& evaluator, GaConfig cfg) : evaluator_(evaluator), cfg_(std::move(cfg)) {
    cfg_.validate();
    if (cfg_.h != evaluator_.settings().h) throw std::invalid_argument("GA h differs from the evaluator's h");
    if (evaluator_.network().bus_count() < 2 && cfg_.slot_count() > 0) {
        throw std::invalid_argument("network has no bus to place devices on");
    }
}

std::pair<double, double> GaProblem::q_range(std::size_t slot) const {
    const auto& b = evaluator_.settings().bounds;
    if (cfg_.kind_of(slot) == DeviceKind::WT) return {-b.chart.q_cap, b.chart.q_cap};
    return {b.bess_q_min, b.bess_q_max};
}

double GaProblem::snap_p(std::size_t level) const {
    return cfg_.h * static_cast<double>(level) / static_cast<double>(cfg_.levels - 1);
}

double GaProblem::snap_q(std::size_t slot, std::size_t level) const {
    auto [lo, hi] = q_range(slot);
    return lo + (hi - lo) * static_cast<double>(level) / static_cast<double>(cfg_.levels - 1);
}

Candidate GaProblem::decode(const Genome& genome) const {
    if (genome.slots.size() != cfg_.slot_count()) throw std::invalid_argument("genome has the wrong slot count");
    Candidate c;
    c.placements.reserve(genome.slots.size());
    const auto& net = evaluator_.network();
    for (std::size_t s = 0; s < genome.slots.size(); ++s) {
        const auto& g = genome.slots[s];
        if (g.bus < bus_min() || g.bus > bus_max()) throw std::out_of_range("bus gene outside the non-slack range");
        c.placements.push_back({cfg_.kind_of(s), net.buses[g.bus].id, g.p, g.q});
    }
    return evaluator_.repair(std::move(c));
}

void GaProblem::repair(Genome& genome) const {
    if (cfg_.levels != 0) return;
    const auto c = decode(genome);
    for (std::size_t s = 0; s < genome.slots.size(); ++s) {
        genome.slots[s].p = c.placements[s].p;
        genome.slots[s].q = c.placements[s].q;
    }
}

GaProblem::Key GaProblem::key_of(const Genome& genome) const {
    Key k;
    k.reserve(genome.slots.size());
    for (const auto& g : genome.slots) k.emplace_back(g.bus, std::llround(g.p * 1e6), std::llround(g.q * 1e6));
    return k;
}

void GaProblem::evaluate(std::vector<Individual*> batch) {
    std::map<Key, std::vector<Individual*>> pending;
    for (auto* ind : batch) {
        auto key = key_of(ind->genome);
        if (auto hit = cache_.find(key); hit != cache_.end()) {
            ind->candidate = hit->second;
            ind->candidate.placements = decode(ind->genome).placements;
            continue;
        }
        pending[std::move(key)].push_back(ind);
    }
    if (pending.empty()) return;

    std::vector<std::pair<const Key*, std::vector<Individual*>*>> jobs;
    jobs.reserve(pending.size());
    for (auto& [key, group] : pending) jobs.emplace_back(&key, &group);
    std::vector<Candidate> results(jobs.size());

    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            results[i] = decode(jobs[i].second->front()->genome);
            evaluator_.evaluate(results[i]);
        }
    };
    std::size_t workers = cfg_.workers != 0 ? cfg_.workers : std::max(1U, std::thread::hardware_concurrency());
    workers = std::min(workers, jobs.size());
    if (workers <= 1) {
        work(0, jobs.size());
    } else {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (jobs.size() + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t begin = w * chunk;
            const std::size_t end = std::min(jobs.size(), begin + chunk);
            if (begin < end) pool.emplace_back(work, begin, end);
        }
    }
    evaluations_ += jobs.size();

    for (std::size_t i = 0; i < jobs.size(); ++i) {
        auto& cached = cache_[*jobs[i].first];
        cached = results[i];
        cached.flow.reset();
        for (auto* ind : *jobs[i].second) {
            ind->candidate = cached;
            ind->candidate.placements = decode(ind->genome).placements;
        }
    }
}

namespace {

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

std::size_t uniform_index(Rng& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

bool chance(Rng& rng, double rate) {
    if (rate <= 0.0) return false;
    if (rate >= 1.0) return true;
    return uniform(rng, 0.0, 1.0) < rate;
}

std::pair<double, double> p_range(const GaProblem& problem, std::size_t slot) {
    const auto& b = problem.evaluator().settings().bounds;
    if (problem.config().kind_of(slot) == DeviceKind::WT) return {0.0, b.wt_p_max};
    return {b.bess_p_min, b.bess_p_max};
}

std::size_t random_level(Rng& rng, std::size_t levels) { return uniform_index(rng, 0, levels - 1); }

// Ascending fitness, ties by position.
std::vector<std::size_t> ranking(const Population& pop) {
    std::vector<std::size_t> order(pop.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return pop[a].candidate.fitness < pop[b].candidate.fitness;
    });
    return order;
}

const Individual& tournament(const Population& pop, std::size_t size, Rng& rng) {
    std::size_t best = uniform_index(rng, 0, pop.size() - 1);
    for (std::size_t i = 1; i < size; ++i) {
        const std::size_t c = uniform_index(rng, 0, pop.size() - 1);
        if (pop[c].candidate.fitness < pop[best].candidate.fitness ||
            (pop[c].candidate.fitness == pop[best].candidate.fitness && c < best)) {
            best = c;
        }
    }
    return pop[best];
}

void mutate(Genome& genome, const GaProblem& problem, Rng& rng) {
    const auto& cfg = problem.config();
    for (std::size_t s = 0; s < genome.slots.size(); ++s) {
        auto& g = genome.slots[s];
        if (chance(rng, cfg.mutation_rate)) g.bus = uniform_index(rng, problem.bus_min(), problem.bus_max());
        const auto [p_lo, p_hi] = p_range(problem, s);
        const auto [q_lo, q_hi] = problem.q_range(s);
        if (cfg.levels != 0) {
            if (chance(rng, cfg.mutation_rate)) g.p = problem.snap_p(random_level(rng, cfg.levels));
            if (chance(rng, cfg.mutation_rate)) g.q = problem.snap_q(s, random_level(rng, cfg.levels));
            continue;
        }
        if (chance(rng, cfg.mutation_rate)) {
            g.p = std::clamp(g.p + std::normal_distribution<double>(0.0, cfg.sigma_p * cfg.h)(rng), p_lo, p_hi);
        }
        if (chance(rng, cfg.mutation_rate)) {
            g.q = std::clamp(g.q + std::normal_distribution<double>(0.0, cfg.sigma_q * (q_hi - q_lo))(rng), q_lo, q_hi);
        }
    }
}

}  // namespace

Population init_population(GaProblem& problem, Rng& rng) {
    const auto& cfg = problem.config();
    Population pop(cfg.population);
    for (auto& ind : pop) {
        ind.genome.slots.resize(cfg.slot_count());
        for (std::size_t s = 0; s < cfg.slot_count(); ++s) {
            auto& g = ind.genome.slots[s];
            g.bus = uniform_index(rng, problem.bus_min(), problem.bus_max());
            if (cfg.levels != 0) {
                g.p = problem.snap_p(random_level(rng, cfg.levels));
                g.q = problem.snap_q(s, random_level(rng, cfg.levels));
            } else {
                g.p = uniform(rng, 0.0, cfg.h);
                const auto [q_lo, q_hi] = problem.q_range(s);
                g.q = q_lo < q_hi ? uniform(rng, q_lo, q_hi) : q_lo;
            }
        }
        problem.repair(ind.genome);
    }
    std::vector<Individual*> batch;
    for (auto& ind : pop) batch.push_back(&ind);
    problem.evaluate(batch);
    return pop;
}

GenerationStats population_stats(const Population& population, std::size_t generation) {
    GenerationStats st;
    st.generation = generation;
    if (population.empty()) return st;
    const auto order = ranking(population);
    st.best = population[order.front()].candidate.fitness;
    double sum = 0.0;
    for (const auto& ind : population) sum += ind.candidate.fitness;
    st.mean = sum / static_cast<double>(population.size());
    st.best_genome = population[order.front()].genome;
    return st;
}

Population evolve_step(const Population& population, GaProblem& problem, Rng& rng, GenerationStats* stats) {
    const auto& cfg = problem.config();
    const auto order = ranking(population);

    Population next;
    next.reserve(cfg.population);
    for (std::size_t e = 0; e < cfg.elitism && e < population.size(); ++e) next.push_back(population[order[e]]);

    const std::size_t first_child = next.size();
    while (next.size() < cfg.population) {
        Genome a = tournament(population, cfg.tournament_size, rng).genome;
        Genome b = tournament(population, cfg.tournament_size, rng).genome;
        if (chance(rng, cfg.crossover_rate)) {
            for (std::size_t s = 0; s < a.slots.size(); ++s) {
                if (chance(rng, 0.5)) std::swap(a.slots[s], b.slots[s]);
            }
        }
        for (Genome* child : {&a, &b}) {
            if (next.size() == cfg.population) break;
            mutate(*child, problem, rng);
            problem.repair(*child);
            next.push_back({std::move(*child), {}});
        }
    }

    std::vector<Individual*> batch;
    for (std::size_t i = first_child; i < next.size(); ++i) batch.push_back(&next[i]);
    problem.evaluate(batch);
    if (stats) *stats = population_stats(next, stats->generation);
    return next;
}

GaResult run(const GaConfig& cfg, const Evaluator& evaluator) {
    GaProblem problem(evaluator, cfg);
    Rng rng(cfg.seed);
    GaResult result;

    if (cfg.slot_count() == 0) {
        result.best = Candidate{};
        evaluator.evaluate(result.best);
        result.evaluations = 1;
        result.trace.generations.push_back({0, result.best.fitness, result.best.fitness, {}});
        return result;
    }

    auto pop = init_population(problem, rng);
    auto stats = population_stats(pop, 0);
    result.trace.generations.push_back(stats);
    Genome best = stats.best_genome;
    double best_fitness = stats.best;

    for (std::size_t gen = 1; gen <= cfg.generations; ++gen) {
        GenerationStats st;
        st.generation = gen;
        pop = evolve_step(pop, problem, rng, &st);
        result.trace.generations.push_back(st);
        if (st.best < best_fitness) {
            best_fitness = st.best;
            best = st.best_genome;
        }
    }

    result.best_genome = best;
    result.best = problem.decode(best);
    evaluator.evaluate(result.best);
    result.evaluations = problem.evaluations() + 1;
    return result;
}

}  // namespace gridsite
