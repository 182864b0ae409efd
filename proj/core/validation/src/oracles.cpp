#include "cvar_reach/validation/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace cvar_reach::validation {

namespace {

double cost_of(const StageCostSpec& spec, double x) { return spec.beta * std::exp(spec.m * spec.surface(x)); }

// Linear interpolation over ascending xs, flat outside.
double lerp_table(std::span<const double> xs, const std::vector<double>& v, double x) {
    if (x <= xs.front())
        return v.front();
    if (x >= xs.back())
        return v.back();
    std::size_t hi = 1;
    while (xs[hi] < x)
        ++hi;
    const double w = (x - xs[hi - 1]) / (xs[hi] - xs[hi - 1]);
    return (1.0 - w) * v[hi - 1] + w * v[hi];
}

void check_states(std::span<const double> states, int horizon) {
    if (states.size() < 2 || !std::is_sorted(states.begin(), states.end()))
        throw std::invalid_argument("oracle: need at least two ascending states");
    if (horizon < 0)
        throw std::invalid_argument("oracle: negative horizon");
}

} // namespace

std::vector<double> expectation_dp(const SystemModel& model, const StageCostSpec& spec,
                                   std::span<const double> states, int horizon) {
    check_states(states, horizon);
    const auto& d = model.disturbance();
    std::vector<double> E(states.size());
    for (std::size_t i = 0; i < states.size(); ++i)
        E[i] = cost_of(spec, states[i]);
    for (int k = horizon - 1; k >= 0; --k) {
        std::vector<double> cur(states.size());
        for (std::size_t i = 0; i < states.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (double u : model.controls()) {
                double acc = 0.0;
                for (std::size_t j = 0; j < d.size(); ++j)
                    acc += d.probs()[j] * lerp_table(states, E, model.step(states[i], u, d.values()[j]));
                best = std::min(best, acc);
            }
            cur[i] = cost_of(spec, states[i]) + best;
        }
        E = std::move(cur);
    }
    return E;
}

std::vector<double> minimax_dp(const SystemModel& model, const StageCostSpec& spec,
                               std::span<const double> states, int horizon) {
    check_states(states, horizon);
    const auto& d = model.disturbance();
    std::vector<double> M(states.size());
    for (std::size_t i = 0; i < states.size(); ++i)
        M[i] = cost_of(spec, states[i]);
    for (int k = horizon - 1; k >= 0; --k) {
        std::vector<double> cur(states.size());
        for (std::size_t i = 0; i < states.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (double u : model.controls()) {
                double worst = -std::numeric_limits<double>::infinity();
                for (std::size_t j = 0; j < d.size(); ++j)
                    if (d.probs()[j] > 0.0)
                        worst = std::max(worst, lerp_table(states, M, model.step(states[i], u, d.values()[j])));
                best = std::min(best, worst);
            }
            cur[i] = cost_of(spec, states[i]) + best;
        }
        M = std::move(cur);
    }
    return M;
}

namespace {

struct Atom {
    double cost;
    double prob;
};
using Distribution = std::vector<Atom>;

DiscreteRandomVariable to_variable(const Distribution& d) {
    std::vector<double> z, p;
    for (const Atom& a : d) {
        z.push_back(a.cost);
        p.push_back(a.prob);
    }
    return DiscreteRandomVariable(std::move(z), std::move(p));
}

} // namespace

DiscreteRandomVariable toy_cost_distribution(const ToyChain& chain, std::size_t x0,
                                             const std::vector<std::vector<std::size_t>>& markov) {
    struct Path {
        std::size_t state;
        double cost;
        double prob;
    };
    std::vector<Path> paths{{x0, chain.costs[x0], 1.0}};
    for (int k = 0; k < chain.horizon; ++k) {
        std::vector<Path> next;
        for (const Path& p : paths) {
            const std::size_t u = markov[static_cast<std::size_t>(k)][p.state];
            for (std::size_t j = 0; j < chain.num_disturbances(); ++j) {
                const std::size_t s = chain.successor(p.state, u, j);
                next.push_back({s, p.cost + chain.costs[s], p.prob * chain.probs[j]});
            }
        }
        paths = std::move(next);
    }
    Distribution d;
    for (const Path& p : paths)
        d.push_back({p.cost, p.prob});
    return to_variable(d);
}

double toy_min_cvar_markov(const ToyChain& chain, std::size_t x0, double alpha) {
    const std::size_t S = chain.num_states();
    const std::size_t U = chain.num_controls;
    const std::size_t slots = S * static_cast<std::size_t>(chain.horizon);
    std::vector<std::size_t> digits(slots, 0);
    double best = std::numeric_limits<double>::infinity();
    while (true) {
        std::vector<std::vector<std::size_t>> markov(static_cast<std::size_t>(chain.horizon),
                                                     std::vector<std::size_t>(S));
        for (std::size_t i = 0; i < slots; ++i)
            markov[i / S][i % S] = digits[i];
        best = std::min(best, cvar_exact(toy_cost_distribution(chain, x0, markov), alpha));
        std::size_t i = 0;
        while (i < slots && ++digits[i] == U)
            digits[i++] = 0;
        if (i == slots)
            break;
    }
    return best;
}

namespace {

// Every conditional distribution of sum_{i>=k} c(x_i) given x_k = s that some
// history-dependent policy can produce. Subtrees below distinct successor
// states choose independently, which is exactly what history dependence buys.
const std::vector<Distribution>& achievable(const ToyChain& chain, std::size_t s, int k,
                                            std::map<std::pair<std::size_t, int>, std::vector<Distribution>>& memo) {
    const auto key = std::make_pair(s, k);
    if (auto it = memo.find(key); it != memo.end())
        return it->second;
    std::vector<Distribution> out;
    const double c = chain.costs[s];
    if (k == chain.horizon) {
        out.push_back({{c, 1.0}});
    } else {
        for (std::size_t u = 0; u < chain.num_controls; ++u) {
            std::map<std::size_t, double> children;
            for (std::size_t j = 0; j < chain.num_disturbances(); ++j)
                children[chain.successor(s, u, j)] += chain.probs[j];
            std::vector<std::pair<double, const std::vector<Distribution>*>> parts;
            for (const auto& [child, q] : children)
                parts.emplace_back(q, &achievable(chain, child, k + 1, memo));
            std::vector<std::size_t> pick(parts.size(), 0);
            while (true) {
                Distribution d;
                for (std::size_t i = 0; i < parts.size(); ++i)
                    for (const Atom& a : (*parts[i].second)[pick[i]])
                        d.push_back({c + a.cost, parts[i].first * a.prob});
                out.push_back(std::move(d));
                std::size_t i = 0;
                while (i < parts.size() && ++pick[i] == parts[i].second->size())
                    pick[i++] = 0;
                if (i == parts.size())
                    break;
            }
        }
    }
    return memo.emplace(key, std::move(out)).first->second;
}

} // namespace

double toy_min_cvar_history(const ToyChain& chain, std::size_t x0, double alpha) {
    std::map<std::pair<std::size_t, int>, std::vector<Distribution>> memo;
    double best = std::numeric_limits<double>::infinity();
    for (const Distribution& d : achievable(chain, x0, 0, memo))
        best = std::min(best, cvar_exact(to_variable(d), alpha));
    return best;
}

} // namespace cvar_reach::validation
