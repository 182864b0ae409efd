#include "cvar_reach/validation/toy_chains.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cvar_reach::validation {

SystemModel ToyChain::model() const {
    std::vector<double> controls(num_controls);
    std::iota(controls.begin(), controls.end(), 0.0);
    std::vector<double> values(probs.size());
    std::iota(values.begin(), values.end(), 0.0);
    const ToyChain copy = *this;
    auto f = [copy](double x, double u, double w) {
        const auto s = static_cast<std::size_t>(std::lround(x));
        const auto c = static_cast<std::size_t>(std::lround(u));
        const auto j = static_cast<std::size_t>(std::lround(w));
        return static_cast<double>(copy.successor(s, c, j));
    };
    return SystemModel("toy", std::move(controls), DisturbanceDistribution(std::move(values), probs), f,
                       StateBounds{0.0, static_cast<double>(num_states() - 1)});
}

StageCostSpec ToyChain::cost_spec() const {
    std::vector<double> g(costs.size());
    for (std::size_t s = 0; s < costs.size(); ++s)
        g[s] = std::log(costs[s]);
    StageCostSpec spec;
    spec.beta = 1.0;
    spec.m = 1.0;
    spec.surface = SurfaceFunction::tabulated(state_values(), std::move(g));
    return spec;
}

std::vector<double> ToyChain::state_values() const {
    std::vector<double> xs(costs.size());
    std::iota(xs.begin(), xs.end(), 0.0);
    return xs;
}

ToyChain random_toy_chain(std::mt19937_64& gen, const ToyChainShape& shape) {
    if (shape.states < 2 || shape.controls < 1 || shape.disturbances < 1 || shape.horizon < 1)
        throw std::invalid_argument("random_toy_chain: degenerate shape");
    std::uniform_real_distribution<double> cost(0.1, 2.0);
    std::uniform_real_distribution<double> weight(0.2, 1.0);
    std::uniform_int_distribution<std::size_t> state(0, shape.states - 1);
    ToyChain c;
    c.num_controls = shape.controls;
    c.horizon = shape.horizon;
    for (std::size_t s = 0; s < shape.states; ++s)
        c.costs.push_back(cost(gen));
    double total = 0.0;
    for (std::size_t j = 0; j < shape.disturbances; ++j)
        total += c.probs.emplace_back(weight(gen));
    for (double& p : c.probs)
        p /= total;
    c.next.resize(shape.states * shape.controls * shape.disturbances);
    for (auto& n : c.next)
        n = state(gen);
    return c;
}

std::vector<double> fine_confidence_levels(std::size_t denominator, double floor) {
    std::vector<double> levels{floor};
    for (std::size_t j = 1; j <= denominator; ++j)
        levels.push_back(static_cast<double>(j) / static_cast<double>(denominator));
    return levels;
}

} // namespace cvar_reach::validation
