#pragma once

#include "cvar_reach/model.hpp"
#include "cvar_reach/value_iteration.hpp"

#include <cstddef>
#include <random>
#include <vector>

namespace cvar_reach::validation {

/// Finite chain whose states are the integers 0..S-1, so every successor is a
/// grid point and state interpolation is exact.
struct ToyChain {
    std::vector<double> costs;       // c(s) > 0
    std::size_t num_controls = 1;
    std::vector<double> probs;       // disturbance law, indexed j
    std::vector<std::size_t> next;   // next[(s * num_controls + u) * W + j]
    int horizon = 1;

    std::size_t num_states() const { return costs.size(); }
    std::size_t num_disturbances() const { return probs.size(); }
    std::size_t successor(std::size_t s, std::size_t u, std::size_t j) const {
        return next[(s * num_controls + u) * probs.size() + j];
    }

    /// Controls are 0..U-1 and disturbance values 0..W-1 as doubles.
    SystemModel model() const;
    /// beta = m = 1 with g tabulated as log c(s), which reproduces c exactly.
    StageCostSpec cost_spec() const;
    std::vector<double> state_values() const;
};

struct ToyChainShape {
    std::size_t states = 3;
    std::size_t controls = 2;
    std::size_t disturbances = 3;
    int horizon = 3;
};

/// Costs uniform on [0.1, 2], probabilities from normalized uniforms bounded
/// away from zero, successors uniform over the states.
ToyChain random_toy_chain(std::mt19937_64& gen, const ToyChainShape& shape);

/// Levels {floor} U {j / denominator : j = 1..denominator}.
std::vector<double> fine_confidence_levels(std::size_t denominator, double floor = 1e-6);

} // namespace cvar_reach::validation
