#pragma once

#include "cvar_reach/model.hpp"
#include "cvar_reach/risk.hpp"
#include "cvar_reach/validation/toy_chains.hpp"
#include "cvar_reach/value_iteration.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace cvar_reach::validation {

/// Risk-neutral DP: E_N = c, E_k(x) = c(x) + min_u sum_j p_j E_{k+1}(f(x, u, d_j)),
/// with E_{k+1} interpolated linearly between `states`. Returns E_0 per state.
std::vector<double> expectation_dp(const SystemModel& model, const StageCostSpec& spec,
                                   std::span<const double> states, int horizon);

/// Worst-case DP: M_k(x) = c(x) + min_u max_{j : p_j > 0} M_{k+1}(f(x, u, d_j)).
std::vector<double> minimax_dp(const SystemModel& model, const StageCostSpec& spec,
                               std::span<const double> states, int horizon);

/// Cost distribution of sum_k c(x_k) on a toy chain when the control at
/// stage k in state s is markov[k][s].
DiscreteRandomVariable toy_cost_distribution(const ToyChain& chain, std::size_t x0,
                                             const std::vector<std::vector<std::size_t>>& markov);

/// min over deterministic Markov policies u_k = mu_k(x_k) of CVaR_alpha of the total cost.
double toy_min_cvar_markov(const ToyChain& chain, std::size_t x0, double alpha);

/// min over deterministic policies that may depend on the whole state history.
double toy_min_cvar_history(const ToyChain& chain, std::size_t x0, double alpha);

} // namespace cvar_reach::validation
