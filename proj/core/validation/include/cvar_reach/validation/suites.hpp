#pragma once

#include "cvar_reach/monte_carlo.hpp"
#include "cvar_reach/safe_sets.hpp"
#include "cvar_reach/value_iteration.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace cvar_reach::validation {

struct SuiteResult {
    std::string name;
    bool pass = true;
    std::size_t cases = 0;
    double worst = 0.0; // largest error or violation seen, in the suite's own units
    std::string detail;
    std::size_t failures = 0; // cases beyond the tolerance; detail names the first
};

/// Monotonicity, translation invariance, positive homogeneity and
/// subadditivity of cvar_exact on random discrete variables.
SuiteResult coherence_suite(std::uint64_t seed, std::size_t count = 1000, double tol = 1e-10);

/// y CVaR_y[Z] concave and CVaR_y nonincreasing in y, on a dense y mesh.
SuiteResult concavity_suite(std::uint64_t seed, std::size_t count = 200, double tol = 1e-10);

/// max_i y_i <= (1/m) log sum_i e^{m y_i} <= max_i y_i + log(n) / m.
SuiteResult log_sum_exp_suite(std::uint64_t seed, std::size_t count = 1000, double tol = 1e-12);

/// CVaR of a two-stage mixture equals the envelope maximum of the reweighted
/// conditional CVaRs, with exact t CVaR_t curves.
SuiteResult decomposition_suite(std::uint64_t seed, std::size_t count = 200, double tol = 1e-6);

/// Greedy envelope solver vs a brute-force search over a t mesh and vs the
/// hypograph LP.
SuiteResult envelope_oracle_suite(std::uint64_t seed, std::size_t count = 200, double tol = 5e-3);

/// Value iteration on random toy chains vs exhaustive policy enumeration with
/// exact CVaR. `history` selects the history-dependent policy class instead
/// of Markov policies.
struct ToyChainOptions {
    std::size_t chains = 25;
    std::size_t level_denominator = 1024;
    std::vector<double> alphas = {1.0, 0.75, 0.5, 0.25, 0.125, 0.0625};
    double tol = 1e-3;
    bool history = false;
};
SuiteResult toy_chain_suite(std::uint64_t seed, const ToyChainOptions& options);

/// Results of one pond pipeline run that the set-level suites inspect.
struct PondRun {
    std::vector<SafeSetGrid> U;
    std::vector<SafeSetGrid> S;
    const McGridResult* mc = nullptr;
};

SuiteResult nesting_suite(const PondRun& run, double margin_sigmas);
SuiteResult inclusion_suite(const PondRun& run, double margin_sigmas);
/// Every x in U_alpha^0 exits with frequency at most alpha + margin_sigmas binomial errors.
SuiteResult exit_bound_suite(std::span<const SafeSetGrid> U0, const McGridResult& mc, double margin_sigmas);
SuiteResult special_case_suite(std::span<const SpecialCaseReport> reports);

/// Single-control toy chains, where state interpolation is exact: the
/// indicator-cost risk set at alpha = 1 against the probability DP, for a
/// sweep of epsilons, with Monte Carlo at `samples` per state.
SuiteResult toy_special_case_suite(std::uint64_t seed, std::size_t chains, std::size_t samples);

/// Single-control toy chains with one unsafe state: every x in U_alpha^0
/// must exit with exact probability at most alpha + tol.
SuiteResult toy_exit_bound_suite(std::uint64_t seed, std::size_t chains, double tol = 1e-3);

std::string format_result(const SuiteResult& r);

} // namespace cvar_reach::validation
