#pragma once

#include "cvar_reach/grid.hpp"
#include "cvar_reach/model.hpp"
#include "cvar_reach/monte_carlo.hpp"
#include "cvar_reach/value_iteration.hpp"

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cvar_reach {

enum class SetSource { value_iteration, monte_carlo };

const char* to_string(SetSource source);

/// Membership of every G_s point in one (alpha, r) set.
///
/// boundary_margin is the signed distance of the statistic to its threshold,
/// positive inside: (log beta + m r) - log J_0 for value-iteration sets and
/// (r - W_0) / stderr for Monte Carlo sets.
struct SafeSetGrid {
    double alpha = 1.0;
    double r = 0.0;
    SetSource source = SetSource::value_iteration;
    std::vector<double> states;
    std::vector<bool> membership;
    std::vector<double> statistic;
    std::vector<double> boundary_margin;

    std::size_t count() const;
};

/// U = {x : J_0(x, alpha) <= beta e^{m r}}, compared in log space.
/// Throws std::invalid_argument if alpha is not a grid level.
SafeSetGrid extract_U(const ValueTable& J0, const StageCostSpec& spec, double alpha, double r);

/// Estimates within this many jitter sigmas above a threshold still count as
/// at or below it. Jitter only breaks ties, so a trajectory cost pinned at the
/// threshold (e.g. W_0 = g(6.5) = 1.5 at the clamp) must not fall outside.
inline constexpr double kJitterAllowance = 10.0;

/// S = {x : W_0(x, alpha) <= r} from Monte Carlo estimates. The noise scale
/// of the margin is the bootstrap standard error, floored at the jitter sigma
/// so that a zero-variance sample still has a finite margin.
/// Throws std::invalid_argument naming (x, alpha) if an estimate is missing.
SafeSetGrid extract_S_mc(const McGridResult& mc, double alpha, double r);

struct SetViolation {
    double x;
    std::string detail;
};

struct SetCheckReport {
    bool pass = true;
    std::size_t checked = 0;
    std::size_t banded = 0; // disagreements excused by the noise band
    std::vector<SetViolation> violations;
};

/// Lists x in U \ S, excusing points whose Monte Carlo margin lies within
/// margin_sigmas of the threshold. Throws std::invalid_argument if the two
/// sets are for different (alpha, r) or different grids.
SetCheckReport check_inclusion(const SafeSetGrid& U, const SafeSetGrid& S, double margin_sigmas);

/// set(a2, r2) is a subset of set(a1, r1) whenever a1 >= a2 and r1 >= r2.
/// Sets must share source and grid. Monte Carlo sets excuse points within
/// margin_sigmas of either threshold; value-iteration sets get no band.
SetCheckReport check_nesting(std::span<const SafeSetGrid> sets, double margin_sigmas);

/// Probability of staying in K = {g < 0} under the best control.
struct ProbSafetyTable {
    std::vector<double> states;
    std::vector<std::vector<double>> safety; // safety[k][i] = P_k(states[i]), k = 0..N

    double violation(std::size_t i) const { return 1.0 - safety.front()[i]; }
};

/// P_N = 1_K, P_k(x) = 1_K(x) max_u sum_j p_j P_{k+1}(f(x, u, d_j)), with P_{k+1}
/// interpolated linearly between grid states.
ProbSafetyTable prob_safety_dp(const SystemModel& model, const SurfaceFunction& surface,
                               std::span<const double> states, int horizon);

struct SpecialCaseReport {
    double epsilon = 0.0;
    double shell = 0.02;
    std::vector<double> states;
    std::vector<double> dp_violation;   // 1 - P_0(x)
    std::vector<double> risk_statistic; // W_0(x, 1) + 1/2 under the indicator surface
    std::vector<bool> in_dp;
    std::vector<bool> in_risk;
    std::vector<double> symmetric_difference;
    std::vector<double> outside_shell; // symmetric-difference states farther than shell from epsilon
    bool pass = true;
};

/// Compares {x : 1 - P_0(x) <= eps} with {x : W_0(x, 1) <= eps - 1/2} for the
/// indicator surface of `constraint_upper`, W_0 estimated by Monte Carlo
/// under `policy`. Disagreements are allowed only where |1 - P_0 - eps| <= shell.
SpecialCaseReport special_case_equivalence(const SystemModel& model, double constraint_upper,
                                           std::span<const double> states, double epsilon,
                                           const RolloutPolicy& policy, const McRunConfig& cfg,
                                           double shell = 0.02);

/// Exit bound: every x in U at r = 0 exits K with Monte Carlo
/// frequency at most alpha + margin_sigmas binomial standard errors.
SetCheckReport check_exit_bound(const SafeSetGrid& U0, const McGridResult& mc, double margin_sigmas);

struct SetsCsvRow {
    double x;
    double alpha;
    double r;
    bool in_U;
    bool in_S;
    double J0;
    double W0;
    double W0_stderr;
};

std::vector<SetsCsvRow> sets_rows(std::span<const SafeSetGrid> U, std::span<const SafeSetGrid> S,
                                  const McGridResult& mc);
void write_sets_csv(const std::filesystem::path& path, std::span<const SetsCsvRow> rows);

} // namespace cvar_reach
