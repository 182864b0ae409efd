#pragma once

#include <cstddef>
#include <vector>

namespace cvar_reach::lp {

enum class Relation { less_equal, equal, greater_equal };

struct Constraint {
    std::vector<double> coeffs;
    Relation relation = Relation::less_equal;
    double rhs = 0.0;
};

/// maximize objective . x  subject to constraints and x >= 0.
struct Problem {
    std::vector<double> objective;
    std::vector<Constraint> constraints;
};

enum class Status { optimal, infeasible, unbounded, iteration_limit };

struct Result {
    Status status = Status::iteration_limit;
    std::vector<double> x;
    double objective = 0.0;
    std::size_t iterations = 0;
};

/// Dense two-phase tableau simplex with Bland's anti-cycling rule. Intended for
/// the small cross-check problems in this project (tens to a few hundred rows),
/// not as a general LP solver.
Result maximize(const Problem& problem, std::size_t max_iterations = 200000);

} // namespace cvar_reach::lp
