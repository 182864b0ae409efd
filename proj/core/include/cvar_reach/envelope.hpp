#pragma once

#include "cvar_reach/grid.hpp"

#include <cstddef>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

namespace cvar_reach {

struct Breakpoint {
    double t;
    double value;
};

/// Piecewise-linear function through strictly t-sorted breakpoints, clamped
/// to its end values outside [lo, hi].
class PiecewiseLinear {
public:
    explicit PiecewiseLinear(std::vector<Breakpoint> points);

    double operator()(double t) const;
    double lo() const { return points_.front().t; }
    double hi() const { return points_.back().t; }
    std::span<const Breakpoint> points() const { return points_; }
    bool is_concave(double tolerance = 1e-12) const;

private:
    std::vector<Breakpoint> points_;
};

/// Upper concave envelope evaluated at the input abscissae. Points already on
/// the envelope are returned bit-for-bit, so concave input is unchanged and the
/// operation is idempotent. `max_change`, when given, receives the largest lift.
std::vector<Breakpoint> concave_envelope_repair(std::span<const Breakpoint> points,
                                                double* max_change = nullptr);

/// Lifts larger than this are reported through the logger and counted as repairs.
inline constexpr double kRepairReportThreshold = 1e-6;

/// Interpolated curve t -> t * J_next(x', t) for one successor state.
struct SuccessorCurve {
    PiecewiseLinear curve;
    double repair_change = 0.0;
};

/// Breakpoints (y, y * J_next(x', y)) at every grid level, with x' clamped to
/// the state grid and interpolated linearly. When the top level is below 1 the
/// last segment is extended linearly to t = 1 so that R = 1/y stays reachable.
/// The result is concave-repaired.
SuccessorCurve successor_curve(const ValueTable& next, double x_next);

struct Successor {
    double state;
    double prob;
};

/// Feasible multipliers for one inner problem, expressed through t_j = y R_j:
/// sum_j p_j t_j = y with t_floor <= t_j <= t_ceiling.
struct RiskEnvelope {
    double y = 1.0;
    std::vector<double> probs;
    double t_floor = 0.0;
    double t_ceiling = 1.0;
};

/// max over the envelope of sum_j (p_j / y) * curve_j(t_j).
struct InnerProblem {
    RiskEnvelope envelope;
    std::vector<PiecewiseLinear> curves;
    std::size_t repaired_curves = 0;
    double max_repair = 0.0;
};

InnerProblem build_inner_problem(std::span<const Successor> successors, double y, const ValueTable& next);

struct EnvelopeSolution {
    double optimal_value = 0.0;
    std::vector<double> t_star;
    std::vector<double> r_star;
    /// Successors with positive probability whose t_j sits on the floor.
    std::size_t floor_active = 0;
};

/// Raised when an inner problem has no feasible point; carries the offending data.
class EnvelopeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Exact maximizer of a separable concave piecewise-linear objective under
/// one budget equality and boxes. Because moving t_j across a segment costs
/// p_j per unit and earns p_j * slope / y, every segment's gain per unit of
/// budget is slope / y regardless of j, so filling segments in order of
/// decreasing slope is optimal (the continuous knapsack argument).
///
/// Segments are ranked once at construction; each solve() is then a binary
/// search over cumulative budget. Equal slopes are taken in disturbance-index
/// order, which makes the maximizer, and hence the confidence transition,
/// unique.
class EnvelopeSolver {
public:
    EnvelopeSolver(std::vector<double> probs, std::vector<PiecewiseLinear> curves);

    EnvelopeSolution solve(double y) const;

    std::span<const double> probs() const { return probs_; }
    std::span<const PiecewiseLinear> curves() const { return curves_; }

private:
    struct Segment {
        double slope;
        std::size_t successor;
        std::size_t index;
        double budget;
    };

    std::vector<double> probs_;
    std::vector<PiecewiseLinear> curves_;
    std::vector<Segment> ranked_;
    std::vector<double> cumulative_;                // budget through ranked_[i], inclusive
    std::vector<std::vector<std::size_t>> position_; // ranked position of each curve segment
    double floor_mass_ = 0.0;
    double ceiling_mass_ = 0.0;
};

/// Greedy slope allocation; the primary solver.
EnvelopeSolution solve_inner(const InnerProblem& problem);

/// The same problem as a hypograph LP solved by dense simplex. Cross-check only.
EnvelopeSolution solve_inner_lp(const InnerProblem& problem);

/// Objective sum_j (p_j / y) curve_j(t_j) at an arbitrary point.
double inner_objective(const InnerProblem& problem, std::span<const double> t);

/// Writes the problem (and the solution, if given) as JSON for offline inspection.
void dump_inner_problem(std::ostream& out, const InnerProblem& problem,
                        const EnvelopeSolution* solution = nullptr);

} // namespace cvar_reach
