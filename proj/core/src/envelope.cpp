#include "cvar_reach/envelope.hpp"

#include "cvar_reach/log.hpp"
#include "cvar_reach/simplex.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

namespace cvar_reach {

PiecewiseLinear::PiecewiseLinear(std::vector<Breakpoint> points) : points_(std::move(points)) {
    if (points_.size() < 2)
        throw std::invalid_argument("piecewise linear: need at least two breakpoints");
    for (std::size_t i = 1; i < points_.size(); ++i)
        if (!(points_[i].t > points_[i - 1].t))
            throw std::invalid_argument("piecewise linear: breakpoints must be strictly increasing in t");
}

double PiecewiseLinear::operator()(double t) const {
    if (t <= points_.front().t)
        return points_.front().value;
    if (t >= points_.back().t)
        return points_.back().value;
    auto it = std::upper_bound(points_.begin(), points_.end(), t,
                               [](double v, const Breakpoint& b) { return v < b.t; });
    const Breakpoint& b = *it;
    const Breakpoint& a = *(it - 1);
    if (t == a.t)
        return a.value;
    return a.value + (b.value - a.value) * ((t - a.t) / (b.t - a.t));
}

bool PiecewiseLinear::is_concave(double tolerance) const {
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < points_.size(); ++i) {
        const double slope = (points_[i].value - points_[i - 1].value) / (points_[i].t - points_[i - 1].t);
        if (slope > prev + tolerance * std::max(1.0, std::abs(prev)))
            return false;
        prev = slope;
    }
    return true;
}

std::vector<Breakpoint> concave_envelope_repair(std::span<const Breakpoint> points, double* max_change) {
    if (points.size() < 2)
        throw std::invalid_argument("concave_envelope_repair: need at least two breakpoints");
    // monotone-chain upper hull
    std::vector<Breakpoint> hull;
    hull.reserve(points.size());
    for (const Breakpoint& p : points) {
        while (hull.size() >= 2) {
            const Breakpoint& a = hull[hull.size() - 2];
            const Breakpoint& b = hull.back();
            // drop b when it lies on or below the chord a -> p
            if ((b.value - a.value) * (p.t - a.t) <= (p.value - a.value) * (b.t - a.t))
                hull.pop_back();
            else
                break;
        }
        hull.push_back(p);
    }
    const PiecewiseLinear upper(hull);
    std::vector<Breakpoint> out(points.begin(), points.end());
    double change = 0.0;
    for (Breakpoint& b : out) {
        const double h = upper(b.t);
        // keep on-hull points bit-exact so that repair is idempotent
        if (h > b.value + 1e-14 * (1.0 + std::abs(b.value))) {
            change = std::max(change, h - b.value);
            b.value = h;
        }
    }
    if (max_change != nullptr)
        *max_change = change;
    return out;
}

SuccessorCurve successor_curve(const ValueTable& next, double x_next) {
    const AugmentedGrid& grid = next.grid();
    const auto levels = grid.levels();
    // y J(x, y) -> 0 as y -> 0 for bounded costs, so the curve is anchored at the origin
    std::vector<Breakpoint> raw;
    raw.reserve(levels.size() + 2);
    raw.push_back({0.0, 0.0});
    for (std::size_t c = 0; c < levels.size(); ++c)
        raw.push_back({levels[c], levels[c] * interpolate_state_value(next, x_next, c)});
    double change = 0.0;
    auto repaired = concave_envelope_repair(raw, &change);
    if (grid.y_max() < 1.0) {
        const Breakpoint& a = repaired[repaired.size() - 2];
        const Breakpoint& b = repaired.back();
        const double slope = (b.value - a.value) / (b.t - a.t);
        repaired.push_back({1.0, b.value + slope * (1.0 - b.t)});
    }
    if (change > kRepairReportThreshold) {
        std::ostringstream msg;
        msg << "concavity repair at stage " << next.stage() << " successor x=" << x_next
            << " lifted a breakpoint by " << change;
        log(LogLevel::debug, msg.str());
    }
    return {PiecewiseLinear(std::move(repaired)), change};
}

InnerProblem build_inner_problem(std::span<const Successor> successors, double y, const ValueTable& next) {
    if (successors.empty())
        throw std::invalid_argument("build_inner_problem: no successors");
    InnerProblem problem;
    problem.envelope.y = y;
    problem.envelope.t_floor = 0.0;
    problem.envelope.t_ceiling = 1.0;
    double total = 0.0;
    for (const Successor& s : successors) {
        auto curve = successor_curve(next, s.state);
        if (curve.repair_change > kRepairReportThreshold)
            ++problem.repaired_curves;
        problem.max_repair = std::max(problem.max_repair, curve.repair_change);
        problem.curves.push_back(std::move(curve.curve));
        problem.envelope.probs.push_back(s.prob);
        total += s.prob;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("build_inner_problem: successor probabilities must sum to 1");
    return problem;
}

EnvelopeSolver::EnvelopeSolver(std::vector<double> probs, std::vector<PiecewiseLinear> curves)
    : probs_(std::move(probs)), curves_(std::move(curves)) {
    if (probs_.empty() || probs_.size() != curves_.size())
        throw std::invalid_argument("envelope solver: probabilities and curves must match");
    for (std::size_t j = 0; j < curves_.size(); ++j) {
        const auto pts = curves_[j].points();
        floor_mass_ += probs_[j] * pts.front().t;
        ceiling_mass_ += probs_[j] * pts.back().t;
        // running minimum keeps each curve's slopes nonincreasing against rounding
        double slope_cap = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s + 1 < pts.size(); ++s) {
            const double slope = std::min(slope_cap, (pts[s + 1].value - pts[s].value) / (pts[s + 1].t - pts[s].t));
            slope_cap = slope;
            ranked_.push_back({slope, j, s, probs_[j] * (pts[s + 1].t - pts[s].t)});
        }
    }
    std::stable_sort(ranked_.begin(), ranked_.end(), [](const Segment& a, const Segment& b) {
        if (a.slope != b.slope)
            return a.slope > b.slope;
        if (a.successor != b.successor)
            return a.successor < b.successor;
        return a.index < b.index;
    });
    cumulative_.resize(ranked_.size());
    double acc = 0.0;
    position_.assign(curves_.size(), {});
    for (std::size_t j = 0; j < curves_.size(); ++j)
        position_[j].resize(curves_[j].points().size() - 1);
    for (std::size_t i = 0; i < ranked_.size(); ++i) {
        acc += ranked_[i].budget;
        cumulative_[i] = acc;
        position_[ranked_[i].successor][ranked_[i].index] = i;
    }
}

EnvelopeSolution EnvelopeSolver::solve(double y) const {
    const double tol = 1e-12;
    if (!(y > 0.0) || y < floor_mass_ - tol || y > ceiling_mass_ + tol) {
        std::ostringstream msg;
        msg << "envelope infeasible: y=" << y << " outside [" << floor_mass_ << ", " << ceiling_mass_
            << "] for " << curves_.size() << " successors";
        throw EnvelopeError(msg.str());
    }
    const std::size_t n = curves_.size();
    EnvelopeSolution sol;
    sol.t_star.resize(n);

    if (y >= ceiling_mass_ - tol) {
        // budget exhausts every box: R is pinned at its upper bound (y = 1 gives the expectation)
        for (std::size_t j = 0; j < n; ++j)
            sol.t_star[j] = curves_[j].hi();
    } else {
        const double budget = std::max(0.0, y - floor_mass_);
        const auto cut = static_cast<std::size_t>(
            std::lower_bound(cumulative_.begin(), cumulative_.end(), budget) - cumulative_.begin());
        for (std::size_t j = 0; j < n; ++j) {
            const auto pts = curves_[j].points();
            const auto& pos = position_[j];
            const auto filled = static_cast<std::size_t>(std::lower_bound(pos.begin(), pos.end(), cut) - pos.begin());
            double t = pts[filled].t;
            if (cut < ranked_.size() && ranked_[cut].successor == j && ranked_[cut].index == filled &&
                ranked_[cut].budget > 0.0) {
                const double before = cut == 0 ? 0.0 : cumulative_[cut - 1];
                const double amount = std::clamp(budget - before, 0.0, ranked_[cut].budget);
                t = std::min(pts[filled + 1].t, t + amount / probs_[j]);
            }
            sol.t_star[j] = t;
        }
    }

    sol.r_star.resize(n);
    double value = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        value += probs_[j] * curves_[j](sol.t_star[j]);
        sol.r_star[j] = sol.t_star[j] / y;
        if (probs_[j] > 0.0 && sol.t_star[j] <= curves_[j].lo())
            ++sol.floor_active;
    }
    sol.optimal_value = value / y;
    return sol;
}

EnvelopeSolution solve_inner(const InnerProblem& problem) {
    const EnvelopeSolver solver(problem.envelope.probs, problem.curves);
    return solver.solve(problem.envelope.y);
}

double inner_objective(const InnerProblem& problem, std::span<const double> t) {
    double v = 0.0;
    for (std::size_t j = 0; j < problem.curves.size(); ++j)
        v += problem.envelope.probs[j] * problem.curves[j](t[j]);
    return v / problem.envelope.y;
}

EnvelopeSolution solve_inner_lp(const InnerProblem& problem) {
    // Variables: tau_j = t_j - lo_j in [0, hi_j - lo_j], eta_j = h_j - L_j >= 0,
    // where h_j is the hypograph variable of curve j and L_j its smallest breakpoint value.
    const std::size_t n = problem.curves.size();
    const double y = problem.envelope.y;
    const auto& p = problem.envelope.probs;
    lp::Problem lp_problem;
    lp_problem.objective.assign(2 * n, 0.0);
    std::vector<double> lows(n);
    double offset = 0.0;
    double floor_mass = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const auto pts = problem.curves[j].points();
        lows[j] = std::min_element(pts.begin(), pts.end(), [](const Breakpoint& a, const Breakpoint& b) {
                      return a.value < b.value;
                  })->value;
        lp_problem.objective[n + j] = p[j] / y;
        offset += p[j] / y * lows[j];
        floor_mass += p[j] * pts.front().t;
        const double lo = pts.front().t;
        for (std::size_t s = 0; s + 1 < pts.size(); ++s) {
            const double slope = (pts[s + 1].value - pts[s].value) / (pts[s + 1].t - pts[s].t);
            lp::Constraint c;
            c.coeffs.assign(2 * n, 0.0);
            c.coeffs[n + j] = 1.0;
            c.coeffs[j] = -slope;
            c.rhs = pts[s].value + slope * (lo - pts[s].t) - lows[j];
            lp_problem.constraints.push_back(std::move(c));
        }
        lp::Constraint box;
        box.coeffs.assign(2 * n, 0.0);
        box.coeffs[j] = 1.0;
        box.rhs = pts.back().t - lo;
        lp_problem.constraints.push_back(std::move(box));
    }
    lp::Constraint budget;
    budget.coeffs.assign(2 * n, 0.0);
    for (std::size_t j = 0; j < n; ++j)
        budget.coeffs[j] = p[j];
    budget.relation = lp::Relation::equal;
    budget.rhs = y - floor_mass;
    lp_problem.constraints.push_back(std::move(budget));

    const lp::Result r = lp::maximize(lp_problem);
    if (r.status != lp::Status::optimal) {
        std::ostringstream msg;
        msg << "hypograph LP did not reach optimality (status " << static_cast<int>(r.status) << ") at y=" << y;
        throw EnvelopeError(msg.str());
    }
    EnvelopeSolution sol;
    sol.t_star.resize(n);
    sol.r_star.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        sol.t_star[j] = problem.curves[j].lo() + r.x[j];
        sol.r_star[j] = sol.t_star[j] / y;
        if (p[j] > 0.0 && r.x[j] <= 0.0)
            ++sol.floor_active;
    }
    sol.optimal_value = r.objective + offset;
    return sol;
}

void dump_inner_problem(std::ostream& out, const InnerProblem& problem, const EnvelopeSolution* solution) {
    nlohmann::json j;
    j["y"] = problem.envelope.y;
    j["probs"] = problem.envelope.probs;
    j["t_floor"] = problem.envelope.t_floor;
    j["t_ceiling"] = problem.envelope.t_ceiling;
    j["repaired_curves"] = problem.repaired_curves;
    j["max_repair"] = problem.max_repair;
    auto& curves = j["curves"] = nlohmann::json::array();
    for (const auto& c : problem.curves) {
        auto pts = nlohmann::json::array();
        for (const auto& b : c.points())
            pts.push_back({b.t, b.value});
        curves.push_back(std::move(pts));
    }
    if (solution != nullptr) {
        j["solution"] = {{"optimal_value", solution->optimal_value},
                         {"t_star", solution->t_star},
                         {"r_star", solution->r_star},
                         {"floor_active", solution->floor_active}};
    }
    out << j.dump(2) << '\n';
}

} // namespace cvar_reach
