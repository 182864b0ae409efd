#include "cvar_reach/simplex.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace cvar_reach::lp {
namespace {

constexpr double kEps = 1e-11;

class Tableau {
public:
    Tableau(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_((rows + 1) * (cols + 1), 0.0) {}

    double& at(std::size_t r, std::size_t c) { return data_[r * (cols_ + 1) + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * (cols_ + 1) + c]; }
    double& rhs(std::size_t r) { return at(r, cols_); }
    double& cost(std::size_t c) { return at(rows_, c); }
    double value() const { return at(rows_, cols_); }

    void pivot(std::size_t pr, std::size_t pc) {
        const double inv = 1.0 / at(pr, pc);
        for (std::size_t c = 0; c <= cols_; ++c)
            at(pr, c) *= inv;
        at(pr, pc) = 1.0;
        for (std::size_t r = 0; r <= rows_; ++r) {
            if (r == pr)
                continue;
            const double f = at(r, pc);
            if (f == 0.0)
                continue;
            for (std::size_t c = 0; c <= cols_; ++c)
                at(r, c) -= f * at(pr, c);
            at(r, pc) = 0.0;
        }
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<double> data_;
};

/// Runs simplex iterations on the tableau's current cost row. Columns flagged
/// in `blocked` never enter. Returns optimal, unbounded or iteration_limit.
Status iterate(Tableau& t, std::vector<std::size_t>& basis, const std::vector<bool>& blocked,
               std::size_t& iterations, std::size_t max_iterations) {
    while (iterations < max_iterations) {
        // Bland: lowest-index column with negative reduced cost enters
        std::size_t enter = t.cols();
        for (std::size_t c = 0; c < t.cols(); ++c) {
            if (!blocked[c] && t.at(t.rows(), c) < -kEps) {
                enter = c;
                break;
            }
        }
        if (enter == t.cols())
            return Status::optimal;
        std::size_t leave = t.rows();
        double best_ratio = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < t.rows(); ++r) {
            const double a = t.at(r, enter);
            if (a <= kEps)
                continue;
            const double ratio = t.at(r, t.cols()) / a;
            if (ratio < best_ratio - kEps ||
                (std::abs(ratio - best_ratio) <= kEps && leave < t.rows() && basis[r] < basis[leave])) {
                best_ratio = ratio;
                leave = r;
            }
        }
        if (leave == t.rows())
            return Status::unbounded;
        t.pivot(leave, enter);
        basis[leave] = enter;
        ++iterations;
    }
    return Status::iteration_limit;
}

} // namespace

Result maximize(const Problem& problem, std::size_t max_iterations) {
    const std::size_t n = problem.objective.size();
    const std::size_t m = problem.constraints.size();
    for (const auto& c : problem.constraints)
        if (c.coeffs.size() != n)
            throw std::invalid_argument("lp: constraint width does not match objective");

    // normalize to nonnegative right-hand sides
    std::vector<Constraint> rows = problem.constraints;
    for (auto& c : rows) {
        if (c.rhs < 0.0) {
            for (double& a : c.coeffs)
                a = -a;
            c.rhs = -c.rhs;
            if (c.relation == Relation::less_equal)
                c.relation = Relation::greater_equal;
            else if (c.relation == Relation::greater_equal)
                c.relation = Relation::less_equal;
        }
    }

    std::size_t slack_cols = 0;
    std::size_t artificial_cols = 0;
    for (const auto& c : rows) {
        if (c.relation != Relation::equal)
            ++slack_cols;
        if (c.relation != Relation::less_equal)
            ++artificial_cols;
    }
    const std::size_t total = n + slack_cols + artificial_cols;
    Tableau t(m, total);
    std::vector<std::size_t> basis(m);
    std::vector<bool> is_artificial(total, false);

    std::size_t next_slack = n;
    std::size_t next_art = n + slack_cols;
    for (std::size_t r = 0; r < m; ++r) {
        const auto& c = rows[r];
        for (std::size_t j = 0; j < n; ++j)
            t.at(r, j) = c.coeffs[j];
        t.rhs(r) = c.rhs;
        switch (c.relation) {
        case Relation::less_equal:
            t.at(r, next_slack) = 1.0;
            basis[r] = next_slack++;
            break;
        case Relation::greater_equal:
            t.at(r, next_slack++) = -1.0;
            t.at(r, next_art) = 1.0;
            is_artificial[next_art] = true;
            basis[r] = next_art++;
            break;
        case Relation::equal:
            t.at(r, next_art) = 1.0;
            is_artificial[next_art] = true;
            basis[r] = next_art++;
            break;
        }
    }

    Result result;
    std::vector<bool> blocked(total, false);

    // phase 1: maximize -sum(artificials)
    if (artificial_cols > 0) {
        for (std::size_t c = 0; c <= total; ++c) {
            double s = 0.0;
            for (std::size_t r = 0; r < m; ++r)
                if (is_artificial[basis[r]])
                    s -= (c == total ? t.rhs(r) : t.at(r, c));
            t.at(m, c) = s;
        }
        for (std::size_t c = 0; c < total; ++c)
            if (is_artificial[c])
                t.at(m, c) = 0.0;
        const Status s1 = iterate(t, basis, blocked, result.iterations, max_iterations);
        if (s1 == Status::iteration_limit) {
            result.status = s1;
            return result;
        }
        if (t.value() < -1e-9) {
            result.status = Status::infeasible;
            return result;
        }
        // drive zero-level artificials out of the basis where possible
        for (std::size_t r = 0; r < m; ++r) {
            if (!is_artificial[basis[r]])
                continue;
            for (std::size_t c = 0; c < total; ++c) {
                if (!is_artificial[c] && std::abs(t.at(r, c)) > 1e-9) {
                    t.pivot(r, c);
                    basis[r] = c;
                    break;
                }
            }
        }
        for (std::size_t c = 0; c < total; ++c)
            blocked[c] = is_artificial[c];
    }

    // phase 2: reduced costs for the real objective
    for (std::size_t c = 0; c <= total; ++c) {
        double s = 0.0;
        for (std::size_t r = 0; r < m; ++r) {
            const std::size_t b = basis[r];
            const double cb = b < n ? problem.objective[b] : 0.0;
            s += cb * (c == total ? t.rhs(r) : t.at(r, c));
        }
        const double cj = c < n ? problem.objective[c] : 0.0;
        t.at(m, c) = c == total ? s : s - cj;
    }
    for (std::size_t r = 0; r < m; ++r)
        t.at(m, basis[r]) = 0.0;

    result.status = iterate(t, basis, blocked, result.iterations, max_iterations);
    if (result.status != Status::optimal)
        return result;
    result.x.assign(n, 0.0);
    for (std::size_t r = 0; r < m; ++r)
        if (basis[r] < n)
            result.x[basis[r]] = t.rhs(r);
    result.objective = 0.0;
    for (std::size_t j = 0; j < n; ++j)
        result.objective += problem.objective[j] * result.x[j];
    return result;
}

} // namespace cvar_reach::lp
