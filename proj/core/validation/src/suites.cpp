#include "cvar_reach/validation/suites.hpp"

#include "cvar_reach/envelope.hpp"
#include "cvar_reach/risk.hpp"
#include "cvar_reach/validation/oracles.hpp"
#include "cvar_reach/validation/toy_chains.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace cvar_reach::validation {

namespace {

DiscreteRandomVariable random_variable(std::mt19937_64& gen, std::size_t max_atoms, double lo, double hi) {
    std::uniform_int_distribution<std::size_t> atoms(1, max_atoms);
    std::uniform_real_distribution<double> value(lo, hi);
    std::uniform_real_distribution<double> weight(0.05, 1.0);
    const std::size_t n = atoms(gen);
    std::vector<double> z(n), p(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        z[i] = value(gen);
        total += p[i] = weight(gen);
    }
    for (double& q : p)
        q /= total;
    return DiscreteRandomVariable(std::move(z), std::move(p));
}

DiscreteRandomVariable mapped(const DiscreteRandomVariable& z, auto f) {
    std::vector<double> out;
    for (std::size_t i = 0; i < z.size(); ++i)
        out.push_back(f(i, z.outcomes()[i]));
    return DiscreteRandomVariable(out, std::vector<double>(z.probs().begin(), z.probs().end()));
}

double random_alpha(std::mt19937_64& gen) {
    std::uniform_real_distribution<double> a(1e-3, 1.0);
    std::bernoulli_distribution one(0.1);
    return one(gen) ? 1.0 : a(gen);
}

// t CVaR_t[Z] on [0, 1]: zero at the origin, then one segment per atom in
// decreasing outcome order with slope equal to the outcome.
PiecewiseLinear tail_curve(const DiscreteRandomVariable& z) {
    std::vector<std::size_t> order(z.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return z.outcomes()[a] > z.outcomes()[b]; });
    std::vector<Breakpoint> pts{{0.0, 0.0}};
    double t = 0.0, v = 0.0;
    for (std::size_t n = 0; n < order.size(); ++n) {
        const std::size_t i = order[n];
        t += z.probs()[i];
        v += z.probs()[i] * z.outcomes()[i];
        pts.push_back({n + 1 == order.size() ? 1.0 : t, v});
    }
    return PiecewiseLinear(std::move(pts));
}

void note(SuiteResult& r, double err, double limit, const std::string& what) {
    r.worst = std::max(r.worst, err);
    if (err > limit)
        ++r.failures;
    if (err > limit && r.pass) {
        r.pass = false;
        r.detail = what;
    }
}

std::string describe(const char* what, std::size_t i) {
    std::ostringstream os;
    os << what << " failed on case " << i;
    return os.str();
}

} // namespace

SuiteResult coherence_suite(std::uint64_t seed, std::size_t count, double tol) {
    SuiteResult r{"cvar coherence", true, 0, 0.0, ""};
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> shift(-10.0, 10.0), scale(0.01, 5.0), bump(0.0, 2.0);
    for (std::size_t i = 0; i < count; ++i, ++r.cases) {
        const auto z = random_variable(gen, 8, -5.0, 5.0);
        const double a = random_alpha(gen);
        const double base = cvar_exact(z, a);
        const double mag = 1.0 + std::abs(base);

        const double c = shift(gen);
        note(r, std::abs(cvar_exact(mapped(z, [&](std::size_t, double v) { return v + c; }), a) - base - c) /
                    (mag + std::abs(c)),
             tol, describe("translation invariance", i));
        const double lambda = scale(gen);
        note(r, std::abs(cvar_exact(mapped(z, [&](std::size_t, double v) { return lambda * v; }), a) - lambda * base) /
                    (lambda * mag),
             tol, describe("positive homogeneity", i));
        std::vector<double> d(z.size());
        for (double& x : d)
            x = bump(gen);
        note(r, std::max(0.0, base - cvar_exact(mapped(z, [&](std::size_t k, double v) { return v + d[k]; }), a)) / mag,
             tol, describe("monotonicity", i));
        const auto w = mapped(z, [&](std::size_t, double) { return shift(gen) / 2.0; });
        const auto sum = mapped(z, [&](std::size_t k, double v) { return v + w.outcomes()[k]; });
        note(r, std::max(0.0, cvar_exact(sum, a) - base - cvar_exact(w, a)) / mag, tol, describe("subadditivity", i));
        // the minimization form attains its minimum at an atom
        const std::vector<double> atoms(z.outcomes().begin(), z.outcomes().end());
        note(r, std::abs(cvar_minimization_oracle(z, a, atoms) - base) / mag, tol,
             describe("minimization form", i));
    }
    return r;
}

SuiteResult concavity_suite(std::uint64_t seed, std::size_t count, double tol) {
    SuiteResult r{"y*CVaR_y concavity", true, 0, 0.0, ""};
    std::mt19937_64 gen(seed);
    constexpr std::size_t mesh = 400;
    for (std::size_t i = 0; i < count; ++i, ++r.cases) {
        const auto z = random_variable(gen, 10, -5.0, 5.0);
        std::vector<double> f(mesh + 1, 0.0), cv(mesh + 1, 0.0);
        for (std::size_t k = 1; k <= mesh; ++k) {
            const double y = static_cast<double>(k) / mesh;
            cv[k] = cvar_exact(z, y);
            f[k] = y * cv[k];
        }
        const double mag = 1.0 + std::abs(z.max_outcome()) + std::abs(z.min_outcome());
        for (std::size_t k = 1; k < mesh; ++k) {
            note(r, std::max(0.0, f[k + 1] - 2.0 * f[k] + f[k - 1]) / mag, tol, describe("concavity", i));
            if (k >= 2)
                note(r, std::max(0.0, cv[k] - cv[k - 1]) / mag, tol, describe("monotone in y", i));
        }
    }
    return r;
}

SuiteResult log_sum_exp_suite(std::uint64_t seed, std::size_t count, double tol) {
    SuiteResult r{"log-sum-exp bounds", true, 0, 0.0, ""};
    std::mt19937_64 gen(seed);
    std::uniform_int_distribution<std::size_t> len(1, 20);
    std::uniform_real_distribution<double> val(-10.0, 10.0), mm(0.1, 50.0);
    for (std::size_t i = 0; i < count; ++i, ++r.cases) {
        std::vector<double> y(len(gen));
        for (double& v : y)
            v = val(gen);
        const double m = mm(gen);
        const double lse = log_sum_exp_scaled(y, m);
        const double mx = *std::max_element(y.begin(), y.end());
        const double upper = mx + std::log(static_cast<double>(y.size())) / m;
        note(r, std::max({0.0, mx - lse, lse - upper}) / (1.0 + std::abs(mx)), tol, describe("bounds", i));
    }
    return r;
}

SuiteResult decomposition_suite(std::uint64_t seed, std::size_t count, double tol) {
    SuiteResult r{"two-stage decomposition", true, 0, 0.0, ""};
    std::mt19937_64 gen(seed);
    std::uniform_int_distribution<std::size_t> width(2, 3);
    std::uniform_real_distribution<double> weight(0.05, 1.0);
    for (std::size_t i = 0; i < count; ++i, ++r.cases) {
        const std::size_t W = width(gen);
        std::vector<double> p(W);
        double total = 0.0;
        for (double& q : p)
            total += q = weight(gen);
        for (double& q : p)
            q /= total;
        std::vector<PiecewiseLinear> curves;
        std::vector<double> mz, mp;
        for (std::size_t j = 0; j < W; ++j) {
            const auto z = random_variable(gen, 4, 0.0, 10.0);
            curves.push_back(tail_curve(z));
            for (std::size_t k = 0; k < z.size(); ++k) {
                mz.push_back(z.outcomes()[k]);
                mp.push_back(p[j] * z.probs()[k]);
            }
        }
        const double a = random_alpha(gen);
        const EnvelopeSolver solver(p, curves);
        const double decomposed = solver.solve(a).optimal_value;
        const double direct = cvar_exact(DiscreteRandomVariable(mz, mp), a);
        const double err = std::abs(decomposed - direct) / std::max(1.0, std::abs(direct));
        note(r, err, tol, describe("decomposition identity", i));
    }
    return r;
}

SuiteResult envelope_oracle_suite(std::uint64_t seed, std::size_t count, double tol) {
    SuiteResult r{"envelope solver vs brute force", true, 0, 0.0, ""};
    std::mt19937_64 gen(seed);
    std::uniform_int_distribution<std::size_t> width(2, 3), segs(1, 5);
    std::uniform_real_distribution<double> unit(0.0, 1.0), slope(-1.0, 5.0), weight(0.05, 1.0), ymesh(0.02, 1.0);
    for (std::size_t i = 0; i < count; ++i, ++r.cases) {
        const std::size_t W = width(gen);
        InnerProblem problem;
        double total = 0.0;
        for (std::size_t j = 0; j < W; ++j)
            total += problem.envelope.probs.emplace_back(weight(gen));
        for (double& q : problem.envelope.probs)
            q /= total;
        for (std::size_t j = 0; j < W; ++j) {
            const std::size_t K = segs(gen);
            std::vector<double> ts{0.0, 1.0}, slopes(K);
            while (ts.size() < K + 1)
                ts.push_back(unit(gen));
            std::sort(ts.begin(), ts.end());
            ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
            for (double& s : slopes)
                s = slope(gen);
            std::sort(slopes.begin(), slopes.end(), std::greater<>());
            std::vector<Breakpoint> pts{{0.0, unit(gen)}};
            for (std::size_t k = 1; k < ts.size(); ++k)
                pts.push_back({ts[k], pts.back().value + slopes[k - 1] * (ts[k] - ts[k - 1])});
            problem.curves.emplace_back(std::move(pts));
        }
        const double y = ymesh(gen);
        problem.envelope.y = y;
        const double exact = solve_inner(problem).optimal_value;
        const double lp = solve_inner_lp(problem).optimal_value;

        const auto& p = problem.envelope.probs;
        const std::size_t steps = W == 2 ? 4000 : 400;
        double brute = -std::numeric_limits<double>::infinity();
        std::vector<double> t(W);
        auto last = [&](std::size_t used) {
            double rest = y;
            for (std::size_t j = 0; j < used; ++j)
                rest -= p[j] * t[j];
            t[used] = rest / p[used];
            if (t[used] >= 0.0 && t[used] <= 1.0)
                brute = std::max(brute, inner_objective(problem, t));
        };
        for (std::size_t a = 0; a <= steps; ++a) {
            t[0] = static_cast<double>(a) / steps;
            if (W == 2) {
                last(1);
                continue;
            }
            for (std::size_t b = 0; b <= steps; ++b) {
                t[1] = static_cast<double>(b) / steps;
                last(2);
            }
        }
        const double mag = std::max(1.0, std::abs(exact));
        note(r, std::max(0.0, brute - exact) / mag, 1e-9, describe("greedy below a feasible point", i));
        note(r, (exact - brute) / mag, tol, describe("brute-force gap", i));
        note(r, std::abs(exact - lp) / mag, 1e-8, describe("hypograph LP", i));
    }
    return r;
}

SuiteResult toy_chain_suite(std::uint64_t seed, const ToyChainOptions& options) {
    SuiteResult r{options.history ? "toy chains vs history-policy enumeration" : "toy chains vs Markov-policy enumeration",
                  true, 0, 0.0, ""};
    std::mt19937_64 gen(seed);
    std::uniform_int_distribution<std::size_t> states(2, 3), controls(1, 2), dist(2, 3);
    std::uniform_int_distribution<int> horizon(1, 3);
    for (std::size_t c = 0; c < options.chains; ++c) {
        const ToyChain chain =
            random_toy_chain(gen, {states(gen), controls(gen), dist(gen), horizon(gen)});
        const auto grid = std::make_shared<const AugmentedGrid>(
            chain.state_values(), fine_confidence_levels(options.level_denominator));
        BackupOptions bo;
        bo.threads = 1;
        bo.record_multipliers = false;
        const auto vi = run_value_iteration(chain.model(), grid, chain.cost_spec(), chain.horizon, bo);
        for (std::size_t x0 = 0; x0 < chain.num_states(); ++x0)
            for (double a : options.alphas) {
                const auto level = grid->level_index(a);
                if (!level)
                    throw std::invalid_argument("toy_chain_suite: alpha is not a grid level");
                const double oracle = options.history ? toy_min_cvar_history(chain, x0, a)
                                                      : toy_min_cvar_markov(chain, x0, a);
                const double err = std::abs(vi.J0().at(x0, *level) - oracle) / std::max(1.0, std::abs(oracle));
                ++r.cases;
                std::ostringstream os;
                os << "chain " << c << ", x0=" << x0 << ", alpha=" << a << ": value iteration "
                   << vi.J0().at(x0, *level) << " vs " << oracle;
                note(r, err, options.tol, os.str());
            }
    }
    return r;
}

namespace {

void absorb(SuiteResult& r, const SetCheckReport& rep, const std::string& what) {
    r.cases += rep.checked;
    r.worst = std::max(r.worst, static_cast<double>(rep.violations.size()));
    if (!rep.pass && r.pass) {
        r.pass = false;
        std::ostringstream os;
        os << what << ": " << rep.violations.size() << " violation(s), first at x=" << rep.violations.front().x << " ("
           << rep.violations.front().detail << ")";
        r.detail = os.str();
    }
}

} // namespace

SuiteResult nesting_suite(const PondRun& run, double margin_sigmas) {
    SuiteResult r{"set nesting", true, 0, 0.0, ""};
    absorb(r, check_nesting(run.U, 0.0), "value-iteration sets");
    absorb(r, check_nesting(run.S, margin_sigmas), "Monte Carlo sets");
    return r;
}

SuiteResult inclusion_suite(const PondRun& run, double margin_sigmas) {
    SuiteResult r{"U inside S", true, 0, 0.0, ""};
    std::size_t banded = 0;
    for (const auto& u : run.U)
        for (const auto& s : run.S)
            if (std::abs(s.alpha - u.alpha) <= 1e-12 && s.r == u.r) {
                const auto rep = check_inclusion(u, s, margin_sigmas);
                banded += rep.banded;
                absorb(r, rep, "inclusion");
            }
    if (r.pass) {
        std::ostringstream os;
        os << banded << " disagreement(s) inside the noise band";
        r.detail = os.str();
    }
    return r;
}

SuiteResult exit_bound_suite(std::span<const SafeSetGrid> U0, const McGridResult& mc, double margin_sigmas) {
    SuiteResult r{"exit-frequency bound on U at r=0", true, 0, 0.0, ""};
    for (const auto& u : U0)
        absorb(r, check_exit_bound(u, mc, margin_sigmas), "exit bound");
    if (r.pass) {
        std::ostringstream os;
        os << r.cases << " member state(s) checked";
        r.detail = os.str();
    }
    return r;
}

SuiteResult special_case_suite(std::span<const SpecialCaseReport> reports) {
    SuiteResult r{"indicator-cost special case", true, 0, 0.0, ""};
    std::ostringstream os;
    for (const auto& rep : reports) {
        r.cases += rep.states.size();
        r.worst = std::max(r.worst, static_cast<double>(rep.outside_shell.size()));
        os << "eps=" << rep.epsilon << ": |dp set|=" << std::count(rep.in_dp.begin(), rep.in_dp.end(), true)
           << ", |risk set|=" << std::count(rep.in_risk.begin(), rep.in_risk.end(), true)
           << ", symmetric difference " << rep.symmetric_difference.size() << ", outside shell "
           << rep.outside_shell.size() << "; ";
        if (!rep.pass)
            r.pass = false;
    }
    r.detail = os.str();
    return r;
}

SuiteResult toy_special_case_suite(std::uint64_t seed, std::size_t chains, std::size_t samples) {
    SuiteResult r{"indicator-cost special case (toy chains)", true, 0, 0.0, ""};
    std::mt19937_64 gen(seed);
    McRunConfig cfg;
    cfg.samples = samples;
    cfg.bootstrap_resamples = 0;
    cfg.threads = 1;
    cfg.seed = seed;
    std::size_t disagreements = 0;
    for (std::size_t c = 0; c < chains; ++c) {
        const ToyChain chain = random_toy_chain(gen, {3, 1, 3, 3});
        cfg.horizon = chain.horizon;
        const auto model = chain.model();
        const auto states = chain.state_values();
        // K = {0, 1}; state 2 is the unsafe one
        for (double eps : {0.1, 0.3, 0.5, 0.7, 0.9}) {
            const auto rep =
                special_case_equivalence(model, 1.5, states, eps, RolloutPolicy::fixed_control(0.0), cfg);
            r.cases += rep.states.size();
            disagreements += rep.symmetric_difference.size();
            r.worst = std::max(r.worst, static_cast<double>(rep.outside_shell.size()));
            if (!rep.pass && r.pass) {
                r.pass = false;
                std::ostringstream os;
                os << "chain " << c << ", eps=" << eps << ": state " << rep.outside_shell.front()
                   << " disagrees outside the shell";
                r.detail = os.str();
            }
        }
    }
    if (r.pass)
        r.detail = std::to_string(disagreements) + " disagreement(s), all inside the shell";
    return r;
}

SuiteResult toy_exit_bound_suite(std::uint64_t seed, std::size_t chains, double tol) {
    SuiteResult r{"exit-probability bound on U at r=0 (toy chains)", true, 0, 0.0, ""};
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> safe_g(-2.0, -0.5);
    constexpr double m = 10.0;
    std::size_t members = 0;
    for (std::size_t c = 0; c < chains; ++c) {
        ToyChain chain = random_toy_chain(gen, {3, 1, 3, 3});
        // c(s) = e^{m g(s)} with beta = 1, so U^0 = {J_0 <= 1}; state 2 has g > 0
        for (std::size_t s = 0; s + 1 < chain.num_states(); ++s)
            chain.costs[s] = std::exp(m * safe_g(gen));
        chain.costs.back() = std::exp(m * 0.5);
        const auto grid = std::make_shared<const AugmentedGrid>(chain.state_values(), fine_confidence_levels(1024));
        BackupOptions bo;
        bo.threads = 1;
        bo.record_multipliers = false;
        const auto vi = run_value_iteration(chain.model(), grid, chain.cost_spec(), chain.horizon, bo);
        const std::vector<std::vector<std::size_t>> only(static_cast<std::size_t>(chain.horizon),
                                                         std::vector<std::size_t>(chain.num_states(), 0));
        for (std::size_t x0 = 0; x0 < chain.num_states(); ++x0) {
            // total cost >= e^{m/2} > 1 exactly when the unsafe state is visited
            const auto z = toy_cost_distribution(chain, x0, only);
            double exit = 0.0;
            for (std::size_t i = 0; i < z.size(); ++i)
                if (z.outcomes()[i] >= 1.0)
                    exit += z.probs()[i];
            for (double a : {1.0, 0.5, 0.25, 0.125, 0.0625}) {
                if (vi.J0().at(x0, *grid->level_index(a)) > 1.0)
                    continue;
                ++members;
                ++r.cases;
                r.worst = std::max(r.worst, exit - a);
                if (exit > a + tol && r.pass) {
                    r.pass = false;
                    std::ostringstream os;
                    os << "chain " << c << ", x0=" << x0 << ", alpha=" << a << ": exit probability " << exit;
                    r.detail = os.str();
                }
            }
        }
    }
    if (r.pass)
        r.detail = std::to_string(members) + " (state, alpha) member(s) checked";
    return r;
}

std::string format_result(const SuiteResult& r) {
    std::ostringstream os;
    os << (r.pass ? "PASS" : "FAIL") << "  " << r.name << "  cases=" << r.cases << " worst=" << r.worst;
    if (r.failures > 0)
        os << " failing=" << r.failures;
    if (!r.detail.empty())
        os << "  " << r.detail;
    return os.str();
}

} // namespace cvar_reach::validation
