#include "cvar_reach/safe_sets.hpp"

#include "cvar_reach/csv.hpp"
#include "cvar_reach/parallel.hpp"
#include "cvar_reach/risk.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cvar_reach {

namespace {

constexpr double kAlphaMatch = 1e-12;
// Log-space membership slack, so J_0 == beta e^{m r} to rounding is a member.
constexpr double kLogSlack = 1e-12;

bool same_alpha(double a, double b) { return std::abs(a - b) <= kAlphaMatch; }

std::string point_name(double x, double alpha) {
    std::ostringstream os;
    os << "(x=" << x << ", alpha=" << alpha << ")";
    return os.str();
}

std::size_t mc_alpha_index(const McGridResult& mc, double alpha) {
    for (std::size_t a = 0; a < mc.alphas.size(); ++a)
        if (same_alpha(mc.alphas[a], alpha))
            return a;
    throw std::invalid_argument("no Monte Carlo estimates at alpha=" + std::to_string(alpha));
}

} // namespace

const char* to_string(SetSource source) {
    return source == SetSource::value_iteration ? "value_iteration" : "monte_carlo";
}

std::size_t SafeSetGrid::count() const { return static_cast<std::size_t>(std::count(membership.begin(), membership.end(), true)); }

SafeSetGrid extract_U(const ValueTable& J0, const StageCostSpec& spec, double alpha, double r) {
    const AugmentedGrid& grid = J0.grid();
    const auto level = grid.level_index(alpha);
    if (!level)
        throw std::invalid_argument("extract_U: alpha=" + std::to_string(alpha) + " is not a grid confidence level");
    const double log_threshold = std::log(spec.beta) + spec.m * r;
    SafeSetGrid set;
    set.alpha = alpha;
    set.r = r;
    set.source = SetSource::value_iteration;
    set.states.assign(grid.states().begin(), grid.states().end());
    for (std::size_t i = 0; i < grid.num_states(); ++i) {
        const double j = J0.at(i, *level);
        const double margin = j > 0.0 ? log_threshold - std::log(j) : std::numeric_limits<double>::infinity();
        set.statistic.push_back(j);
        set.boundary_margin.push_back(margin);
        set.membership.push_back(margin >= -kLogSlack);
    }
    return set;
}

SafeSetGrid extract_S_mc(const McGridResult& mc, double alpha, double r) {
    std::size_t a = 0;
    try {
        a = mc_alpha_index(mc, alpha);
    } catch (const std::invalid_argument&) {
        const double x = mc.grid->num_states() ? mc.grid->states()[0] : 0.0;
        throw std::invalid_argument("extract_S_mc: missing estimate at " + point_name(x, alpha));
    }
    SafeSetGrid set;
    set.alpha = alpha;
    set.r = r;
    set.source = SetSource::monte_carlo;
    set.states.assign(mc.grid->states().begin(), mc.grid->states().end());
    for (std::size_t i = 0; i < set.states.size(); ++i) {
        const std::size_t idx = mc.index(i, a);
        if (idx >= mc.w0.size() || mc.w0[idx].sample_count == 0)
            throw std::invalid_argument("extract_S_mc: missing estimate at " + point_name(set.states[i], alpha));
        const CvarEstimate& e = mc.w0[idx];
        const double scale = std::max({e.standard_error, e.jitter_sigma, std::numeric_limits<double>::min()});
        set.statistic.push_back(e.value);
        set.boundary_margin.push_back((r - e.value) / scale);
        set.membership.push_back(e.value <= r + kJitterAllowance * e.jitter_sigma);
    }
    return set;
}

SetCheckReport check_inclusion(const SafeSetGrid& U, const SafeSetGrid& S, double margin_sigmas) {
    if (!same_alpha(U.alpha, S.alpha) || U.r != S.r)
        throw std::invalid_argument("check_inclusion: sets are for different (alpha, r)");
    if (U.states != S.states)
        throw std::invalid_argument("check_inclusion: sets are on different grids");
    SetCheckReport rep;
    for (std::size_t i = 0; i < U.states.size(); ++i) {
        ++rep.checked;
        if (!U.membership[i] || S.membership[i])
            continue;
        if (S.source == SetSource::monte_carlo && std::abs(S.boundary_margin[i]) < margin_sigmas) {
            ++rep.banded;
            continue;
        }
        std::ostringstream os;
        os << "x in U but not S at alpha=" << U.alpha << ", r=" << U.r << " (S statistic " << S.statistic[i]
           << ", margin " << S.boundary_margin[i] << ")";
        rep.violations.push_back({U.states[i], os.str()});
    }
    rep.pass = rep.violations.empty();
    return rep;
}

SetCheckReport check_nesting(std::span<const SafeSetGrid> sets, double margin_sigmas) {
    SetCheckReport rep;
    for (const auto& s : sets)
        if (s.source != sets.front().source || s.states != sets.front().states)
            throw std::invalid_argument("check_nesting: sets must share source and grid");
    for (const auto& inner : sets)
        for (const auto& outer : sets) {
            if (&inner == &outer || outer.alpha < inner.alpha - kAlphaMatch || outer.r < inner.r)
                continue;
            for (std::size_t i = 0; i < inner.states.size(); ++i) {
                ++rep.checked;
                if (!inner.membership[i] || outer.membership[i])
                    continue;
                if (inner.source == SetSource::monte_carlo &&
                    (std::abs(inner.boundary_margin[i]) < margin_sigmas ||
                     std::abs(outer.boundary_margin[i]) < margin_sigmas)) {
                    ++rep.banded;
                    continue;
                }
                std::ostringstream os;
                os << "member of (alpha=" << inner.alpha << ", r=" << inner.r << ") but not of (alpha=" << outer.alpha
                   << ", r=" << outer.r << ")";
                rep.violations.push_back({inner.states[i], os.str()});
            }
        }
    rep.pass = rep.violations.empty();
    return rep;
}

namespace {

double interpolate(std::span<const double> xs, std::span<const double> v, double x) {
    if (x <= xs.front())
        return v.front();
    if (x >= xs.back())
        return v.back();
    const auto hi = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin());
    const std::size_t lo = hi - 1;
    const double w = (x - xs[lo]) / (xs[hi] - xs[lo]);
    return (1.0 - w) * v[lo] + w * v[hi];
}

} // namespace

ProbSafetyTable prob_safety_dp(const SystemModel& model, const SurfaceFunction& surface,
                               std::span<const double> states, int horizon) {
    if (states.size() < 2 || !std::is_sorted(states.begin(), states.end()))
        throw std::invalid_argument("prob_safety_dp: need at least two ascending states");
    if (horizon < 0)
        throw std::invalid_argument("prob_safety_dp: negative horizon");
    const std::size_t S = states.size();
    const auto& dist = model.disturbance();
    ProbSafetyTable out;
    out.states.assign(states.begin(), states.end());
    out.safety.assign(static_cast<std::size_t>(horizon) + 1, std::vector<double>(S, 0.0));
    for (std::size_t i = 0; i < S; ++i)
        out.safety.back()[i] = surface.in_constraint_set(states[i]) ? 1.0 : 0.0;
    for (int k = horizon - 1; k >= 0; --k) {
        const auto& next = out.safety[static_cast<std::size_t>(k) + 1];
        auto& cur = out.safety[static_cast<std::size_t>(k)];
        for (std::size_t i = 0; i < S; ++i) {
            if (!surface.in_constraint_set(states[i]))
                continue;
            double best = 0.0;
            for (double u : model.controls()) {
                double p = 0.0;
                for (std::size_t j = 0; j < dist.size(); ++j)
                    p += dist.probs()[j] * interpolate(out.states, next, model.step(states[i], u, dist.values()[j]));
                best = std::max(best, p);
            }
            cur[i] = std::clamp(best, 0.0, 1.0);
        }
    }
    return out;
}

SpecialCaseReport special_case_equivalence(const SystemModel& model, double constraint_upper,
                                           std::span<const double> states, double epsilon,
                                           const RolloutPolicy& policy, const McRunConfig& cfg, double shell) {
    const SurfaceFunction g = SurfaceFunction::indicator(constraint_upper);
    const ProbSafetyTable dp = prob_safety_dp(model, g, states, cfg.horizon);
    SpecialCaseReport rep;
    rep.epsilon = epsilon;
    rep.shell = shell;
    rep.states.assign(states.begin(), states.end());
    const std::size_t S = states.size();
    rep.dp_violation.resize(S);
    rep.risk_statistic.resize(S);
    parallel_for(S, cfg.threads, [&](std::size_t i) {
        const CostSamples s = sample_costs(model, policy, g, nullptr, states[i], 1.0, cfg, i);
        const JitteredCvarSample sample(s.max_surface, cfg.jitter_sigma, cfg.seed, rng_stream::jitter_w0, i);
        rep.risk_statistic[i] = sample.estimate(1.0).value + 0.5;
    });
    for (std::size_t i = 0; i < S; ++i) {
        rep.dp_violation[i] = dp.violation(i);
        rep.in_dp.push_back(rep.dp_violation[i] <= epsilon);
        rep.in_risk.push_back(rep.risk_statistic[i] - 0.5 <= epsilon - 0.5 + kJitterAllowance * cfg.jitter_sigma);
        if (rep.in_dp[i] != rep.in_risk[i]) {
            rep.symmetric_difference.push_back(states[i]);
            if (std::abs(rep.dp_violation[i] - epsilon) > shell)
                rep.outside_shell.push_back(states[i]);
        }
    }
    rep.pass = rep.outside_shell.empty();
    return rep;
}

SetCheckReport check_exit_bound(const SafeSetGrid& U0, const McGridResult& mc, double margin_sigmas) {
    const std::size_t a = mc_alpha_index(mc, U0.alpha);
    if (U0.states.size() != mc.grid->num_states())
        throw std::invalid_argument("check_exit_bound: set and estimates are on different grids");
    SetCheckReport rep;
    for (std::size_t i = 0; i < U0.states.size(); ++i) {
        if (!U0.membership[i])
            continue;
        ++rep.checked;
        const double freq = mc.exit_frequency[mc.index(i, a)];
        const double bound = U0.alpha + margin_sigmas * mc.exit_standard_error(i, a);
        if (freq <= bound)
            continue;
        std::ostringstream os;
        os << "exit frequency " << freq << " exceeds " << bound << " at alpha=" << U0.alpha;
        rep.violations.push_back({U0.states[i], os.str()});
    }
    rep.pass = rep.violations.empty();
    return rep;
}

std::vector<SetsCsvRow> sets_rows(std::span<const SafeSetGrid> U, std::span<const SafeSetGrid> S,
                                  const McGridResult& mc) {
    std::vector<SetsCsvRow> rows;
    for (const auto& u : U) {
        const auto s = std::find_if(S.begin(), S.end(),
                                    [&](const SafeSetGrid& c) { return same_alpha(c.alpha, u.alpha) && c.r == u.r; });
        if (s == S.end())
            throw std::invalid_argument("sets_rows: no Monte Carlo set for alpha=" + std::to_string(u.alpha));
        const std::size_t a = mc_alpha_index(mc, u.alpha);
        for (std::size_t i = 0; i < u.states.size(); ++i) {
            const CvarEstimate& e = mc.w0[mc.index(i, a)];
            rows.push_back({u.states[i], u.alpha, u.r, u.membership[i], s->membership[i], u.statistic[i], e.value,
                            e.standard_error});
        }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const SetsCsvRow& a, const SetsCsvRow& b) {
        if (a.x != b.x)
            return a.x < b.x;
        if (a.alpha != b.alpha)
            return a.alpha > b.alpha;
        return a.r < b.r;
    });
    return rows;
}

void write_sets_csv(const std::filesystem::path& path, std::span<const SetsCsvRow> rows) {
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    csv::write_row(out, {"x", "alpha", "r", "in_U", "in_S_mc", "J0", "W0_mc", "W0_stderr"});
    for (const auto& r : rows)
        csv::write_row(out, {csv::format(r.x), csv::format(r.alpha), csv::format(r.r), r.in_U ? "1" : "0",
                             r.in_S ? "1" : "0", csv::format(r.J0), csv::format(r.W0), csv::format(r.W0_stderr)});
}

} // namespace cvar_reach
