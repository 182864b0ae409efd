// Pond benchmark acceptance run. Prints one PASS/FAIL line per criterion;
// `--criterion N` runs a single one.

#include "pipeline.hpp"

#include "cvar_reach/safe_sets.hpp"
#include "cvar_reach/validation/oracles.hpp"
#include "cvar_reach/validation/suites.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

using namespace cvar_reach;
using namespace cvar_reach::app;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass;
    std::string detail;
};

/// Pond preset state shared between criteria when several run in one process.
class Pond {
public:
    Pond() : cfg_(default_config()), model_(build_model(cfg_)), grid_(build_grid(cfg_)), spec_(build_cost(cfg_)) {}

    const RunConfig& cfg() const { return cfg_; }
    const SystemModel& model() const { return model_; }
    const std::shared_ptr<const AugmentedGrid>& grid() const { return grid_; }
    const StageCostSpec& spec() const { return spec_; }

    const ValueIterationResult& vi() {
        if (!vi_) {
            const auto t0 = Clock::now();
            vi_.emplace(run_value_iteration(model_, grid_, spec_, cfg_.horizon));
            vi_seconds_ = seconds_since(t0);
        }
        return *vi_;
    }
    double vi_seconds() const { return vi_seconds_; }

    /// Open-valve Monte Carlo on G_s x G_c; `quick` uses the desk-scale sample count.
    const McGridResult& mc(bool quick) {
        auto& slot = quick ? mc_quick_ : mc_full_;
        if (!slot) {
            CommonOptions opt;
            opt.quick = quick;
            const RunConfig c = resolve(cfg_, opt);
            McGridOptions o;
            o.run.samples = c.mc.samples;
            o.run.jitter_sigma = c.mc.sigma_w0;
            o.run.seed = c.mc.seed;
            o.run.horizon = c.horizon;
            o.run.bootstrap_resamples = c.mc.bootstrap;
            o.j0_jitter_sigma = c.mc.sigma_j0;
            o.with_j0 = !quick;
            slot.emplace(estimate_grid(model_, RolloutPolicy::fixed_control(1.0), spec_, grid_, cfg_.sets.alphas, o));
        }
        return *slot;
    }

private:
    RunConfig cfg_;
    SystemModel model_;
    std::shared_ptr<const AugmentedGrid> grid_;
    StageCostSpec spec_;
    std::optional<ValueIterationResult> vi_;
    double vi_seconds_ = 0.0;
    std::optional<McGridResult> mc_full_, mc_quick_;
};

std::string fmt(double v, int digits = 4) {
    std::ostringstream os;
    os.precision(digits);
    os << v;
    return os.str();
}

Outcome grid_scale(Pond& pond) {
    const fs::path out = fs::temp_directory_path() / "cvar_reach_acceptance_solve";
    fs::remove_all(out);
    CommonOptions opt;
    opt.out = out;
    std::ostringstream log;
    const auto t0 = Clock::now();
    const int rc = cmd_solve(pond.cfg(), opt, log);
    const double seconds = seconds_since(t0);
    if (rc != exit_ok)
        return {false, "solve exited " + std::to_string(rc) + ": " + log.str()};
    const ValueTable J = read_value_table_csv(out / "solve" / "J_stage0.csv", pond.grid());
    std::size_t finite = 0;
    for (double v : J.values())
        finite += std::isfinite(v) && v > 0.0;
    fs::remove_all(out);
    const bool pass = finite == 594 && J.values().size() == 594 && seconds <= 1800.0;
    return {pass, std::to_string(finite) + "/594 grid points with finite J_0, N=" + std::to_string(pond.cfg().horizon) +
                      ", solve took " + fmt(seconds, 3) + " s (limit 1800 s)"};
}

Outcome policy_recovery(Pond& pond) {
    const auto& vi = pond.vi();
    const double E = pond.cfg().model.pond.outlet_elevation;
    std::size_t checked = 0, exceptions = 0;
    for (int k = 0; k < pond.cfg().horizon; ++k)
        for (std::size_t i = 0; i < pond.grid()->num_states(); ++i) {
            if (pond.grid()->states()[i] < E)
                continue;
            for (std::size_t l = 0; l < pond.grid()->num_levels(); ++l) {
                ++checked;
                exceptions += vi.policy.control(k, i, l) != 1.0;
            }
        }
    return {exceptions == 0, std::to_string(exceptions) + " exception(s) to u=1 over " + std::to_string(checked) +
                                 " (stage, x >= E, y) points"};
}

Outcome risk_neutral(Pond& pond) {
    const auto& J = pond.vi().J0();
    const auto e = validation::expectation_dp(pond.model(), pond.spec(), pond.grid()->states(), pond.cfg().horizon);
    const std::size_t top = *pond.grid()->level_index(0.999);
    double worst = 0.0, at = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
        const double rel = std::abs(J.at(i, top) - e[i]) / e[i];
        if (rel > worst) {
            worst = rel;
            at = pond.grid()->states()[i];
        }
    }
    return {worst <= 0.01, "max relative gap to expectation DP " + fmt(worst) + " at x=" + fmt(at) + " (limit 0.01)"};
}

Outcome inclusion(Pond& pond) {
    const double band = pond.cfg().sets.margin_sigmas;
    const std::vector<double> lattice = {-0.5, -0.25, 0.0, 0.25, 0.5};
    const std::vector<double> extra = {1.0, 1.5};
    std::string detail;
    bool pass = true;
    for (bool quick : {false, true}) {
        const auto& mc = pond.mc(quick);
        std::size_t violations = 0, banded = 0, members = 0, extra_members = 0, extra_violations = 0;
        for (double a : pond.cfg().sets.alphas) {
            for (double r : lattice) {
                const auto U = extract_U(pond.vi().J0(), pond.spec(), a, r);
                const auto rep = check_inclusion(U, extract_S_mc(mc, a, r), band);
                violations += rep.violations.size();
                banded += rep.banded;
                members += U.count();
            }
            for (double r : extra) {
                const auto U = extract_U(pond.vi().J0(), pond.spec(), a, r);
                extra_violations += check_inclusion(U, extract_S_mc(mc, a, r), band).violations.size();
                extra_members += U.count();
            }
        }
        pass = pass && violations == 0;
        detail += std::string(quick ? "; " : "") + "M=" + std::to_string(mc.options.run.samples) + ": " +
                  std::to_string(violations) + " violation(s), " + std::to_string(banded) + " banded, |U| total " +
                  std::to_string(members) + " (r in {1, 1.5}: |U| " + std::to_string(extra_members) + ", " +
                  std::to_string(extra_violations) + " violation(s))";
    }
    return {pass, detail};
}

Outcome lowest_state(Pond& pond) {
    const auto& mc = pond.mc(false);
    const double band = pond.cfg().sets.margin_sigmas;
    std::size_t outside = 0;
    std::string list;
    for (std::size_t a = 0; a < mc.alphas.size(); ++a) {
        const auto& e = mc.w0[mc.index(0, a)];
        const double margin = (e.value - 0.25) / std::max(e.standard_error, e.jitter_sigma);
        if (margin > band) {
            ++outside;
            list += (list.empty() ? "" : ",") + fmt(mc.alphas[a]);
        }
    }
    const std::size_t n = mc.alphas.size();
    return {2 * outside > n, "x=0 confidently outside S^0.25 for " + std::to_string(outside) + "/" + std::to_string(n) +
                                 " alphas (" + list + ")"};
}

Outcome ceiling(Pond& pond) {
    const auto& mc = pond.mc(false);
    double max_w0 = -1e300, worst_excess = -1e300;
    for (const auto& e : mc.w0) {
        max_w0 = std::max(max_w0, e.value);
        worst_excess = std::max(worst_excess, e.value - (1.5 + 3.0 * e.standard_error + e.max_abs_jitter));
    }
    return {worst_excess <= 0.0, "max W0 " + fmt(max_w0, 15) + " over " + std::to_string(mc.w0.size()) +
                                     " (x, alpha); largest excess over 1.5 + 3 stderr + jitter " + fmt(worst_excess)};
}

Outcome toy_chains(Pond& pond) {
    validation::ToyChainOptions o;
    o.chains = 100;
    const auto r = validation::toy_chain_suite(20190710, o);

    // reported without a gate: value iteration vs Monte Carlo J0* on the pond
    const auto& mc = pond.mc(false);
    double sum_star = 0.0, max_star = 0.0, sum_vi = 0.0, max_vi = 0.0;
    std::size_t points = 0;
    for (std::size_t a = 0; a < mc.alphas.size(); ++a) {
        const std::size_t level = *pond.grid()->level_index(mc.alphas[a]);
        for (std::size_t i = 0; i < pond.grid()->num_states(); ++i) {
            const double vi = pond.vi().J0().at(i, level);
            const double star = mc.j0[mc.index(i, a)].value;
            const double d = std::abs(vi - star);
            sum_star += d / star;
            max_star = std::max(max_star, d / star);
            sum_vi += d / vi;
            max_vi = std::max(max_vi, d / vi);
            ++points;
        }
    }
    const double n = static_cast<double>(points);
    return {r.pass, std::to_string(o.chains) + " toy chains, " + std::to_string(r.cases) +
                        " (x0, alpha) cases, worst relative gap to Markov-policy enumeration " + fmt(r.worst) +
                        " (limit 0.001)" +
                        (r.pass ? "" : ", " + std::to_string(r.failures) + " case(s) over the limit, first [" + r.detail + "]") +
                        "; pond J0 vs MC J0*: mean (max) gap over J0* " + fmt(sum_star / n) + " (" + fmt(max_star) +
                        "), over J0 " + fmt(sum_vi / n) + " (" + fmt(max_vi) + ")"};
}

Outcome property_suites(Pond& pond) {
    CommonOptions opt;
    opt.quick = true;
    opt.out = fs::temp_directory_path() / "cvar_reach_acceptance_validate";
    std::ostringstream log;
    const auto t0 = Clock::now();
    const int rc = cmd_validate(resolve(pond.cfg(), opt), opt, log);
    const double seconds = seconds_since(t0);
    std::istringstream lines(log.str());
    std::string line, failed;
    std::size_t suites = 0;
    while (std::getline(lines, line)) {
        if (line.rfind("PASS", 0) == 0 || line.rfind("FAIL", 0) == 0)
            ++suites;
        if (line.rfind("FAIL", 0) == 0)
            failed += " [" + line + "]";
    }
    return {rc == exit_ok && seconds < 300.0, std::to_string(suites) + " gated suite(s), validate exited " +
                                                  std::to_string(rc) + " in " + fmt(seconds, 3) +
                                                  " s (quick limit 300 s)" + failed};
}

} // namespace

int main(int argc, char** argv) {
    std::optional<int> only;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
            only = std::atoi(argv[++i]);
        } else {
            std::cerr << "usage: " << argv[0] << " [--criterion N]\n";
            return 2;
        }
    }
    const std::vector<std::pair<const char*, std::function<Outcome(Pond&)>>> criteria = {
        {"grid-scale solve", grid_scale},
        {"valve-open policy above the outlet", policy_recovery},
        {"risk-neutral oracle at alpha=0.999", risk_neutral},
        {"U inside S on the lattice", inclusion},
        {"x=0 outside S^0.25 for most alphas", lowest_state},
        {"W0 ceiling 1.5", ceiling},
        {"toy-chain exactness", toy_chains},
        {"property suites", property_suites},
    };
    if (only && (*only < 1 || *only > static_cast<int>(criteria.size()))) {
        std::cerr << "no criterion " << *only << "\n";
        return 2;
    }
    Pond pond;
    bool all = true;
    for (std::size_t c = 0; c < criteria.size(); ++c) {
        if (only && static_cast<int>(c + 1) != *only)
            continue;
        Outcome o;
        try {
            o = criteria[c].second(pond);
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        all = all && o.pass;
        std::cout << "criterion " << c + 1 << " " << (o.pass ? "PASS" : "FAIL") << "  " << criteria[c].first << ": "
                  << o.detail << std::endl;
    }
    return all ? 0 : 1;
}
