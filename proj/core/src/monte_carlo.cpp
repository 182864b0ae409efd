#include "cvar_reach/monte_carlo.hpp"

#include "cvar_reach/csv.hpp"
#include "cvar_reach/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

namespace cvar_reach {

RolloutPolicy RolloutPolicy::fixed_control(double u) {
    RolloutPolicy p;
    p.kind_ = Kind::fixed_control;
    p.fixed_ = u;
    return p;
}

RolloutPolicy RolloutPolicy::table(std::shared_ptr<const PolicyTable> policy) {
    if (!policy)
        throw std::invalid_argument("rollout policy: null policy table");
    RolloutPolicy p;
    p.kind_ = Kind::table;
    p.table_ = std::move(policy);
    return p;
}

void RolloutPolicy::check_compatible(const SystemModel& model, int horizon) const {
    if (kind_ == Kind::fixed_control) {
        const auto controls = model.controls();
        if (std::find(controls.begin(), controls.end(), fixed_) == controls.end())
            throw std::invalid_argument("rollout policy: fixed control is not in the model's control set");
        return;
    }
    if (table_->horizon() < horizon)
        throw std::invalid_argument("rollout policy: policy table is shorter than the horizon");
    if (table_->num_disturbances() != model.disturbance().size())
        throw std::invalid_argument("rollout policy: policy table disturbance count does not match the model");
    for (int k = 0; k < horizon; ++k)
        if (!table_->has_multipliers(k))
            throw std::invalid_argument("rollout policy: stage " + std::to_string(k) +
                                        " has no confidence multipliers");
}

namespace {

/// Runs one trajectory, calling visit(x_k) for k = 0..N.
template <class Visit>
void rollout(const SystemModel& model, const RolloutPolicy& policy, double x0, double alpha0, int horizon,
             const TrajectoryStream& stream, Visit&& visit) {
    const auto& dist = model.disturbance();
    const PolicyTable* table = policy.policy_table();
    double x = x0;
    double y = alpha0;
    visit(x);
    for (int k = 0; k < horizon; ++k) {
        const std::size_t j = dist.sample_index(
            stream.rng.uniform(rng_stream::disturbance, stream.point, stream.sample, static_cast<std::uint64_t>(k)));
        double u = policy.fixed();
        if (table != nullptr) {
            const AugmentedGrid& grid = table->grid();
            const std::size_t i = grid.nearest_state(x);
            const std::size_t l = grid.nearest_level(y);
            u = table->control(k, i, l);
            y = std::clamp(y * table->multiplier(k, i, l, j), grid.y_min(), 1.0);
        }
        x = model.step(x, u, dist.values()[j]);
        visit(x);
    }
}

} // namespace

std::vector<double> simulate_trajectory(const SystemModel& model, const RolloutPolicy& policy, double x0,
                                        double alpha0, int horizon, const TrajectoryStream& stream) {
    const auto b = model.bounds();
    if (x0 < b.lo || x0 > b.hi)
        throw std::domain_error("simulate_trajectory: initial state outside the state bounds");
    policy.check_compatible(model, horizon);
    std::vector<double> states;
    states.reserve(static_cast<std::size_t>(horizon) + 1);
    rollout(model, policy, x0, alpha0, horizon, stream, [&](double x) { states.push_back(x); });
    return states;
}

CostSamples sample_costs(const SystemModel& model, const RolloutPolicy& policy, const SurfaceFunction& surface,
                         const StageCostSpec* cost, double x0, double alpha0, const McRunConfig& cfg,
                         std::uint64_t point) {
    if (cfg.samples < 1)
        throw std::invalid_argument("monte carlo: need at least one sample");
    policy.check_compatible(model, cfg.horizon);
    CostSamples out;
    out.max_surface.resize(cfg.samples);
    if (cost != nullptr)
        out.total_cost.resize(cfg.samples);
    const CounterRng rng(cfg.seed);
    for (std::size_t s = 0; s < cfg.samples; ++s) {
        double worst = -std::numeric_limits<double>::infinity();
        double total = 0.0;
        rollout(model, policy, x0, alpha0, cfg.horizon, TrajectoryStream{rng, point, s}, [&](double x) {
            const double g = surface(x);
            worst = std::max(worst, g);
            if (cost != nullptr)
                total += stage_cost(*cost, x);
        });
        out.max_surface[s] = worst;
        if (cost != nullptr)
            out.total_cost[s] = total;
        if (worst >= 0.0)
            ++out.exits;
    }
    return out;
}

namespace {

CvarEstimate finish(const JitteredCvarSample& sample, double alpha, const McRunConfig& cfg, std::uint64_t point) {
    CvarEstimate est = sample.estimate(alpha);
    const double a[] = {alpha};
    est.standard_error = sample.bootstrap_standard_errors(a, cfg.bootstrap_resamples, cfg.seed, point).front();
    return est;
}

} // namespace

CvarEstimate estimate_W0(const SystemModel& model, const RolloutPolicy& policy, const SurfaceFunction& surface,
                         double x, double alpha, const McRunConfig& cfg, std::uint64_t point) {
    if (!(alpha > 0.0) || alpha > 1.0)
        throw std::domain_error("estimate_W0: alpha must lie in (0, 1]");
    const CostSamples s = sample_costs(model, policy, surface, nullptr, x, alpha, cfg, point);
    const JitteredCvarSample sample(s.max_surface, cfg.jitter_sigma, cfg.seed, rng_stream::jitter_w0, point);
    return finish(sample, alpha, cfg, point);
}

CvarEstimate estimate_J0star(const SystemModel& model, const RolloutPolicy& policy, const StageCostSpec& spec,
                             double x, double alpha, const McRunConfig& cfg, std::uint64_t point) {
    if (!(alpha > 0.0) || alpha > 1.0)
        throw std::domain_error("estimate_J0star: alpha must lie in (0, 1]");
    const CostSamples s = sample_costs(model, policy, spec.surface, &spec, x, alpha, cfg, point);
    const JitteredCvarSample sample(s.total_cost, cfg.jitter_sigma, cfg.seed, rng_stream::jitter_j0, point);
    return finish(sample, alpha, cfg, point);
}

double McGridResult::exit_standard_error(std::size_t state, std::size_t a) const {
    const double p = exit_frequency[index(state, a)];
    return std::sqrt(p * (1.0 - p) / static_cast<double>(options.run.samples));
}

McGridResult estimate_grid(const SystemModel& model, const RolloutPolicy& policy, const StageCostSpec& spec,
                           std::shared_ptr<const AugmentedGrid> grid, std::vector<double> alphas,
                           const McGridOptions& options) {
    for (double a : alphas)
        if (!(a > 0.0) || a > 1.0)
            throw std::domain_error("estimate_grid: alpha must lie in (0, 1]");
    policy.check_compatible(model, options.run.horizon);
    McGridResult out;
    out.grid = grid;
    out.alphas = std::move(alphas);
    out.options = options;
    const std::size_t A = out.alphas.size();
    const std::size_t S = grid->num_states();
    out.w0.resize(S * A);
    if (options.with_j0)
        out.j0.resize(S * A);
    out.exit_frequency.resize(S * A);
    if (A == 0)
        return out;

    const McRunConfig& cfg = options.run;
    const bool per_alpha = policy.depends_on_confidence();
    const std::size_t tasks = per_alpha ? S * A : S;

    parallel_for(tasks, cfg.threads, [&](std::size_t task) {
        const std::size_t i = per_alpha ? task / A : task;
        const std::size_t a_begin = per_alpha ? task % A : 0;
        const std::size_t a_end = per_alpha ? a_begin + 1 : A;
        const double x = grid->states()[i];
        const auto point = static_cast<std::uint64_t>(task);
        const CostSamples s = sample_costs(model, policy, spec.surface, options.with_j0 ? &spec : nullptr, x,
                                           out.alphas[a_begin], cfg, point);
        const std::span<const double> lattice(out.alphas.data() + a_begin, a_end - a_begin);

        const JitteredCvarSample w(s.max_surface, cfg.jitter_sigma, cfg.seed, rng_stream::jitter_w0, point);
        const auto w_se = w.bootstrap_standard_errors(lattice, cfg.bootstrap_resamples, cfg.seed, point);
        std::vector<double> j_se;
        std::unique_ptr<JitteredCvarSample> jsample;
        if (options.with_j0) {
            jsample = std::make_unique<JitteredCvarSample>(s.total_cost, options.j0_jitter_sigma, cfg.seed,
                                                           rng_stream::jitter_j0, point);
            j_se = jsample->bootstrap_standard_errors(lattice, cfg.bootstrap_resamples, cfg.seed ^ 0x5A5A5A5AULL,
                                                      point);
        }
        const double exit = static_cast<double>(s.exits) / static_cast<double>(cfg.samples);
        for (std::size_t a = a_begin; a < a_end; ++a) {
            const std::size_t idx = out.index(i, a);
            out.w0[idx] = w.estimate(out.alphas[a]);
            out.w0[idx].standard_error = w_se[a - a_begin];
            if (options.with_j0) {
                out.j0[idx] = jsample->estimate(out.alphas[a]);
                out.j0[idx].standard_error = j_se[a - a_begin];
            }
            out.exit_frequency[idx] = exit;
        }
    });
    return out;
}

void write_mc_csv(const std::filesystem::path& path, const McGridResult& result, bool j0) {
    if (j0 && result.j0.size() != result.w0.size())
        throw std::runtime_error("write_mc_csv: no J0* estimates to write");
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    csv::write_row(out, {"x", "alpha", "estimate", "stderr", "M", "sigma", "seed"});
    const auto& ests = j0 ? result.j0 : result.w0;
    const double sigma = j0 ? result.options.j0_jitter_sigma : result.options.run.jitter_sigma;
    for (std::size_t i = 0; i < result.grid->num_states(); ++i)
        for (std::size_t a = 0; a < result.alphas.size(); ++a) {
            const CvarEstimate& e = ests[result.index(i, a)];
            csv::write_row(out, {csv::format(result.grid->states()[i]), csv::format(result.alphas[a]),
                                 csv::format(e.value), csv::format(e.standard_error), std::to_string(e.sample_count),
                                 csv::format(sigma), std::to_string(result.options.run.seed)});
        }
}

std::vector<McCsvRow> read_mc_csv(const std::filesystem::path& path) {
    const csv::Table t = csv::read(path);
    const std::size_t cx = t.column("x"), ca = t.column("alpha"), ce = t.column("estimate"),
                      cs = t.column("stderr"), cm = t.column("M"), cg = t.column("sigma"), cd = t.column("seed");
    std::vector<McCsvRow> rows;
    rows.reserve(t.rows.size());
    for (const auto& r : t.rows)
        rows.push_back({csv::to_double(r[cx]), csv::to_double(r[ca]), csv::to_double(r[ce]), csv::to_double(r[cs]),
                        static_cast<std::size_t>(std::stoull(r[cm])), csv::to_double(r[cg]),
                        static_cast<std::uint64_t>(std::stoull(r[cd]))});
    return rows;
}

} // namespace cvar_reach
