#pragma once

#include "cvar_reach/grid.hpp"
#include "cvar_reach/model.hpp"
#include "cvar_reach/risk.hpp"
#include "cvar_reach/rng.hpp"
#include "cvar_reach/value_iteration.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

namespace cvar_reach {

/// Policy used to generate Monte Carlo trajectories.
class RolloutPolicy {
public:
    enum class Kind { fixed_control, table };

    static RolloutPolicy fixed_control(double u);
    /// Greedy controls looked up at the nearest (x, y) grid point, with y
    /// carried along by the stored confidence multipliers.
    static RolloutPolicy table(std::shared_ptr<const PolicyTable> policy);

    Kind kind() const { return kind_; }
    double fixed() const { return fixed_; }
    const PolicyTable* policy_table() const { return table_.get(); }
    bool depends_on_confidence() const { return kind_ == Kind::table; }

    /// Throws std::invalid_argument if the policy cannot drive `model` for `horizon` steps.
    void check_compatible(const SystemModel& model, int horizon) const;

private:
    Kind kind_ = Kind::fixed_control;
    double fixed_ = 0.0;
    std::shared_ptr<const PolicyTable> table_;
};

struct McRunConfig {
    std::size_t samples = 100000;
    double jitter_sigma = 1e-12;
    std::uint64_t seed = 20190710;
    int horizon = 48;
    std::size_t bootstrap_resamples = 200;
    unsigned threads = 0;
};

/// Counter coordinates of one trajectory: disturbance k of sample `sample`
/// at grid point `point` is drawn from counter (point, sample, k).
struct TrajectoryStream {
    CounterRng rng;
    std::uint64_t point = 0;
    std::uint64_t sample = 0;
};

/// (x_0, ..., x_N) under i.i.d. disturbances and the given policy.
std::vector<double> simulate_trajectory(const SystemModel& model, const RolloutPolicy& policy, double x0,
                                        double alpha0, int horizon, const TrajectoryStream& stream);

/// Per-trajectory costs of M rollouts from one initial condition.
struct CostSamples {
    std::vector<double> max_surface; // max_k g(x_k)
    std::vector<double> total_cost;  // sum_k c(x_k); empty unless a cost spec was given
    std::size_t exits = 0;           // trajectories with max_k g(x_k) >= 0
};

CostSamples sample_costs(const SystemModel& model, const RolloutPolicy& policy, const SurfaceFunction& surface,
                         const StageCostSpec* cost, double x0, double alpha0, const McRunConfig& cfg,
                         std::uint64_t point);

/// CVaR_alpha of max_k g(x_k) with jitter cfg.jitter_sigma and a bootstrap standard error.
CvarEstimate estimate_W0(const SystemModel& model, const RolloutPolicy& policy, const SurfaceFunction& surface,
                         double x, double alpha, const McRunConfig& cfg, std::uint64_t point = 0);

/// CVaR_alpha of sum_k beta exp(m g(x_k)) with jitter cfg.jitter_sigma and a bootstrap standard error.
CvarEstimate estimate_J0star(const SystemModel& model, const RolloutPolicy& policy, const StageCostSpec& spec,
                             double x, double alpha, const McRunConfig& cfg, std::uint64_t point = 0);

struct McGridOptions {
    McRunConfig run;            // run.jitter_sigma applies to W0
    double j0_jitter_sigma = 1e-7;
    bool with_j0 = true;
};

/// W0 and J0* estimates for every state of the grid at every alpha of a lattice.
struct McGridResult {
    std::shared_ptr<const AugmentedGrid> grid;
    std::vector<double> alphas;
    std::vector<CvarEstimate> w0; // [state * alphas.size() + a]
    std::vector<CvarEstimate> j0; // same layout; empty when with_j0 is false
    std::vector<double> exit_frequency;
    McGridOptions options;

    std::size_t index(std::size_t state, std::size_t a) const { return state * alphas.size() + a; }
    double exit_standard_error(std::size_t state, std::size_t a) const;
};

/// Samples are shared across alphas whenever the policy ignores the
/// confidence level, so per-state estimates are exactly monotone in alpha.
McGridResult estimate_grid(const SystemModel& model, const RolloutPolicy& policy, const StageCostSpec& spec,
                           std::shared_ptr<const AugmentedGrid> grid, std::vector<double> alphas,
                           const McGridOptions& options);

/// Columns x, alpha, estimate, stderr, M, sigma, seed.
void write_mc_csv(const std::filesystem::path& path, const McGridResult& result, bool j0);

struct McCsvRow {
    double x;
    double alpha;
    double estimate;
    double standard_error;
    std::size_t samples;
    double sigma;
    std::uint64_t seed;
};
std::vector<McCsvRow> read_mc_csv(const std::filesystem::path& path);

} // namespace cvar_reach
