#pragma once

#include "cvar_reach/envelope.hpp"
#include "cvar_reach/grid.hpp"
#include "cvar_reach/model.hpp"

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

namespace cvar_reach {

/// c(x) = beta * exp(m * g(x)).
struct StageCostSpec {
    double beta = 1e-3;
    double m = 10.0;
    SurfaceFunction surface = SurfaceFunction::linear_offset(5.0);

    void validate() const;
};

/// Exponents m * g(x) above this are clipped and counted as saturated.
inline constexpr double kExponentClip = 700.0;

double stage_cost(const StageCostSpec& spec, double x, bool* saturated = nullptr);

/// Greedy controls of one stage and, for the chosen control, the confidence
/// multipliers R(d_j) of every disturbance (row-major: grid point, then j).
struct PolicyStage {
    int stage = 0;
    std::vector<std::size_t> control;
    std::vector<double> multipliers;
};

class PolicyTable {
public:
    PolicyTable(std::shared_ptr<const AugmentedGrid> grid, std::vector<double> controls,
                std::size_t num_disturbances, int horizon);

    int horizon() const { return static_cast<int>(stages_.size()); }
    const AugmentedGrid& grid() const { return *grid_; }
    const std::shared_ptr<const AugmentedGrid>& grid_ptr() const { return grid_; }
    std::span<const double> controls() const { return controls_; }
    std::size_t num_disturbances() const { return num_disturbances_; }

    PolicyStage& stage(int k) { return stages_.at(static_cast<std::size_t>(k)); }
    const PolicyStage& stage(int k) const { return stages_.at(static_cast<std::size_t>(k)); }

    std::size_t control_index(int k, std::size_t state, std::size_t level) const;
    double control(int k, std::size_t state, std::size_t level) const;
    bool has_multipliers(int k) const;
    double multiplier(int k, std::size_t state, std::size_t level, std::size_t j) const;

private:
    std::shared_ptr<const AugmentedGrid> grid_;
    std::vector<double> controls_;
    std::size_t num_disturbances_;
    std::vector<PolicyStage> stages_;
};

struct StageDiagnostics {
    int stage = 0;
    double seconds = 0.0;
    std::size_t repaired_curves = 0;
    double max_repair = 0.0;
    std::size_t floor_active = 0;
    std::size_t saturated_costs = 0;
};

struct BackupOptions {
    unsigned threads = 0;
    bool record_multipliers = true;
    /// A later control displaces the incumbent only when it is lower by more
    /// than this relative margin, so exact and rounding-level ties keep the
    /// smaller control index.
    double tie_tolerance = 1e-12;
};

struct BackupResult {
    ValueTable values;
    PolicyStage policy;
    StageDiagnostics diagnostics;
};

/// J_N(x, y) = c(x).
ValueTable terminal_values(std::shared_ptr<const AugmentedGrid> grid, const StageCostSpec& spec, int horizon,
                           std::size_t* saturated = nullptr);

/// One step of J_k(x, y) = min_u { c(x) + max_{R in envelope(y)} E[R J_{k+1}(x', y R)] }
/// at every grid point. J_next is read-only; grid points are independent.
BackupResult bellman_backup(const SystemModel& model, const StageCostSpec& spec, const ValueTable& next, int k,
                            const BackupOptions& options = {});

struct ValueIterationResult {
    /// stages[k] holds J_k for k = 0..N.
    std::vector<ValueTable> stages;
    PolicyTable policy;
    std::vector<StageDiagnostics> diagnostics;

    const ValueTable& J0() const { return stages.front(); }
};

ValueIterationResult run_value_iteration(const SystemModel& model, std::shared_ptr<const AugmentedGrid> grid,
                                         const StageCostSpec& spec, int horizon,
                                         const BackupOptions& options = {});

struct AugmentedState {
    double x;
    double y;
};

struct ConfidenceRollout {
    std::vector<AugmentedState> states; // length = steps + 1
    std::vector<double> controls;       // length = steps
};

/// Rolls (x_k, y_k) forward along the given disturbance indices with
/// y_{k+1} = clamp(R(d_j) y_k, y_min, 1), reading controls and multipliers at
/// the grid point nearest to (x_k, y_k). Throws std::runtime_error naming the
/// grid point when a stage carries no multipliers.
ConfidenceRollout confidence_rollout(const PolicyTable& policy, const SystemModel& model, double x0, double alpha0,
                                     std::span<const std::size_t> disturbances);

// CSV interchange: J_stage<k>.csv (k,x,y,J), policy_stage<k>.csv (k,x,y,u),
// confidence_stage<k>.csv (k,x,y,j,d,R). Rows run over x ascending, then the
// confidence listing (descending).
void write_value_table_csv(const std::filesystem::path& path, const ValueTable& table);
void write_policy_csv(const std::filesystem::path& path, const PolicyTable& policy, int k);
void write_multipliers_csv(const std::filesystem::path& path, const PolicyTable& policy, int k,
                           std::span<const double> disturbance_values);

/// Reads a J table back onto `grid`; throws if any grid point is missing.
ValueTable read_value_table_csv(const std::filesystem::path& path, std::shared_ptr<const AugmentedGrid> grid);

/// Reads policy_stage<k>.csv and confidence_stage<k>.csv for k = 0..horizon-1 from `dir`.
PolicyTable read_policy_dir(const std::filesystem::path& dir, std::shared_ptr<const AugmentedGrid> grid,
                            std::vector<double> controls, std::size_t num_disturbances, int horizon);

} // namespace cvar_reach
