#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace cvar_reach {

/// The DP mesh G_s x G_c. Confidence levels are held ascending internally;
/// confidence_listing() gives them in the descending order they are usually
/// quoted in (0.999 first).
class AugmentedGrid {
public:
    /// Throws std::invalid_argument unless both lists have >= 2 entries, the
    /// states are strictly increasing and the levels are distinct and in (0, 1].
    AugmentedGrid(std::vector<double> states, std::vector<double> confidence_levels);

    /// G_s = {0, 0.1, ..., 6.5}, G_c = {0.999, 0.95, 0.80, 0.65, 0.5, 0.35, 0.20, 0.05, 0.001}.
    static AugmentedGrid pond_default();

    /// lo, lo + step, ..., hi with each point rounded to the nearest 1e-9 so
    /// that e.g. 0.3 is the double closest to 0.3.
    static std::vector<double> uniform_states(double lo, double hi, double step);
    static std::vector<double> pond_confidence_levels();

    std::span<const double> states() const { return states_; }
    std::span<const double> levels() const { return levels_; }
    std::vector<double> confidence_listing() const;

    std::size_t num_states() const { return states_.size(); }
    std::size_t num_levels() const { return levels_.size(); }
    std::size_t size() const { return states_.size() * levels_.size(); }
    std::size_t flat(std::size_t state, std::size_t level) const { return state * levels_.size() + level; }

    double y_min() const { return levels_.front(); }
    double y_max() const { return levels_.back(); }
    double clamp_state(double x) const;

    /// Index of the level equal to alpha within 1e-12, if any.
    std::optional<std::size_t> level_index(double alpha) const;
    std::size_t nearest_state(double x) const;
    std::size_t nearest_level(double y) const;

    /// Bracketing pair for x after clamping: x = (1 - weight) * states[lo] + weight * states[lo + 1].
    struct Bracket {
        std::size_t lo;
        double weight;
    };
    Bracket bracket(double x) const;

private:
    std::vector<double> states_;
    std::vector<double> levels_;
};

/// J_k on the grid, stored state-major with ascending levels.
class ValueTable {
public:
    ValueTable(std::shared_ptr<const AugmentedGrid> grid, int stage);

    int stage() const { return stage_; }
    const AugmentedGrid& grid() const { return *grid_; }
    const std::shared_ptr<const AugmentedGrid>& grid_ptr() const { return grid_; }

    double at(std::size_t state, std::size_t level) const { return values_[grid_->flat(state, level)]; }
    double& at(std::size_t state, std::size_t level) { return values_[grid_->flat(state, level)]; }
    std::span<const double> values() const { return values_; }

private:
    std::shared_ptr<const AugmentedGrid> grid_;
    int stage_;
    std::vector<double> values_;
};

/// Two-point linear interpolation of J(., level) in the state, clamped to the grid ends.
double interpolate_state_value(const ValueTable& table, double x, std::size_t level);

} // namespace cvar_reach
