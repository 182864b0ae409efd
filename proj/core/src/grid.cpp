#include "cvar_reach/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cvar_reach {

AugmentedGrid::AugmentedGrid(std::vector<double> states, std::vector<double> confidence_levels)
    : states_(std::move(states)), levels_(std::move(confidence_levels)) {
    if (states_.size() < 2 || levels_.size() < 2)
        throw std::invalid_argument("grid: need at least two states and two confidence levels");
    for (std::size_t i = 1; i < states_.size(); ++i)
        if (!(states_[i] > states_[i - 1]))
            throw std::invalid_argument("grid: states must be strictly increasing");
    std::sort(levels_.begin(), levels_.end());
    for (std::size_t c = 0; c < levels_.size(); ++c) {
        if (!(levels_[c] > 0.0) || levels_[c] > 1.0)
            throw std::invalid_argument("grid: confidence levels must lie in (0, 1]");
        if (c > 0 && !(levels_[c] > levels_[c - 1]))
            throw std::invalid_argument("grid: duplicate confidence level");
    }
}

AugmentedGrid AugmentedGrid::pond_default() {
    return AugmentedGrid(uniform_states(0.0, 6.5, 0.1), pond_confidence_levels());
}

std::vector<double> AugmentedGrid::uniform_states(double lo, double hi, double step) {
    if (!(step > 0.0) || !(hi > lo))
        throw std::invalid_argument("grid: need hi > lo and step > 0");
    const auto n = static_cast<std::size_t>(std::llround((hi - lo) / step)) + 1;
    std::vector<double> xs(n);
    for (std::size_t i = 0; i < n; ++i)
        xs[i] = std::round((lo + static_cast<double>(i) * step) * 1e9) / 1e9;
    return xs;
}

std::vector<double> AugmentedGrid::pond_confidence_levels() {
    return {0.999, 0.95, 0.80, 0.65, 0.5, 0.35, 0.20, 0.05, 0.001};
}

std::vector<double> AugmentedGrid::confidence_listing() const { return {levels_.rbegin(), levels_.rend()}; }

double AugmentedGrid::clamp_state(double x) const { return std::clamp(x, states_.front(), states_.back()); }

std::optional<std::size_t> AugmentedGrid::level_index(double alpha) const {
    for (std::size_t c = 0; c < levels_.size(); ++c)
        if (std::abs(levels_[c] - alpha) <= 1e-12)
            return c;
    return std::nullopt;
}

namespace {

std::size_t nearest_in(std::span<const double> sorted, double v) {
    auto it = std::lower_bound(sorted.begin(), sorted.end(), v);
    if (it == sorted.begin())
        return 0;
    if (it == sorted.end())
        return sorted.size() - 1;
    const auto hi = static_cast<std::size_t>(it - sorted.begin());
    return (v - sorted[hi - 1] <= sorted[hi] - v) ? hi - 1 : hi;
}

} // namespace

std::size_t AugmentedGrid::nearest_state(double x) const { return nearest_in(states_, x); }

std::size_t AugmentedGrid::nearest_level(double y) const { return nearest_in(levels_, y); }

AugmentedGrid::Bracket AugmentedGrid::bracket(double x) const {
    x = clamp_state(x);
    auto it = std::upper_bound(states_.begin(), states_.end(), x);
    std::size_t hi = static_cast<std::size_t>(it - states_.begin());
    if (hi >= states_.size())
        return {states_.size() - 2, 1.0};
    const std::size_t lo = hi - 1;
    return {lo, (x - states_[lo]) / (states_[hi] - states_[lo])};
}

ValueTable::ValueTable(std::shared_ptr<const AugmentedGrid> grid, int stage)
    : grid_(std::move(grid)), stage_(stage), values_(grid_->size(), 0.0) {}

double interpolate_state_value(const ValueTable& table, double x, std::size_t level) {
    const auto& grid = table.grid();
    const auto [lo, w] = grid.bracket(x);
    if (w == 0.0)
        return table.at(lo, level);
    if (w == 1.0)
        return table.at(lo + 1, level);
    const double x_lo = grid.states()[lo];
    const double x_hi = grid.states()[lo + 1];
    const double xc = grid.clamp_state(x);
    return ((xc - x_lo) * table.at(lo + 1, level) + (x_hi - xc) * table.at(lo, level)) / (x_hi - x_lo);
}

} // namespace cvar_reach
