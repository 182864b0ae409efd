#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace cvar_reach {

/// Finite disturbance law P[w = values[j]] = probs[j].
class DisturbanceDistribution {
public:
    /// Throws std::invalid_argument unless probs are nonnegative, sum to one
    /// within 1e-9, and values are strictly increasing.
    DisturbanceDistribution(std::vector<double> values, std::vector<double> probs);

    std::span<const double> values() const { return values_; }
    std::span<const double> probs() const { return probs_; }
    std::size_t size() const { return values_.size(); }

    double mean() const;
    double variance() const;

    /// Inverse-CDF lookup for u in [0, 1). Zero-probability atoms are never returned.
    std::size_t sample_index(double u) const;

private:
    std::vector<double> values_;
    std::vector<double> probs_;
    std::vector<double> cdf_;
};

/// Surface function g with x in K  <=>  g(x) < 0.
class SurfaceFunction {
public:
    enum class Kind { linear_offset, indicator, tabulated };

    /// g(x) = x - c_max, K = {x < c_max}.
    static SurfaceFunction linear_offset(double c_max);
    /// g(x) = 1_{not K}(x) - 1/2 with K = {x < constraint_upper}.
    static SurfaceFunction indicator(double constraint_upper);
    /// Piecewise-linear g through (xs[i], gs[i]), flat outside [xs.front(), xs.back()].
    /// Used for toy chains whose stage costs are arbitrary per state.
    static SurfaceFunction tabulated(std::vector<double> xs, std::vector<double> gs);

    double operator()(double x) const;
    bool in_constraint_set(double x) const { return (*this)(x) < 0.0; }

    Kind kind() const { return kind_; }
    /// c_max for linear_offset, constraint_upper for indicator, NaN otherwise.
    double threshold() const { return threshold_; }

private:
    SurfaceFunction() = default;

    Kind kind_ = Kind::linear_offset;
    double threshold_ = 0.0;
    std::vector<double> xs_;
    std::vector<double> gs_;
};

/// Retention pond constants. Units are feet, seconds and ft^3/s throughout.
struct PondParams {
    double surface_area = 28292.0;   // A, ft^2
    double outlet_radius = 1.0 / 3.0; // r, ft
    double discharge_coeff = 0.61;    // C_d
    double outlet_elevation = 1.0;    // E, ft
    double gravity = 32.2;            // eta, ft/s^2
    double dt = 300.0;                // s
    int horizon = 48;                 // N
    double state_max = 6.5;           // clamp ceiling, ft

    void validate() const;
};

/// Outlet discharge q_p(x, u). Throws std::domain_error for x < 0 or u outside {0, 1}.
double pond_outflow(const PondParams& params, double x, double u);

/// One pond step, clamped from above at state_max.
double pond_step(const PondParams& params, double x, double u, double w);

struct StateBounds {
    double lo;
    double hi;
};

/// f(x, u, w) before clamping.
using TransitionFn = std::function<double(double x, double u, double w)>;

/// Fully observed stochastic system x' = clamp(f(x, u, w), bounds), w i.i.d.
class SystemModel {
public:
    SystemModel(std::string name, std::vector<double> controls,
                DisturbanceDistribution disturbance, TransitionFn transition,
                StateBounds bounds);

    double step(double x, double u, double w) const;

    const std::string& name() const { return name_; }
    std::span<const double> controls() const { return controls_; }
    const DisturbanceDistribution& disturbance() const { return disturbance_; }
    StateBounds bounds() const { return bounds_; }

private:
    std::string name_;
    std::vector<double> controls_;
    DisturbanceDistribution disturbance_;
    TransitionFn transition_;
    StateBounds bounds_;
};

/// Runoff law of the "pond-v1" preset.
DisturbanceDistribution pond_v1_disturbance();

/// Pond system from explicit parameters. The control set is listed valve-open
/// first, {1, 0}, so that exact ties between the two settings resolve to an
/// open valve under smallest-index tie-breaking.
SystemModel make_pond_model(const PondParams& params, DisturbanceDistribution disturbance);

/// The "pond-v1" preset with default PondParams.
SystemModel load_pond_benchmark();

} // namespace cvar_reach
