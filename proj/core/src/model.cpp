#include "cvar_reach/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace cvar_reach {

DisturbanceDistribution::DisturbanceDistribution(std::vector<double> values, std::vector<double> probs)
    : values_(std::move(values)), probs_(std::move(probs)) {
    if (values_.empty() || values_.size() != probs_.size())
        throw std::invalid_argument("disturbance: values and probs must be nonempty and of equal length");
    double total = 0.0;
    for (std::size_t j = 0; j < probs_.size(); ++j) {
        if (!(probs_[j] >= 0.0) || probs_[j] > 1.0)
            throw std::invalid_argument("disturbance: probability " + std::to_string(j) + " outside [0, 1]");
        if (j > 0 && !(values_[j] > values_[j - 1]))
            throw std::invalid_argument("disturbance: values must be strictly increasing");
        total += probs_[j];
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("disturbance: probabilities sum to " + std::to_string(total) + ", not 1");
    cdf_.resize(probs_.size());
    std::partial_sum(probs_.begin(), probs_.end(), cdf_.begin());
}

double DisturbanceDistribution::mean() const {
    return std::inner_product(values_.begin(), values_.end(), probs_.begin(), 0.0);
}

double DisturbanceDistribution::variance() const {
    const double mu = mean();
    double v = 0.0;
    for (std::size_t j = 0; j < values_.size(); ++j)
        v += probs_[j] * (values_[j] - mu) * (values_[j] - mu);
    return v;
}

std::size_t DisturbanceDistribution::sample_index(double u) const {
    // scale by the actual total so that rounding in the cdf never leaves a gap at the top
    const double target = u * cdf_.back();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), target);
    std::size_t j = std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
    while (probs_[j] == 0.0 && j > 0)
        --j;
    return j;
}

SurfaceFunction SurfaceFunction::linear_offset(double c_max) {
    SurfaceFunction g;
    g.kind_ = Kind::linear_offset;
    g.threshold_ = c_max;
    return g;
}

SurfaceFunction SurfaceFunction::indicator(double constraint_upper) {
    SurfaceFunction g;
    g.kind_ = Kind::indicator;
    g.threshold_ = constraint_upper;
    return g;
}

SurfaceFunction SurfaceFunction::tabulated(std::vector<double> xs, std::vector<double> gs) {
    if (xs.empty() || xs.size() != gs.size())
        throw std::invalid_argument("tabulated surface: xs and gs must be nonempty and of equal length");
    for (std::size_t i = 1; i < xs.size(); ++i)
        if (!(xs[i] > xs[i - 1]))
            throw std::invalid_argument("tabulated surface: xs must be strictly increasing");
    SurfaceFunction g;
    g.kind_ = Kind::tabulated;
    g.threshold_ = std::numeric_limits<double>::quiet_NaN();
    g.xs_ = std::move(xs);
    g.gs_ = std::move(gs);
    return g;
}

double SurfaceFunction::operator()(double x) const {
    switch (kind_) {
    case Kind::linear_offset:
        return x - threshold_;
    case Kind::indicator:
        return (x < threshold_ ? 0.0 : 1.0) - 0.5;
    case Kind::tabulated: {
        if (x <= xs_.front())
            return gs_.front();
        if (x >= xs_.back())
            return gs_.back();
        auto hi = static_cast<std::size_t>(std::upper_bound(xs_.begin(), xs_.end(), x) - xs_.begin());
        const std::size_t lo = hi - 1;
        const double w = (x - xs_[lo]) / (xs_[hi] - xs_[lo]);
        return (1.0 - w) * gs_[lo] + w * gs_[hi];
    }
    }
    return std::numeric_limits<double>::quiet_NaN();
}

void PondParams::validate() const {
    const auto positive = [](double v, const char* name) {
        if (!(v > 0.0))
            throw std::invalid_argument(std::string("pond: ") + name + " must be strictly positive");
    };
    positive(surface_area, "surface_area");
    positive(outlet_radius, "outlet_radius");
    positive(discharge_coeff, "discharge_coeff");
    positive(outlet_elevation, "outlet_elevation");
    positive(gravity, "gravity");
    positive(dt, "dt");
    positive(state_max, "state_max");
    if (horizon < 1)
        throw std::invalid_argument("pond: horizon must be >= 1");
    if (!(state_max > outlet_elevation))
        throw std::invalid_argument("pond: state_max must exceed outlet_elevation");
}

double pond_outflow(const PondParams& params, double x, double u) {
    if (x < 0.0)
        throw std::domain_error("pond_outflow: negative water level");
    if (u != 0.0 && u != 1.0)
        throw std::domain_error("pond_outflow: valve setting must be 0 or 1");
    if (x < params.outlet_elevation)
        return 0.0;
    const double r = params.outlet_radius;
    return params.discharge_coeff * std::numbers::pi * r * r * u *
           std::sqrt(2.0 * params.gravity * (x - params.outlet_elevation));
}

double pond_step(const PondParams& params, double x, double u, double w) {
    const double next = x + (params.dt / params.surface_area) * (w - pond_outflow(params, x, u));
    return std::min(next, params.state_max);
}

SystemModel::SystemModel(std::string name, std::vector<double> controls,
                         DisturbanceDistribution disturbance, TransitionFn transition,
                         StateBounds bounds)
    : name_(std::move(name)), controls_(std::move(controls)), disturbance_(std::move(disturbance)),
      transition_(std::move(transition)), bounds_(bounds) {
    if (controls_.empty())
        throw std::invalid_argument("model: control set must be nonempty");
    if (!transition_)
        throw std::invalid_argument("model: transition function missing");
    if (!(bounds_.hi >= bounds_.lo))
        throw std::invalid_argument("model: state bounds must satisfy lo <= hi");
}

double SystemModel::step(double x, double u, double w) const {
    return std::clamp(transition_(x, u, w), bounds_.lo, bounds_.hi);
}

DisturbanceDistribution pond_v1_disturbance() {
    return DisturbanceDistribution(
        {8.57, 9.47, 10.37, 11.26, 12.16, 13.06, 13.95, 14.85, 15.75, 16.65},
        {0.0236, 1e-4, 1e-4, 0.5249, 0.3272, 1e-4, 1e-4, 1e-4, 1e-4, 0.1237});
}

SystemModel make_pond_model(const PondParams& params, DisturbanceDistribution disturbance) {
    params.validate();
    auto transition = [params](double x, double u, double w) { return pond_step(params, x, u, w); };
    return SystemModel("pond", {1.0, 0.0}, std::move(disturbance), std::move(transition),
                       StateBounds{0.0, params.state_max});
}

SystemModel load_pond_benchmark() { return make_pond_model(PondParams{}, pond_v1_disturbance()); }

} // namespace cvar_reach
