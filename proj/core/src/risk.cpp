#include "cvar_reach/risk.hpp"

#include "cvar_reach/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace cvar_reach {

DiscreteRandomVariable::DiscreteRandomVariable(std::vector<double> outcomes, std::vector<double> probs)
    : outcomes_(std::move(outcomes)), probs_(std::move(probs)) {
    if (outcomes_.empty() || outcomes_.size() != probs_.size())
        throw std::invalid_argument("random variable: outcomes and probs must be nonempty and of equal length");
    double total = 0.0;
    for (double p : probs_) {
        if (!(p >= 0.0))
            throw std::invalid_argument("random variable: negative probability");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("random variable: probabilities sum to " + std::to_string(total));
}

double DiscreteRandomVariable::mean() const {
    return std::inner_product(outcomes_.begin(), outcomes_.end(), probs_.begin(), 0.0);
}

double DiscreteRandomVariable::max_outcome() const {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < size(); ++i)
        if (probs_[i] > 0.0)
            m = std::max(m, outcomes_[i]);
    return m;
}

double DiscreteRandomVariable::min_outcome() const {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < size(); ++i)
        if (probs_[i] > 0.0)
            m = std::min(m, outcomes_[i]);
    return m;
}

double DiscreteRandomVariable::max_outcome_mass() const {
    const double top = max_outcome();
    double mass = 0.0;
    for (std::size_t i = 0; i < size(); ++i)
        if (outcomes_[i] == top)
            mass += probs_[i];
    return mass;
}

double cvar_exact(const DiscreteRandomVariable& z, double alpha) {
    if (!(alpha > 0.0) || alpha > 1.0)
        throw std::domain_error("cvar_exact: alpha must lie in (0, 1]");
    std::vector<std::size_t> order(z.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto outcomes = z.outcomes();
    const auto probs = z.probs();
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return outcomes[a] > outcomes[b]; });

    if (alpha == 1.0)
        return z.mean();

    // walk the upper tail until alpha worth of probability has been covered
    double remaining = alpha;
    double tail = 0.0;
    double last = outcomes[order.front()];
    for (std::size_t idx : order) {
        if (probs[idx] <= 0.0)
            continue;
        last = outcomes[idx];
        const double take = std::min(remaining, probs[idx]);
        tail += take * outcomes[idx];
        remaining -= take;
        if (remaining <= 0.0)
            break;
    }
    // rounding in the probabilities can leave a sliver uncovered; it belongs to the lowest atom reached
    if (remaining > 0.0)
        tail += remaining * last;
    return tail / alpha;
}

double cvar_minimization_oracle(const DiscreteRandomVariable& z, double alpha,
                                std::span<const double> t_grid) {
    if (t_grid.empty())
        throw std::domain_error("cvar_minimization_oracle: empty t grid");
    if (!(alpha > 0.0) || alpha > 1.0)
        throw std::domain_error("cvar_minimization_oracle: alpha must lie in (0, 1]");
    double best = std::numeric_limits<double>::infinity();
    for (double t : t_grid) {
        double excess = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i)
            excess += z.probs()[i] * std::max(z.outcomes()[i] - t, 0.0);
        best = std::min(best, t + excess / alpha);
    }
    return best;
}

std::vector<double> uniform_t_grid(double lo, double hi, double step) {
    if (!(step > 0.0) || !(hi >= lo))
        throw std::domain_error("uniform_t_grid: need step > 0 and hi >= lo");
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    std::vector<double> grid(n);
    for (std::size_t i = 0; i < n; ++i)
        grid[i] = lo + static_cast<double>(i) * step;
    if (grid.back() < hi)
        grid.push_back(hi);
    return grid;
}

namespace {

/// Tail mass alpha M in samples. Representation error such as 0.35 * 1e4 is
/// snapped to the nearest integer so that the boundary sample is not split.
long double tail_count(double alpha, std::size_t m) {
    const long double k = static_cast<long double>(alpha) * m;
    const long double r = std::round(k);
    return std::abs(k - r) <= 1e-9L * m ? r : k;
}

} // namespace

JitteredCvarSample::JitteredCvarSample(std::span<const double> samples, double sigma, std::uint64_t seed,
                                       std::uint64_t stream, std::uint64_t point)
    : sorted_(samples.begin(), samples.end()), sigma_(sigma) {
    if (sorted_.empty())
        throw std::invalid_argument("cvar estimator: no samples");
    if (!(sigma >= 0.0))
        throw std::invalid_argument("cvar estimator: sigma must be nonnegative");
    if (sigma > 0.0) {
        const CounterRng rng(seed);
        for (std::size_t i = 0; i < sorted_.size(); ++i) {
            const double noise = sigma * rng.normal(stream, point, i);
            max_abs_jitter_ = std::max(max_abs_jitter_, std::abs(noise));
            sorted_[i] += noise;
        }
    }
    std::sort(sorted_.begin(), sorted_.end());
    suffix_.assign(sorted_.size() + 1, 0.0L);
    for (std::size_t i = sorted_.size(); i-- > 0;)
        suffix_[i] = suffix_[i + 1] + static_cast<long double>(sorted_[i]);
}

CvarEstimate JitteredCvarSample::estimate(double alpha) const {
    if (!(alpha > 0.0) || alpha > 1.0)
        throw std::domain_error("cvar estimator: alpha must lie in (0, 1]");
    // The worst alpha M samples, the boundary sample taken fractionally. For
    // distinct samples and integer alpha M this is (1 / (alpha M)) sum_i z_i 1{z_i >= Q}
    // with Q the lower empirical (1 - alpha)-quantile; the fractional form also
    // handles ties, e.g. unjittered constant samples.
    const std::size_t m = sorted_.size();
    const long double k = tail_count(alpha, m);
    const auto whole = std::min(m, static_cast<std::size_t>(std::floor(k)));
    long double tail = suffix_[m - whole];
    if (whole < m)
        tail += (k - whole) * sorted_[m - whole - 1];

    CvarEstimate est;
    est.value = static_cast<double>(tail / k);
    est.confidence_alpha = alpha;
    est.sample_count = m;
    est.jitter_sigma = sigma_;
    est.max_abs_jitter = max_abs_jitter_;
    return est;
}

std::vector<double> JitteredCvarSample::bootstrap_standard_errors(std::span<const double> alphas,
                                                                  std::size_t resamples,
                                                                  std::uint64_t seed,
                                                                  std::uint64_t point) const {
    std::vector<double> out(alphas.size(), 0.0);
    if (resamples < 2 || alphas.empty())
        return out;
    const std::size_t m = sorted_.size();

    // group equal values so that the quantile rule sees ties exactly as estimate() does
    std::vector<std::size_t> group_of(m);
    std::vector<double> group_value;
    for (std::size_t i = 0; i < m; ++i) {
        if (i == 0 || sorted_[i] != sorted_[i - 1])
            group_value.push_back(sorted_[i]);
        group_of[i] = group_value.size() - 1;
    }
    const std::size_t groups = group_value.size();
    std::vector<long double> k(alphas.size());
    for (std::size_t a = 0; a < alphas.size(); ++a)
        k[a] = tail_count(alphas[a], m);

    std::vector<long double> sum(alphas.size(), 0.0L);
    std::vector<long double> sum_sq(alphas.size(), 0.0L);
    std::vector<std::size_t> count(groups);
    std::vector<std::size_t> below(groups + 1);
    std::vector<long double> tail(groups + 1);

    __extension__ using u128 = unsigned __int128;
    const CounterRng key(seed);
    for (std::size_t b = 0; b < resamples; ++b) {
        std::mt19937_64 gen(key.bits(rng_stream::bootstrap, point, b, 0));
        std::fill(count.begin(), count.end(), 0);
        for (std::size_t d = 0; d < m; ++d) {
            const auto pick = static_cast<std::size_t>(
                (static_cast<u128>(gen()) * m) >> 64);
            ++count[group_of[pick]];
        }
        below[0] = 0;
        for (std::size_t g = 0; g < groups; ++g)
            below[g + 1] = below[g] + count[g];
        tail[groups] = 0.0L;
        for (std::size_t g = groups; g-- > 0;)
            tail[g] = tail[g + 1] + static_cast<long double>(count[g]) * group_value[g];

        for (std::size_t a = 0; a < alphas.size(); ++a) {
            // group g straddles the tail boundary: below[g] <= m - k < below[g + 1]
            const long double cut = m - k[a];
            auto it = std::upper_bound(below.begin() + 1, below.begin() + static_cast<std::ptrdiff_t>(groups) + 1, cut,
                                       [](long double c, std::size_t v) { return c < static_cast<long double>(v); });
            const auto g = std::min(groups - 1, static_cast<std::size_t>(it - below.begin()) - 1);
            const long double above = static_cast<long double>(m - below[g + 1]);
            const long double v = (tail[g + 1] + (k[a] - above) * group_value[g]) / k[a];
            sum[a] += v;
            sum_sq[a] += v * v;
        }
    }
    const auto n = static_cast<long double>(resamples);
    for (std::size_t a = 0; a < alphas.size(); ++a) {
        const long double mean = sum[a] / n;
        const long double var = (sum_sq[a] - n * mean * mean) / (n - 1.0L);
        out[a] = var > 0.0L ? static_cast<double>(std::sqrt(var)) : 0.0;
    }
    return out;
}

CvarEstimate cvar_jittered_estimator(std::span<const double> samples, double alpha, double sigma,
                                     std::uint64_t rng_seed) {
    const JitteredCvarSample sample(samples, sigma, rng_seed, rng_stream::generic_jitter, 0);
    return sample.estimate(alpha);
}

double log_sum_exp_scaled(std::span<const double> y, double m) {
    if (!(m > 0.0))
        throw std::domain_error("log_sum_exp_scaled: m must be positive");
    if (y.empty())
        throw std::domain_error("log_sum_exp_scaled: empty vector");
    const double top = *std::max_element(y.begin(), y.end());
    double acc = 0.0;
    for (double v : y)
        acc += std::exp(m * (v - top));
    return top + std::log(acc) / m;
}

} // namespace cvar_reach
