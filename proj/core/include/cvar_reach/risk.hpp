#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cvar_reach {

/// Finite random cost Z with P[Z = outcomes[i]] = probs[i]. Outcomes may repeat.
class DiscreteRandomVariable {
public:
    /// Throws std::invalid_argument unless the lists have equal nonzero length,
    /// probs are nonnegative and sum to one within 1e-9.
    DiscreteRandomVariable(std::vector<double> outcomes, std::vector<double> probs);

    std::span<const double> outcomes() const { return outcomes_; }
    std::span<const double> probs() const { return probs_; }
    std::size_t size() const { return outcomes_.size(); }

    double mean() const;
    double max_outcome() const;
    double min_outcome() const;
    /// Total probability of the atoms equal to max_outcome().
    double max_outcome_mass() const;

private:
    std::vector<double> outcomes_;
    std::vector<double> probs_;
};

/// CVaR_alpha[Z] = min_t { t + E[(Z - t)^+] / alpha } by the sorted-tail closed
/// form: the worst outcomes are accumulated until their mass reaches alpha,
/// with the atom straddling the alpha boundary taken fractionally.
/// Throws std::domain_error unless 0 < alpha <= 1.
double cvar_exact(const DiscreteRandomVariable& z, double alpha);

/// Brute-force reference: min over t in t_grid of t + E[(Z - t)^+] / alpha.
/// Throws std::domain_error on an empty grid or alpha outside (0, 1].
double cvar_minimization_oracle(const DiscreteRandomVariable& z, double alpha,
                                std::span<const double> t_grid);

/// Evenly spaced t values from lo to hi inclusive.
std::vector<double> uniform_t_grid(double lo, double hi, double step);

struct CvarEstimate {
    double value = 0.0;
    double confidence_alpha = 1.0;
    std::size_t sample_count = 0;
    double jitter_sigma = 0.0;
    /// Bootstrap standard error; zero when no resamples were requested.
    double standard_error = 0.0;
    /// Largest |noise| added to any sample, which bounds how far jitter alone
    /// can move the estimate.
    double max_abs_jitter = 0.0;
};

/// Monte Carlo CVaR from cost samples, with the Gaussian jitter applied once at
/// construction so the same jittered sample serves every confidence level.
///
/// estimate(alpha) is the mean of the worst alpha M samples, with the sample
/// straddling the boundary weighted by the fractional remainder. For distinct
/// samples and integer alpha M this equals (1 / (alpha M)) * sum_i z_i 1{z_i >= Q},
/// Q the lower empirical (1 - alpha)-quantile.
class JitteredCvarSample {
public:
    /// `stream` and `point` select the jitter counters so that independent
    /// sample sets drawn under one seed stay uncorrelated.
    JitteredCvarSample(std::span<const double> samples, double sigma, std::uint64_t seed,
                       std::uint64_t stream, std::uint64_t point);

    CvarEstimate estimate(double alpha) const;

    /// Bootstrap standard errors of estimate(alpha) for every alpha, sharing
    /// the resamples across alphas. Deterministic in (seed, point).
    std::vector<double> bootstrap_standard_errors(std::span<const double> alphas,
                                                  std::size_t resamples, std::uint64_t seed,
                                                  std::uint64_t point) const;

    std::size_t size() const { return sorted_.size(); }
    double sigma() const { return sigma_; }
    double max_abs_jitter() const { return max_abs_jitter_; }
    std::span<const double> sorted_values() const { return sorted_; }

private:
    std::vector<double> sorted_;     // jittered samples, ascending
    std::vector<long double> suffix_; // suffix_[i] = sum of sorted_[i..]
    double sigma_;
    double max_abs_jitter_ = 0.0;
};

/// One-shot form of JitteredCvarSample::estimate without bootstrap.
/// Throws std::invalid_argument for empty samples or negative sigma.
CvarEstimate cvar_jittered_estimator(std::span<const double> samples, double alpha, double sigma,
                                     std::uint64_t rng_seed);

/// (1/m) log(sum_i exp(m y_i)) with max-subtraction. Throws std::domain_error
/// for m <= 0 or an empty vector.
double log_sum_exp_scaled(std::span<const double> y, double m);

} // namespace cvar_reach
