#pragma once

#include <cstdint>
#include <span>

namespace weakprog::stats {

double normal_cdf(double z);
double normal_quantile(double p);
/// P(T <= t) for Student's t with `df` degrees of freedom (df may be fractional).
double student_t_cdf(double t, double df);
/// Two-sided tail probability 2 * P(T >= |t|).
double student_t_two_sided(double t, double df);
/// Upper tail of the chi-square distribution.
double chi_square_sf(double x, double df);
/// P(X <= k) for X ~ Binomial(n, p).
double binomial_cdf(std::uint64_t k, std::uint64_t n, double p);

double mean(std::span<const double> v);
/// Unbiased sample variance (n - 1 denominator); 0 for n < 2.
double sample_variance(std::span<const double> v);

}  // namespace weakprog::stats
