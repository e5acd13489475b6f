#include "weakprog/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>

#include "weakprog/error.hpp"

namespace weakprog::stats {

double normal_cdf(double z) { return boost::math::cdf(boost::math::normal_distribution<double>(), z); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("normal_quantile: probability must lie in (0,1)");
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double student_t_cdf(double t, double df) {
    if (!(df > 0.0)) throw DataError("student_t_cdf: degrees of freedom must be positive");
    if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
    return boost::math::cdf(boost::math::students_t_distribution<double>(df), t);
}

double student_t_two_sided(double t, double df) {
    if (!(df > 0.0)) throw DataError("student_t_two_sided: degrees of freedom must be positive");
    if (std::isinf(t)) return 0.0;
    const double p =
        2.0 * boost::math::cdf(boost::math::complement(boost::math::students_t_distribution<double>(df), std::abs(t)));
    return std::min(1.0, p);
}

double chi_square_sf(double x, double df) {
    if (x <= 0.0) return 1.0;
    return boost::math::cdf(boost::math::complement(boost::math::chi_squared_distribution<double>(df), x));
}

double binomial_cdf(std::uint64_t k, std::uint64_t n, double p) {
    if (k >= n) return 1.0;
    return boost::math::cdf(boost::math::binomial_distribution<double>(static_cast<double>(n), p),
                            static_cast<double>(k));
}

double mean(std::span<const double> v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

}  // namespace weakprog::stats
