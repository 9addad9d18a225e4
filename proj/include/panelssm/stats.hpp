#ifndef PANELSSM_STATS_HPP
#define PANELSSM_STATS_HPP

#include <cmath>
#include <span>

namespace panelssm {

inline constexpr double kLogSqrt2Pi = 0.9189385332046727;

inline double norm_logpdf(double x, double mean, double sd) {
    const double z = (x - mean) / sd;
    return -kLogSqrt2Pi - std::log(sd) - 0.5 * z * z;
}

double mean(std::span<const double> v);

// Sample variance / standard deviation (n - 1 denominator).
double sample_variance(std::span<const double> v);
double sample_sd(std::span<const double> v);

// Standard normal quantile, Wichura's AS 241 rational approximation
// polished with one Halley step; accurate to full double precision.
double norm_quantile(double p);

// Quantile of the chi-square distribution with one degree of freedom.
double chisq1_quantile(double p);

}  // namespace panelssm

#endif
