#ifndef ADABON_DISTRIBUTIONS_HPP
#define ADABON_DISTRIBUTIONS_HPP

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace adabon {

/// Upper tail 1 - Phi(x) of the standard normal, via erfc so that it keeps
/// full relative accuracy far into the tail.
inline double normal_upper_tail(double x)
{
  return 0.5 * std::erfc(x / std::numbers::sqrt2);
}

inline double normal_cdf(double x)
{
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

/// Survival function of a chi-squared variable with an even number of
/// degrees of freedom 2*half_df:
///
///   Pr(X > x) = exp(-x/2) * sum_{i=0}^{half_df-1} (x/2)^i / i!
///
/// Each term is formed in log space so exp(-x/2) never underflows on its own.
inline double chi_squared_even_survival(double x, unsigned half_df)
{
  if (half_df == 0)
    throw std::domain_error("chi-squared degrees of freedom must be positive");
  if (std::isnan(x))
    throw std::domain_error("chi-squared statistic is NaN");
  if (x <= 0.0)
    return 1.0;
  if (std::isinf(x))
    return 0.0;

  const double h = 0.5 * x;
  const double log_h = std::log(h);
  double sum = 0.0;
  for (unsigned i = 0; i < half_df; ++i)
    sum += std::exp(-h + i * log_h - std::lgamma(i + 1.0));
  return sum < 1.0 ? sum : 1.0;
}

inline double chi_squared_even_cdf(double x, unsigned half_df)
{
  return 1.0 - chi_squared_even_survival(x, half_df);
}

} // namespace adabon

#endif // ADABON_DISTRIBUTIONS_HPP
