#ifndef ADABON_COMBINER_HPP
#define ADABON_COMBINER_HPP

#include <adabon/distributions.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace adabon {

/// Per-feature, per-study p-values. Rows are features (m), columns are
/// studies (n). Shape is fixed at construction.
class PValueMatrix {
public:
  PValueMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), values_(std::move(values))
  {
    if (rows_ < 1)
      throw std::invalid_argument("p-value matrix needs at least one feature");
    if (cols_ < 2)
      throw std::invalid_argument("p-value matrix needs at least two studies");
    if (values_.size() != rows_ * cols_)
      throw std::invalid_argument("p-value matrix data does not match its shape");
    for (std::size_t i = 0; i < values_.size(); ++i) {
      const double p = values_[i];
      if (!(p >= 0.0 && p <= 1.0))
        throw std::domain_error("p-value outside [0,1] at feature " +
                                std::to_string(i / cols_ + 1) + ", study " +
                                std::to_string(i % cols_ + 1));
    }
  }

  std::size_t features() const noexcept { return rows_; }
  std::size_t studies() const noexcept { return cols_; }

  std::span<const double> row(std::size_t i) const
  {
    return {values_.data() + i * cols_, cols_};
  }

  double operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }

  std::span<const double> data() const noexcept { return values_; }

private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> values_;
};

/// Parameters shared by every rejection procedure.
struct ProcedureContext {
  unsigned u = 2;      ///< replicability level
  unsigned k = 1;      ///< k-FWER tolerance
  double alpha = 0.05; ///< target level
  double theta = 0.5;  ///< null-proportion estimator tuning
  double gamma = 0.1;  ///< exceedance tolerance for FDX augmentation

  void validate() const
  {
    if (u < 2)
      throw std::domain_error("replicability level u must be at least 2");
    if (k < 1)
      throw std::domain_error("tolerance k must be at least 1");
    if (!(alpha > 0.0 && alpha <= 1.0))
      throw std::domain_error("alpha must lie in (0, 1]");
    if (!(theta > 0.0 && theta < 1.0))
      throw std::domain_error("theta must lie in (0, 1)");
    if (!(gamma > 0.0 && gamma < 1.0))
      throw std::domain_error("gamma must lie in (0, 1)");
  }

  void validate(std::size_t studies) const
  {
    validate();
    if (u > studies)
      throw std::domain_error("replicability level u=" + std::to_string(u) +
                              " exceeds the number of studies n=" +
                              std::to_string(studies));
  }

  double k_alpha() const noexcept { return k * alpha; }
};

/// Combined PC p-values S and filtering p-values F, one pair per feature.
struct PairedScores {
  std::vector<double> s;
  std::vector<double> f;

  std::size_t size() const noexcept { return s.size(); }

  void validate() const
  {
    if (s.size() != f.size())
      throw std::invalid_argument("paired scores have mismatched lengths");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!(s[i] >= 0.0 && s[i] <= 1.0) || !(f[i] >= 0.0 && f[i] <= 1.0))
        throw std::domain_error("paired score outside [0,1] at feature " +
                                std::to_string(i + 1));
      if (f[i] > s[i])
        throw std::domain_error("filtering p-value exceeds PC p-value at feature " +
                                std::to_string(i + 1));
    }
  }
};

namespace detail {

inline void check_unit_interval(std::span<const double> row)
{
  for (double p : row)
    if (!(p >= 0.0 && p <= 1.0))
      throw std::domain_error("p-value outside [0,1]");
}

inline void check_level(std::size_t n, unsigned u, unsigned lowest)
{
  if (u < lowest || u > n)
    throw std::domain_error("order statistic index u=" + std::to_string(u) +
                            " outside [" + std::to_string(lowest) + ", " +
                            std::to_string(n) + "]");
}

inline double clamp_unit(double x) { return x < 1.0 ? x : 1.0; }

} // namespace detail

inline std::vector<double> order_statistics(std::span<const double> row)
{
  detail::check_unit_interval(row);
  std::vector<double> sorted(row.begin(), row.end());
  std::sort(sorted.begin(), sorted.end());
  return sorted;
}

/// min(1, (n - u + 1) * P_(u)). Accepts u = 1 so it can also serve as the
/// filtering combiner one level down.
inline double combine_bonferroni(std::span<const double> row, unsigned u)
{
  detail::check_level(row.size(), u, 1);
  const auto sorted = order_statistics(row);
  const double scale = static_cast<double>(row.size() - u + 1);
  return detail::clamp_unit(scale * sorted[u - 1]);
}

struct FisherCombination {
  double value = 1.0;
  /// A zero p-value entered the statistic, which is then +infinity.
  bool infinite_statistic = false;
};

/// Fisher-combined PC p-value 1 - W(-2 sum_{j>=u} log P_(j)), W the
/// chi-squared cdf with 2(n - u + 1) degrees of freedom.
inline FisherCombination fisher_combination(std::span<const double> row, unsigned u)
{
  detail::check_level(row.size(), u, 2);
  const auto sorted = order_statistics(row);
  if (sorted[u - 1] == 0.0)
    return {0.0, true};

  double log_sum = 0.0;
  for (std::size_t j = u - 1; j < sorted.size(); ++j)
    log_sum += std::log(sorted[j]);
  const auto half_df = static_cast<unsigned>(row.size() - u + 1);
  return {chi_squared_even_survival(-2.0 * log_sum, half_df), false};
}

inline double combine_fisher(std::span<const double> row, unsigned u)
{
  return fisher_combination(row, u).value;
}

/// S_i = min(1, (n-u+1) P_(u)) and F_i = min(1, (n-u+1) P_(u-1)) per feature.
inline PairedScores build_paired_scores(const PValueMatrix& matrix, unsigned u)
{
  const std::size_t n = matrix.studies();
  detail::check_level(n, u, 2);
  const double scale = static_cast<double>(n - u + 1);

  PairedScores scores;
  scores.s.resize(matrix.features());
  scores.f.resize(matrix.features());
  std::vector<double> sorted(n);
  for (std::size_t i = 0; i < matrix.features(); ++i) {
    const auto row = matrix.row(i);
    std::copy(row.begin(), row.end(), sorted.begin());
    // only P_(u-1) and P_(u) are needed
    std::nth_element(sorted.begin(), sorted.begin() + (u - 1), sorted.end());
    const double upper = sorted[u - 1];
    const double lower = *std::max_element(sorted.begin(), sorted.begin() + (u - 1));
    scores.s[i] = detail::clamp_unit(scale * upper);
    scores.f[i] = detail::clamp_unit(scale * lower);
  }
  return scores;
}

struct FisherColumn {
  std::vector<double> values;
  std::size_t infinite_statistics = 0;
};

inline FisherColumn combine_fisher_rows(const PValueMatrix& matrix, unsigned u)
{
  FisherColumn out;
  out.values.reserve(matrix.features());
  for (std::size_t i = 0; i < matrix.features(); ++i) {
    const auto c = fisher_combination(matrix.row(i), u);
    out.values.push_back(c.value);
    out.infinite_statistics += c.infinite_statistic ? 1 : 0;
  }
  return out;
}

inline std::vector<double> combine_bonferroni_rows(const PValueMatrix& matrix, unsigned u)
{
  std::vector<double> out;
  out.reserve(matrix.features());
  for (std::size_t i = 0; i < matrix.features(); ++i)
    out.push_back(combine_bonferroni(matrix.row(i), u));
  return out;
}

} // namespace adabon

#endif // ADABON_COMBINER_HPP
