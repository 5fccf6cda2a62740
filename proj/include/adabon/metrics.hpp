#ifndef ADABON_METRICS_HPP
#define ADABON_METRICS_HPP

#include <adabon/procedures.hpp>
#include <adabon/simulate.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace adabon {

namespace detail {

inline void check_shape(const RejectionResult& result, const TruthLabels& truth)
{
  for (std::size_t i : result.rejected)
    if (i >= truth.is_false_pc_null.size())
      throw std::invalid_argument("rejected index outside the labelled features");
}

} // namespace detail

/// Rejections whose PC null is true.
inline std::size_t false_discoveries(const RejectionResult& result, const TruthLabels& truth)
{
  detail::check_shape(result, truth);
  std::size_t v = 0;
  for (std::size_t i : result.rejected)
    v += truth.is_false_pc_null[i] ? 0 : 1;
  return v;
}

inline double tpr(const RejectionResult& result, const TruthLabels& truth)
{
  const std::size_t found = result.rejected.size() - false_discoveries(result, truth);
  const std::size_t total = truth.false_count();
  return static_cast<double>(found) / static_cast<double>(total > 0 ? total : 1);
}

inline double false_discovery_proportion(const RejectionResult& result, const TruthLabels& truth)
{
  const std::size_t r = result.rejected.size();
  return static_cast<double>(false_discoveries(result, truth)) /
         static_cast<double>(r > 0 ? r : 1);
}

/// Share of true PC nulls among features with F_i < t; 0 when nothing survives.
inline double post_filter_null_proportion(std::span<const double> f, double t,
                                          const TruthLabels& truth)
{
  if (f.size() != truth.is_false_pc_null.size())
    throw std::invalid_argument("filtering scores and labels differ in length");
  std::size_t survivors = 0;
  std::size_t nulls = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f[i] < t) {
      ++survivors;
      nulls += truth.is_false_pc_null[i] ? 0 : 1;
    }
  }
  return survivors == 0 ? 0.0 : static_cast<double>(nulls) / static_cast<double>(survivors);
}

/// What one replicate contributes to the error and power estimates.
struct ReplicateSummary {
  std::size_t false_discoveries = 0;
  std::size_t rejections = 0;
  double tpr = 0.0;
  double fdp = 0.0;
  std::optional<double> pi0_at_threshold;
};

inline ReplicateSummary summarize(const RejectionResult& result, const TruthLabels& truth,
                                  std::optional<std::span<const double>> filter = std::nullopt)
{
  ReplicateSummary s;
  s.false_discoveries = false_discoveries(result, truth);
  s.rejections = result.rejected.size();
  s.tpr = tpr(result, truth);
  s.fdp = false_discovery_proportion(result, truth);
  if (filter)
    s.pi0_at_threshold = post_filter_null_proportion(*filter, result.threshold, truth);
  return s;
}

struct MetricsRecord {
  Method method = Method::adafilter_adabon;
  unsigned u = 2;
  unsigned k = 1;
  double alpha = 0.05;
  double pi1 = 0.0;
  double rho = 0.0;
  double theta = 0.5;
  double gamma = 0.1;
  std::size_t reps = 0;

  double kfwer = 0.0;
  double kfwer_se = 0.0;
  double tpr = 0.0;
  double tpr_se = 0.0;
  double fdx = 0.0;
  double fdx_se = 0.0;
  double fdr = 0.0;
  double fdr_se = 0.0;
  std::optional<double> mean_pi0;
  std::optional<double> mean_pi0_se;
};

/// Order-sensitive running totals; feed replicates in index order for
/// bit-identical output.
class MetricsAccumulator {
public:
  MetricsAccumulator(unsigned k, double gamma) : k_(k), gamma_(gamma) {}

  void add(const ReplicateSummary& s)
  {
    ++reps_;
    kfwer_hits_ += s.false_discoveries >= k_ ? 1 : 0;
    fdx_hits_ += s.fdp >= gamma_ ? 1 : 0;
    tpr_.add(s.tpr);
    fdp_.add(s.fdp);
    if (s.pi0_at_threshold)
      pi0_.add(*s.pi0_at_threshold);
  }

  std::size_t reps() const noexcept { return reps_; }

  /// Fills the rate fields of `record`, leaving its setting fields untouched.
  MetricsRecord finish(MetricsRecord record) const
  {
    record.reps = reps_;
    record.k = k_;
    record.gamma = gamma_;
    if (reps_ == 0)
      return record;
    record.kfwer = proportion(kfwer_hits_);
    record.kfwer_se = binomial_se(record.kfwer);
    record.fdx = proportion(fdx_hits_);
    record.fdx_se = binomial_se(record.fdx);
    record.tpr = tpr_.mean();
    record.tpr_se = tpr_.se();
    record.fdr = fdp_.mean();
    record.fdr_se = fdp_.se();
    if (pi0_.count > 0) {
      record.mean_pi0 = pi0_.mean();
      record.mean_pi0_se = pi0_.se();
    }
    return record;
  }

private:
  struct Moments {
    std::size_t count = 0;
    double sum = 0.0;
    double sum_sq = 0.0;

    void add(double x)
    {
      ++count;
      sum += x;
      sum_sq += x * x;
    }
    double mean() const { return sum / static_cast<double>(count); }
    double se() const
    {
      if (count < 2)
        return 0.0;
      const double c = static_cast<double>(count);
      const double var = std::max(0.0, (sum_sq - sum * sum / c) / (c - 1.0));
      return std::sqrt(var / c);
    }
  };

  double proportion(std::size_t hits) const
  {
    return static_cast<double>(hits) / static_cast<double>(reps_);
  }
  double binomial_se(double p) const
  {
    return std::sqrt(p * (1.0 - p) / static_cast<double>(reps_));
  }

  unsigned k_;
  double gamma_;
  std::size_t reps_ = 0;
  std::size_t kfwer_hits_ = 0;
  std::size_t fdx_hits_ = 0;
  Moments tpr_;
  Moments fdp_;
  Moments pi0_;
};

/// Aggregates paired result/label streams. `filters`, when non-empty,
/// supplies each replicate's F scores for the post-filter null proportion.
inline MetricsRecord aggregate(std::span<const RejectionResult> results,
                               std::span<const TruthLabels> truths, unsigned k, double gamma,
                               std::span<const std::vector<double>> filters = {})
{
  if (results.size() != truths.size())
    throw std::invalid_argument("result and label streams differ in length");
  if (!filters.empty() && filters.size() != results.size())
    throw std::invalid_argument("filter stream length differs from result stream");
  MetricsAccumulator acc(k, gamma);
  for (std::size_t r = 0; r < results.size(); ++r) {
    std::optional<std::span<const double>> f;
    if (!filters.empty())
      f = std::span<const double>(filters[r]);
    acc.add(summarize(results[r], truths[r], f));
  }
  MetricsRecord record;
  if (!results.empty())
    record.method = results.front().method;
  return acc.finish(record);
}

} // namespace adabon

#endif // ADABON_METRICS_HPP
