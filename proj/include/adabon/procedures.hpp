#ifndef ADABON_PROCEDURES_HPP
#define ADABON_PROCEDURES_HPP

#include <adabon/combiner.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace adabon {

/// Requested combination of procedure and parameters is not defined
/// (e.g. an FWER-only baseline asked to control k-FWER with k > 1).
class unsupported_configuration : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// The post-filter null proportion estimate has no survivors to average over.
class undefined_estimate : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

enum class Method {
  bonferroni,
  hochberg,
  adaptive_bonferroni,
  adaptive_hochberg,
  adafilter_bon,
  adafilter_adabon,
  adafilter_adabon_fdx,
};

inline constexpr Method all_methods[] = {
    Method::adafilter_adabon,    Method::adafilter_bon,     Method::bonferroni,
    Method::hochberg,            Method::adaptive_bonferroni, Method::adaptive_hochberg,
    Method::adafilter_adabon_fdx,
};

inline std::string_view method_name(Method m)
{
  switch (m) {
  case Method::bonferroni: return "bonferroni";
  case Method::hochberg: return "hochberg";
  case Method::adaptive_bonferroni: return "adaptive-bonferroni";
  case Method::adaptive_hochberg: return "adaptive-hochberg";
  case Method::adafilter_bon: return "adafilter-bon";
  case Method::adafilter_adabon: return "adafilter-adabon";
  case Method::adafilter_adabon_fdx: return "adafilter-adabon-fdx";
  }
  return "unknown";
}

inline std::optional<Method> parse_method(std::string_view name)
{
  for (Method m : all_methods)
    if (method_name(m) == name)
      return m;
  return std::nullopt;
}

/// AdaFilter methods threshold the Bonferroni-combined S against a
/// data-driven cut; the rest are single-column baselines.
inline bool is_adafilter(Method m)
{
  return m == Method::adafilter_bon || m == Method::adafilter_adabon ||
         m == Method::adafilter_adabon_fdx;
}

/// Only defined for FWER (k = 1).
inline bool is_fwer_only(Method m)
{
  return m == Method::adaptive_bonferroni || m == Method::adaptive_hochberg;
}

struct Diagnostics {
  std::optional<double> pi0_hat;
  std::optional<std::size_t> survivors;
  std::optional<double> surrogate_threshold; ///< grid-max threshold, AdaBon only
  std::optional<double> adabon_threshold;    ///< t_theta feeding the FDX augmentation
  std::optional<double> null_count;          ///< adaptive baselines' null-count estimate

  friend bool operator==(const Diagnostics&, const Diagnostics&) = default;
};

struct RejectionResult {
  Method method = Method::bonferroni;
  double threshold = 0.0;
  std::vector<std::size_t> rejected; ///< 0-based, ascending
  Diagnostics diagnostics;

  friend bool operator==(const RejectionResult&, const RejectionResult&) = default;
};

struct Pi0Estimate {
  double t = 0.0;
  double theta = 0.5;
  double value = 0.0;
  std::size_t survivors = 0;
};

namespace detail {

inline std::vector<double> sorted_copy(std::span<const double> v)
{
  std::vector<double> out(v.begin(), v.end());
  std::sort(out.begin(), out.end());
  return out;
}

/// #{x < t} for a non-decreasing sequence of queries t.
class MonotoneCounter {
public:
  explicit MonotoneCounter(std::span<const double> sorted) : sorted_(sorted) {}

  std::size_t below(double t)
  {
    while (pos_ < sorted_.size() && sorted_[pos_] < t)
      ++pos_;
    return pos_;
  }

private:
  std::span<const double> sorted_;
  std::size_t pos_ = 0;
};

template <class Pred>
std::vector<std::size_t> indices_where(std::size_t m, Pred pred)
{
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < m; ++i)
    if (pred(i))
      out.push_back(i);
  return out;
}

/// Cursor over a sorted, distinct grid held in memory.
class SpanGrid {
public:
  explicit SpanGrid(std::span<const double> grid) : grid_(grid) {}

  bool next(double& x)
  {
    if (pos_ == grid_.size())
      return false;
    x = grid_[pos_++];
    return true;
  }

private:
  std::span<const double> grid_;
  std::size_t pos_ = 0;
};

/// Supremum of { t in [0, last grid point] : ok(t, count(t)) } where count is
/// a left-continuous step function whose jumps all lie on the grid. `grid`
/// yields distinct points in increasing order starting at 0. On each piece
/// (a, b] the count is constant except possibly at b itself, and ok(., c) is
/// a down-set in t with analytic boundary root(c).
///
/// `end_count` and `mid_count` must be separate stateful counters: each is
/// queried with non-decreasing arguments.
template <class Grid, class EndCount, class MidCount, class Ok, class Root>
double piecewise_supremum(Grid grid, EndCount end_count, MidCount mid_count, Ok ok, Root root)
{
  double best = 0.0;
  double a = 0.0;
  if (!grid.next(a))
    return best;
  for (double b = 0.0; grid.next(b); a = b) {
    if (ok(b, end_count(b))) {
      best = b;
      continue;
    }
    const double mid = a + 0.5 * (b - a);
    if (!(mid > a && mid < b))
      continue;
    const auto c = mid_count(mid);
    double r = root(c);
    if (r >= b) {
      // interior feasible all the way up; b itself is not, but is the sup
      best = b;
      continue;
    }
    if (!(r > a))
      continue;
    // pin r to the largest double in (a, b) satisfying the condition
    constexpr double inf = std::numeric_limits<double>::infinity();
    while (r > a && !ok(r, c))
      r = std::nextafter(r, -inf);
    for (;;) {
      const double up = std::nextafter(r, inf);
      if (!(up < b) || !ok(up, c))
        break;
      r = up;
    }
    if (r > a)
      best = r;
  }
  return best;
}

/// Lazy merge of {0, 1} ∪ {F_i, S_i, S_i/theta} ∩ [0, 1], distinct and
/// increasing, read straight from the sorted F and S.
class AdabonGrid {
public:
  AdabonGrid(std::span<const double> f_sorted, std::span<const double> s_sorted, double theta)
      : f_(f_sorted), s_(s_sorted), theta_(theta)
  {
  }

  bool next(double& x)
  {
    for (;;) {
      double v;
      if (!started_) {
        started_ = true;
        v = 0.0;
      } else {
        constexpr double inf = std::numeric_limits<double>::infinity();
        const double from_f = fi_ < f_.size() ? f_[fi_] : inf;
        const double from_s = si_ < s_.size() ? s_[si_] : inf;
        const double from_q = qi_ < s_.size() ? s_[qi_] / theta_ : inf;
        v = std::min({from_f, from_s, from_q, 1.0});
        if (v == 1.0 && last_ == 1.0)
          return false;
        fi_ += from_f == v;
        si_ += from_s == v;
        qi_ += from_q == v;
        if (qi_ < s_.size() && s_[qi_] / theta_ > 1.0)
          qi_ = s_.size();
      }
      if (emitted_ && v == last_)
        continue;
      emitted_ = true;
      last_ = v;
      x = v;
      return true;
    }
  }

private:
  std::span<const double> f_;
  std::span<const double> s_;
  double theta_;
  std::size_t fi_ = 0, si_ = 0, qi_ = 0;
  bool started_ = false;
  bool emitted_ = false;
  double last_ = 0.0;
};

/// Materialized AdabonGrid.
inline std::vector<double> adabon_grid(std::span<const double> f_sorted,
                                       std::span<const double> s_sorted, double theta)
{
  std::vector<double> grid;
  AdabonGrid cursor(f_sorted, s_sorted, theta);
  for (double x; cursor.next(x);)
    grid.push_back(x);
  return grid;
}

/// t * count / (1 - theta t) <= k alpha
inline bool adabon_condition(double t, std::size_t count, double theta, double k_alpha)
{
  return t * static_cast<double>(count) / (1.0 - theta * t) <= k_alpha;
}

/// #{F_i < t, S_i >= theta t}, using F_i <= S_i so that S_i < theta t
/// already implies F_i < t.
class SurvivorCounter {
public:
  SurvivorCounter(std::span<const double> f_sorted, std::span<const double> s_sorted,
                  double theta)
      : f_(f_sorted), s_(s_sorted), theta_(theta)
  {
  }

  std::size_t operator()(double t) { return f_.below(t) - s_.below(theta_ * t); }

private:
  MonotoneCounter f_;
  MonotoneCounter s_;
  double theta_;
};

} // namespace detail

/// Bonferroni with the generalized k-FWER cut: reject P_i <= k alpha / m.
inline RejectionResult run_generalized_bonferroni(std::span<const double> pc_pvalues,
                                                  const ProcedureContext& ctx)
{
  if (pc_pvalues.empty())
    throw std::invalid_argument("no p-values supplied");
  const double cut =
      std::min(1.0, ctx.k_alpha() / static_cast<double>(pc_pvalues.size()));
  RejectionResult result;
  result.method = Method::bonferroni;
  result.threshold = cut;
  result.rejected =
      detail::indices_where(pc_pvalues.size(), [&](std::size_t i) { return pc_pvalues[i] <= cut; });
  return result;
}

/// sup { t in [0, k alpha] : t * #{F_i < t} <= k alpha }, computed exactly
/// from the step structure of the count. The search range is additionally
/// capped at 1.
inline double adafilter_bon_threshold(std::span<const double> f, const ProcedureContext& ctx)
{
  const double k_alpha = ctx.k_alpha();
  const double upper = std::min(k_alpha, 1.0);
  const auto sorted = detail::sorted_copy(f);

  std::vector<double> grid;
  grid.reserve(sorted.size() + 2);
  grid.push_back(0.0);
  for (double x : sorted)
    if (x > 0.0 && x < upper)
      grid.push_back(x);
  grid.push_back(upper);
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  detail::MonotoneCounter at_end(sorted);
  detail::MonotoneCounter at_mid(sorted);
  return detail::piecewise_supremum(
      detail::SpanGrid(grid), [&](double t) { return at_end.below(t); },
      [&](double t) { return at_mid.below(t); },
      [&](double t, std::size_t c) { return t * static_cast<double>(c) <= k_alpha; },
      [&](std::size_t c) {
        return c == 0 ? std::numeric_limits<double>::infinity()
                      : k_alpha / static_cast<double>(c);
      });
}

inline RejectionResult run_adafilter_bon(const PairedScores& scores, const ProcedureContext& ctx)
{
  scores.validate();
  const double t = adafilter_bon_threshold(scores.f, ctx);
  RejectionResult result;
  result.method = Method::adafilter_bon;
  result.threshold = t;
  result.rejected =
      detail::indices_where(scores.size(), [&](std::size_t i) { return scores.s[i] < t; });
  result.diagnostics.survivors = static_cast<std::size_t>(
      std::count_if(scores.f.begin(), scores.f.end(), [&](double x) { return x < t; }));
  return result;
}

/// Leave-one-out AdaFilter-Bon threshold: feature i is counted as a survivor
/// for every t > 0 regardless of its own F_i.
inline double leave_one_out_threshold(std::span<const double> f, std::size_t i,
                                      const ProcedureContext& ctx)
{
  if (i >= f.size())
    throw std::out_of_range("feature index " + std::to_string(i) + " out of range");
  std::vector<double> g(f.begin(), f.end());
  g[i] = 0.0;
  return adafilter_bon_threshold(g, ctx);
}

/// Post-filter null proportion estimate
///   #{F_i < t, S_i >= theta t} / ((1 - theta t) #{F_i < t}).
inline Pi0Estimate estimate_pi0(const PairedScores& scores, double t, double theta)
{
  if (!(t > 0.0 && t <= 1.0))
    throw std::domain_error("pi0 evaluation point must lie in (0, 1]");
  if (!(theta > 0.0 && theta < 1.0))
    throw std::domain_error("theta must lie in (0, 1)");
  std::size_t survivors = 0;
  std::size_t large = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores.f[i] < t) {
      ++survivors;
      if (scores.s[i] >= theta * t)
        ++large;
    }
  }
  if (survivors == 0)
    throw undefined_estimate("no features survive the filter at t = " + std::to_string(t));
  const double value =
      static_cast<double>(large) / ((1.0 - theta * t) * static_cast<double>(survivors));
  return {t, theta, value, survivors};
}

/// Exact supremum
///   sup { t in [0,1] : t #{F_i < t, S_i >= theta t} / (1 - theta t) <= k alpha }.
///
/// The count only jumps on the grid {0, 1, F_i, S_i, S_i/theta}, so the
/// sweep visits each piece between consecutive grid points once and solves
/// for the boundary inside it. O(m log m).
inline double adabon_threshold(const PairedScores& scores, const ProcedureContext& ctx)
{
  scores.validate();
  const double theta = ctx.theta;
  const double k_alpha = ctx.k_alpha();
  const auto f_sorted = detail::sorted_copy(scores.f);
  const auto s_sorted = detail::sorted_copy(scores.s);
  detail::SurvivorCounter at_end(f_sorted, s_sorted, theta);
  detail::SurvivorCounter at_mid(f_sorted, s_sorted, theta);
  return detail::piecewise_supremum(
      detail::AdabonGrid(f_sorted, s_sorted, theta), std::ref(at_end), std::ref(at_mid),
      [&](double t, std::size_t c) { return detail::adabon_condition(t, c, theta, k_alpha); },
      [&](std::size_t c) {
        return c == 0 ? std::numeric_limits<double>::infinity()
                      : k_alpha / (static_cast<double>(c) + theta * k_alpha);
      });
}

/// Largest grid point satisfying the AdaBon condition. Always <= the exact
/// supremum, and can reject strictly fewer features: when the feasible
/// region reopens just above some S_i/theta the grid has no point there.
inline double adabon_surrogate_threshold(const PairedScores& scores, const ProcedureContext& ctx)
{
  scores.validate();
  const auto f_sorted = detail::sorted_copy(scores.f);
  const auto s_sorted = detail::sorted_copy(scores.s);
  const auto grid = detail::adabon_grid(f_sorted, s_sorted, ctx.theta);
  detail::SurvivorCounter count(f_sorted, s_sorted, ctx.theta);
  double best = 0.0;
  for (double g : grid)
    if (detail::adabon_condition(g, count(g), ctx.theta, ctx.k_alpha()))
      best = g;
  return best;
}

inline RejectionResult run_adafilter_adabon(const PairedScores& scores, const ProcedureContext& ctx)
{
  const double t = adabon_threshold(scores, ctx);
  RejectionResult result;
  result.method = Method::adafilter_adabon;
  result.threshold = t;
  result.rejected =
      detail::indices_where(scores.size(), [&](std::size_t i) { return scores.s[i] < t; });

  const auto survivors = static_cast<std::size_t>(
      std::count_if(scores.f.begin(), scores.f.end(), [&](double x) { return x < t; }));
  result.diagnostics.survivors = survivors;
  if (survivors > 0)
    result.diagnostics.pi0_hat = estimate_pi0(scores, t, ctx.theta).value;
  result.diagnostics.surrogate_threshold = adabon_surrogate_threshold(scores, ctx);
  return result;
}

/// FDX augmentation of an AdaBon rejection set:
///   tau = sup { tau in [0,1] : (#{t_theta <= S_i <= tau} + k) / (1 v #{S_i <= tau}) <= gamma },
/// rejecting S_i <= tau. The ratio is right-continuous and piecewise constant
/// with jumps at the S values, so the sup of a feasible piece [v_l, v_{l+1})
/// is v_{l+1} even though the condition fails there.
inline RejectionResult augment_fdx(std::span<const double> s, double t_theta,
                                   const ProcedureContext& ctx)
{
  const auto sorted = detail::sorted_copy(s);
  const auto below_t = static_cast<std::size_t>(
      std::lower_bound(sorted.begin(), sorted.end(), t_theta) - sorted.begin());
  const double k = static_cast<double>(ctx.k);

  auto ok_from = [&](std::size_t at_most) {
    // ratio on the piece where #{S_i <= tau} == at_most
    const std::size_t upper = at_most > below_t ? at_most - below_t : 0;
    const double den = static_cast<double>(std::max<std::size_t>(1, at_most));
    return (static_cast<double>(upper) + k) / den <= ctx.gamma;
  };

  double tau = 0.0;
  // piece [0, v_1) has no S values (v_1 > 0) and ratio k > gamma
  for (std::size_t j = 0; j < sorted.size();) {
    const double v = sorted[j];
    std::size_t end = j;
    while (end < sorted.size() && sorted[end] == v)
      ++end;
    if (ok_from(end))
      tau = end < sorted.size() ? sorted[end] : 1.0;
    j = end;
  }

  RejectionResult result;
  result.method = Method::adafilter_adabon_fdx;
  result.threshold = tau;
  result.rejected = detail::indices_where(s.size(), [&](std::size_t i) { return s[i] <= tau; });
  result.diagnostics.adabon_threshold = t_theta;
  return result;
}

inline RejectionResult run_adafilter_adabon_fdx(const PairedScores& scores,
                                                const ProcedureContext& ctx)
{
  const auto base = run_adafilter_adabon(scores, ctx);
  auto result = augment_fdx(scores.s, base.threshold, ctx);
  result.diagnostics.survivors = base.diagnostics.survivors;
  result.diagnostics.pi0_hat = base.diagnostics.pi0_hat;
  return result;
}

namespace detail {

/// Step-up rule: reject the j* smallest where j* = max { j : P_(j) <= c_j }.
template <class Critical>
RejectionResult step_up(std::span<const double> p, Method method, Critical critical)
{
  if (p.empty())
    throw std::invalid_argument("no p-values supplied");
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });

  std::size_t last = 0;
  double cut = 0.0;
  for (std::size_t j = p.size(); j >= 1; --j) {
    const double c = critical(j);
    if (p[order[j - 1]] <= c) {
      last = j;
      cut = c;
      break;
    }
  }

  RejectionResult result;
  result.method = method;
  result.threshold = cut;
  result.rejected.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(last));
  std::sort(result.rejected.begin(), result.rejected.end());
  return result;
}

inline void require_fwer(const ProcedureContext& ctx, Method method)
{
  if (ctx.k != 1)
    throw unsupported_configuration(std::string(method_name(method)) +
                                    " controls the FWER only (k = 1), got k = " +
                                    std::to_string(ctx.k));
}

} // namespace detail

/// Generalized Hochberg step-up for k-FWER:
/// c_j = k alpha / m for j <= k, k alpha / (m + k - j) otherwise.
inline RejectionResult run_hochberg_kfwer(std::span<const double> pc_pvalues,
                                          const ProcedureContext& ctx)
{
  const double m = static_cast<double>(pc_pvalues.size());
  const double k_alpha = ctx.k_alpha();
  const std::size_t k = ctx.k;
  return detail::step_up(pc_pvalues, Method::hochberg, [&](std::size_t j) {
    const double den = j <= k ? m : m + static_cast<double>(k) - static_cast<double>(j);
    return std::min(1.0, k_alpha / den);
  });
}

/// Adaptive Bonferroni with null-count estimate (#{p_i > lambda} + 1) / (1 - lambda).
inline RejectionResult run_adaptive_bonferroni(std::span<const double> pc_pvalues,
                                               const ProcedureContext& ctx, double lambda = 0.5)
{
  detail::require_fwer(ctx, Method::adaptive_bonferroni);
  if (!(lambda > 0.0 && lambda < 1.0))
    throw std::domain_error("lambda must lie in (0, 1)");
  if (pc_pvalues.empty())
    throw std::invalid_argument("no p-values supplied");

  const auto above = std::count_if(pc_pvalues.begin(), pc_pvalues.end(),
                                   [&](double p) { return p > lambda; });
  const double null_count = (static_cast<double>(above) + 1.0) / (1.0 - lambda);
  const double cut = ctx.alpha / null_count;

  RejectionResult result;
  result.method = Method::adaptive_bonferroni;
  result.threshold = cut;
  result.rejected =
      detail::indices_where(pc_pvalues.size(), [&](std::size_t i) { return pc_pvalues[i] <= cut; });
  result.diagnostics.null_count = null_count;
  return result;
}

/// Adaptive Hochberg step-up with null-count estimate
/// n(kappa) = (m - kappa + 1) / (1 - P_(kappa)) clamped to [1, m], and
/// critical values c_j = alpha / max(1, n(kappa) - j + 1).
inline RejectionResult run_adaptive_hochberg(std::span<const double> pc_pvalues,
                                             const ProcedureContext& ctx, std::size_t kappa)
{
  detail::require_fwer(ctx, Method::adaptive_hochberg);
  const std::size_t m = pc_pvalues.size();
  if (kappa < 1 || kappa > m)
    throw std::domain_error("kappa=" + std::to_string(kappa) + " outside [1, m=" +
                            std::to_string(m) + "]");

  std::vector<double> sorted(pc_pvalues.begin(), pc_pvalues.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(kappa - 1),
                   sorted.end());
  const double p_kappa = sorted[kappa - 1];
  const double md = static_cast<double>(m);
  double null_count = md;
  if (p_kappa < 1.0)
    null_count = std::clamp((md - static_cast<double>(kappa) + 1.0) / (1.0 - p_kappa), 1.0, md);

  auto result = detail::step_up(pc_pvalues, Method::adaptive_hochberg, [&](std::size_t j) {
    return ctx.alpha / std::max(1.0, null_count - static_cast<double>(j) + 1.0);
  });
  result.diagnostics.null_count = null_count;
  return result;
}

} // namespace adabon

#endif // ADABON_PROCEDURES_HPP
