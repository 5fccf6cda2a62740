#ifndef ADABON_ANALYSIS_HPP
#define ADABON_ANALYSIS_HPP

#include <adabon/combiner.hpp>
#include <adabon/procedures.hpp>

#include <cmath>
#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

namespace adabon {

enum class Combiner { bonferroni, fisher };

inline std::string_view combiner_name(Combiner c)
{
  return c == Combiner::fisher ? "fisher" : "bonferroni";
}

inline std::optional<Combiner> parse_combiner(std::string_view name)
{
  if (name == "fisher")
    return Combiner::fisher;
  if (name == "bonferroni")
    return Combiner::bonferroni;
  return std::nullopt;
}

/// Settings for the literature baselines. AdaFilter methods ignore them.
struct BaselineOptions {
  Combiner combiner = Combiner::fisher;
  double lambda = 0.5;
  /// Order statistic used by adaptive Hochberg's null-count estimate;
  /// defaults to ceil(0.98 m), i.e. 490 of 500.
  std::optional<std::size_t> kappa;

  std::size_t kappa_for(std::size_t m) const
  {
    if (kappa)
      return *kappa;
    const auto k = static_cast<std::size_t>(std::ceil(0.98 * static_cast<double>(m)));
    return k < 1 ? 1 : k;
  }
};

/// Everything the procedures read from one p-value matrix at one level u.
struct MethodInputs {
  PairedScores scores;
  std::vector<double> baseline_pvalues; ///< PC p-values from the baseline combiner
  std::size_t infinite_fisher_statistics = 0;
};

inline MethodInputs prepare_inputs(const PValueMatrix& matrix, unsigned u,
                                   const BaselineOptions& options)
{
  MethodInputs in;
  in.scores = build_paired_scores(matrix, u);
  if (options.combiner == Combiner::fisher) {
    auto fisher = combine_fisher_rows(matrix, u);
    in.baseline_pvalues = std::move(fisher.values);
    in.infinite_fisher_statistics = fisher.infinite_statistics;
  } else {
    in.baseline_pvalues = in.scores.s;
  }
  return in;
}

inline RejectionResult run_method(Method method, const MethodInputs& in,
                                  const ProcedureContext& ctx, const BaselineOptions& options)
{
  switch (method) {
  case Method::adafilter_adabon: return run_adafilter_adabon(in.scores, ctx);
  case Method::adafilter_bon: return run_adafilter_bon(in.scores, ctx);
  case Method::adafilter_adabon_fdx: return run_adafilter_adabon_fdx(in.scores, ctx);
  case Method::bonferroni: return run_generalized_bonferroni(in.baseline_pvalues, ctx);
  case Method::hochberg: return run_hochberg_kfwer(in.baseline_pvalues, ctx);
  case Method::adaptive_bonferroni:
    return run_adaptive_bonferroni(in.baseline_pvalues, ctx, options.lambda);
  case Method::adaptive_hochberg:
    return run_adaptive_hochberg(in.baseline_pvalues, ctx,
                                 options.kappa_for(in.baseline_pvalues.size()));
  }
  throw std::invalid_argument("unknown method");
}

} // namespace adabon

#endif // ADABON_ANALYSIS_HPP
