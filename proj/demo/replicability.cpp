// Simulates one meta-analysis and compares AdaFilter-AdaBon with
// AdaFilter-Bon and plain Bonferroni on it.

#include <adabon.hpp>

#include <iostream>

int main()
{
  adabon::SimulationConfig cfg;
  cfg.pi1 = 0.1;
  cfg.rho = 0.2;
  cfg.u = 2;
  const auto rep = adabon::generate_replicate(cfg, 0);

  const adabon::ProcedureContext ctx{2, 1, 0.05, 0.5, 0.1};
  const adabon::BaselineOptions options;
  const auto inputs = adabon::prepare_inputs(rep.pvalues, ctx.u, options);

  std::cout << "false PC nulls: " << rep.truth.false_count() << " of " << cfg.m << "\n";
  for (auto method : {adabon::Method::adafilter_adabon, adabon::Method::adafilter_bon,
                      adabon::Method::bonferroni}) {
    const auto result = adabon::run_method(method, inputs, ctx, options);
    std::cout << adabon::method_name(method) << ": threshold " << result.threshold << ", "
              << result.rejected.size() << " rejected, "
              << adabon::false_discoveries(result, rep.truth) << " false, TPR "
              << adabon::tpr(result, rep.truth) << "\n";
  }
}
