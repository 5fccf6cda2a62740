#include <adabon.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

constexpr int exit_usage = 2;

struct AnalyzeOptions {
  std::string input;
  std::string output;
  std::string method = "adafilter-adabon";
  unsigned u = 2;
  unsigned k = 1;
  double alpha = 0.05;
  double theta = 0.5;
  double gamma = 0.1;
  bool augment = false;
  std::string combiner = "fisher";
  double lambda = 0.5;
  std::optional<std::size_t> kappa;
  std::string format = "csv";
};

std::ifstream open_input(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open '" + path + "'");
  return in;
}

std::ofstream open_output(const std::string& path)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot write '" + path + "'");
  return out;
}

int cmd_analyze(const AnalyzeOptions& o)
{
  auto method = adabon::parse_method(o.method);
  if (!method)
    throw std::invalid_argument("unknown method '" + o.method + "'");
  if (o.augment) {
    if (*method != adabon::Method::adafilter_adabon && *method != adabon::Method::adafilter_adabon_fdx)
      throw std::invalid_argument("--augment applies only to adafilter-adabon");
    method = adabon::Method::adafilter_adabon_fdx;
  }
  const auto combiner = adabon::parse_combiner(o.combiner);
  if (!combiner)
    throw std::invalid_argument("unknown combiner '" + o.combiner + "'");
  if (o.format != "csv" && o.format != "json")
    throw std::invalid_argument("format must be csv or json");

  auto in = open_input(o.input);
  const auto file = adabon::read_matrix_csv(in);

  const adabon::ProcedureContext ctx{o.u, o.k, o.alpha, o.theta, o.gamma};
  ctx.validate(file.pvalues.studies());
  const adabon::BaselineOptions options{*combiner, o.lambda, o.kappa};

  const auto inputs = adabon::prepare_inputs(file.pvalues, o.u, options);
  adabon::AnalysisReport report;
  report.context = ctx;
  report.combiner = *combiner;
  report.result = adabon::run_method(*method, inputs, ctx, options);
  report.scores = inputs.scores;
  report.baseline_pvalues = inputs.baseline_pvalues;
  report.infinite_fisher_statistics = inputs.infinite_fisher_statistics;

  auto out = open_output(o.output);
  if (o.format == "json")
    adabon::write_analysis_json(out, report);
  else
    adabon::write_analysis_csv(out, report);
  std::cerr << adabon::method_name(*method) << ": " << report.result.rejected.size() << " of "
            << file.pvalues.features() << " features rejected\n";
  return 0;
}

int cmd_simulate(const std::string& config_path, const std::string& output)
{
  auto in = open_input(config_path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw adabon::configuration_error(std::string("config is not valid JSON: ") + e.what());
  }
  const auto sweep = adabon::sweep_config_from_json(j);
  const auto records = adabon::run_sweep(sweep);
  auto out = open_output(output);
  adabon::write_metrics_csv(out, records);
  std::cerr << "wrote " << records.size() << " rows to " << output << '\n';
  return 0;
}

int cmd_plot(const std::string& input, const std::string& output_dir)
{
  auto in = open_input(input);
  const auto records = adabon::read_metrics_csv(in);
  const auto figures = adabon::render_figures(records);
  std::filesystem::create_directories(output_dir);
  for (const auto& fig : figures) {
    const auto path = std::filesystem::path(output_dir) / ("metrics_k" + std::to_string(fig.k) + ".svg");
    auto out = open_output(path.string());
    out << fig.svg;
    std::cerr << "wrote " << path.string() << '\n';
  }
  return 0;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Partial conjunction testing with AdaFilter procedures"};
  app.require_subcommand(1);

  AnalyzeOptions a;
  auto* analyze = app.add_subcommand("analyze", "Run one procedure on a p-value matrix CSV");
  analyze->add_option("--input", a.input, "CSV: header of study names, one row per feature")->required();
  analyze->add_option("--output", a.output, "Result file")->required();
  analyze->add_option("--method", a.method,
                      "adafilter-adabon, adafilter-bon, bonferroni, hochberg, "
                      "adaptive-bonferroni, adaptive-hochberg, adafilter-adabon-fdx")
      ->required();
  analyze->add_option("--u", a.u, "Replicability level")->required();
  analyze->add_option("--k", a.k, "k-FWER tolerance")->required();
  analyze->add_option("--alpha", a.alpha, "Target level")->required();
  analyze->add_option("--theta", a.theta, "AdaBon tuning parameter")->capture_default_str();
  analyze->add_option("--gamma", a.gamma, "FDX exceedance tolerance")->capture_default_str();
  analyze->add_flag("--augment", a.augment, "Extend AdaBon rejections with FDX augmentation");
  analyze->add_option("--combiner", a.combiner, "Baseline PC combiner: fisher or bonferroni")
      ->capture_default_str();
  analyze->add_option("--lambda", a.lambda, "Adaptive Bonferroni tuning")->capture_default_str();
  analyze->add_option("--kappa", a.kappa, "Adaptive Hochberg order statistic (default ceil(0.98 m))");
  analyze->add_option("--format", a.format, "csv or json")->capture_default_str();

  std::string config, sim_output;
  auto* simulate = app.add_subcommand("simulate", "Run a simulation sweep from a JSON config");
  simulate->add_option("--config", config, "JSON config")->required();
  simulate->add_option("--output", sim_output, "Metrics CSV")->required();

  std::string plot_input, plot_output;
  auto* plot = app.add_subcommand("plot", "Render SVG figures from a metrics CSV");
  plot->add_option("--input", plot_input, "Metrics CSV")->required();
  plot->add_option("--output", plot_output, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_usage;
  }

  try {
    if (*analyze)
      return cmd_analyze(a);
    if (*simulate)
      return cmd_simulate(config, sim_output);
    if (*plot)
      return cmd_plot(plot_input, plot_output);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_usage;
  }
  return exit_usage;
}
