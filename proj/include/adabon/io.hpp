#ifndef ADABON_IO_HPP
#define ADABON_IO_HPP

#include <adabon/analysis.hpp>
#include <adabon/metrics.hpp>
#include <adabon/procedures.hpp>
#include <adabon/simulate.hpp>

#include <json.hpp>

#include <charconv>
#include <cstddef>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace adabon {

/// Malformed input text. Messages carry 1-based line and column numbers.
class parse_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::string_view analyze_schema = "adabon-analyze v1";
inline constexpr std::string_view metrics_schema = "adabon-metrics v1";

namespace detail {

inline std::string format_digits(double x, int digits)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

/// Shortest text that reads back to the same double.
inline std::string format_shortest(double x)
{
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline std::string_view trim(std::string_view s)
{
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos)
    return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split_commas(std::string_view line)
{
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos)
      return out;
    start = comma + 1;
  }
}

inline std::optional<double> parse_double(std::string_view s)
{
  if (s.empty())
    return std::nullopt;
  if (s.front() == '+')
    s.remove_prefix(1);
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    return std::nullopt;
  return v;
}

template <class T>
std::optional<T> parse_integer(std::string_view s)
{
  T v{};
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size())
    return std::nullopt;
  return v;
}

inline std::string where(std::size_t line, std::size_t column)
{
  return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

/// Reads the next line that is neither blank nor a '#' comment. Comments
/// are handed to `on_comment` without the leading '#'.
template <class OnComment>
bool next_data_line(std::istream& in, std::string& line, std::size_t& line_no,
                    OnComment on_comment)
{
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty())
      continue;
    if (t.front() == '#') {
      on_comment(trim(t.substr(1)));
      continue;
    }
    return true;
  }
  return false;
}

inline bool next_data_line(std::istream& in, std::string& line, std::size_t& line_no)
{
  return next_data_line(in, line, line_no, [](std::string_view) {});
}

} // namespace detail

// ---- p-value matrix --------------------------------------------------------

struct MatrixFile {
  std::vector<std::string> studies;
  PValueMatrix pvalues;
};

/// CSV with a header row of study names and one row of p-values per
/// feature. Blank lines and '#' comments are skipped; missing values are
/// not allowed.
inline MatrixFile read_matrix_csv(std::istream& in)
{
  std::string line;
  std::size_t line_no = 0;
  if (!detail::next_data_line(in, line, line_no))
    throw parse_error("input is empty: expected a header row of study names");

  std::vector<std::string> studies;
  for (auto name : detail::split_commas(line))
    studies.emplace_back(name);
  for (std::size_t j = 0; j < studies.size(); ++j)
    if (studies[j].empty())
      throw parse_error("empty study name at " + detail::where(line_no, j + 1));
  if (studies.size() < 2)
    throw parse_error("header on line " + std::to_string(line_no) +
                      " names fewer than two studies");

  std::vector<double> values;
  std::size_t rows = 0;
  while (detail::next_data_line(in, line, line_no)) {
    const auto cells = detail::split_commas(line);
    if (cells.size() != studies.size())
      throw parse_error("line " + std::to_string(line_no) + " has " +
                        std::to_string(cells.size()) + " fields, expected " +
                        std::to_string(studies.size()));
    for (std::size_t j = 0; j < cells.size(); ++j) {
      if (cells[j].empty())
        throw parse_error("missing value at " + detail::where(line_no, j + 1));
      const auto v = detail::parse_double(cells[j]);
      if (!v)
        throw parse_error("not a number '" + std::string(cells[j]) + "' at " +
                          detail::where(line_no, j + 1));
      if (!(*v >= 0.0 && *v <= 1.0))
        throw parse_error("p-value " + std::string(cells[j]) + " outside [0,1] at " +
                          detail::where(line_no, j + 1));
      values.push_back(*v);
    }
    ++rows;
  }
  if (rows == 0)
    throw parse_error("no feature rows after the header");
  const std::size_t n = studies.size();
  return {std::move(studies), PValueMatrix(rows, n, std::move(values))};
}

// ---- analyze output --------------------------------------------------------

/// What the analyze command writes: the procedure result plus the
/// per-feature inputs it was computed from.
struct AnalysisReport {
  ProcedureContext context;
  Combiner combiner = Combiner::fisher;
  PairedScores scores;
  std::vector<double> baseline_pvalues;
  std::size_t infinite_fisher_statistics = 0;
  RejectionResult result;
};

namespace detail {

inline std::vector<std::pair<std::string, std::string>> diagnostic_fields(const Diagnostics& d)
{
  std::vector<std::pair<std::string, std::string>> out;
  if (d.pi0_hat)
    out.emplace_back("pi0_hat", format_digits(*d.pi0_hat, 17));
  if (d.survivors)
    out.emplace_back("survivors", std::to_string(*d.survivors));
  if (d.surrogate_threshold)
    out.emplace_back("surrogate_threshold", format_digits(*d.surrogate_threshold, 17));
  if (d.adabon_threshold)
    out.emplace_back("adabon_threshold", format_digits(*d.adabon_threshold, 17));
  if (d.null_count)
    out.emplace_back("null_count", format_digits(*d.null_count, 17));
  return out;
}

inline void set_diagnostic(Diagnostics& d, std::string_view key, std::string_view value)
{
  const auto real = [&] {
    const auto v = parse_double(value);
    if (!v)
      throw parse_error("bad value for " + std::string(key) + ": '" + std::string(value) + "'");
    return *v;
  };
  if (key == "pi0_hat")
    d.pi0_hat = real();
  else if (key == "survivors") {
    const auto v = parse_integer<std::size_t>(value);
    if (!v)
      throw parse_error("bad survivor count '" + std::string(value) + "'");
    d.survivors = *v;
  } else if (key == "surrogate_threshold")
    d.surrogate_threshold = real();
  else if (key == "adabon_threshold")
    d.adabon_threshold = real();
  else if (key == "null_count")
    d.null_count = real();
  else
    throw parse_error("unknown diagnostic '" + std::string(key) + "'");
}

} // namespace detail

/// CSV: '#' header lines hold the schema tag, the settings, the threshold
/// and the diagnostics; then one row per feature with 1-based ids.
inline void write_analysis_csv(std::ostream& out, const AnalysisReport& r)
{
  using detail::format_digits;
  const auto& ctx = r.context;
  out << "# " << analyze_schema << '\n';
  out << "# method=" << method_name(r.result.method) << " u=" << ctx.u << " k=" << ctx.k
      << " alpha=" << detail::format_shortest(ctx.alpha)
      << " theta=" << detail::format_shortest(ctx.theta)
      << " gamma=" << detail::format_shortest(ctx.gamma)
      << " combiner=" << combiner_name(r.combiner) << '\n';
  out << "# threshold=" << format_digits(r.result.threshold, 17)
      << " rejections=" << r.result.rejected.size()
      << " infinite_fisher_statistics=" << r.infinite_fisher_statistics << '\n';
  const auto diags = detail::diagnostic_fields(r.result.diagnostics);
  if (!diags.empty()) {
    out << "# diagnostics";
    for (const auto& [k, v] : diags)
      out << ' ' << k << '=' << v;
    out << '\n';
  }
  out << "feature,s,f,pc_pvalue,rejected\n";
  std::vector<bool> rejected(r.scores.size(), false);
  for (std::size_t i : r.result.rejected)
    rejected.at(i) = true;
  for (std::size_t i = 0; i < r.scores.size(); ++i) {
    out << i + 1 << ',' << format_digits(r.scores.s[i], 17) << ','
        << format_digits(r.scores.f[i], 17) << ','
        << format_digits(r.baseline_pvalues.at(i), 17) << ',' << (rejected[i] ? 1 : 0) << '\n';
  }
}

inline nlohmann::ordered_json analysis_json(const AnalysisReport& r)
{
  nlohmann::ordered_json j;
  j["schema"] = analyze_schema;
  j["method"] = method_name(r.result.method);
  j["u"] = r.context.u;
  j["k"] = r.context.k;
  j["alpha"] = r.context.alpha;
  j["theta"] = r.context.theta;
  j["gamma"] = r.context.gamma;
  j["combiner"] = combiner_name(r.combiner);
  j["threshold"] = r.result.threshold;
  j["infinite_fisher_statistics"] = r.infinite_fisher_statistics;
  auto& d = j["diagnostics"] = nlohmann::ordered_json::object();
  const auto& diag = r.result.diagnostics;
  if (diag.pi0_hat) d["pi0_hat"] = *diag.pi0_hat;
  if (diag.survivors) d["survivors"] = *diag.survivors;
  if (diag.surrogate_threshold) d["surrogate_threshold"] = *diag.surrogate_threshold;
  if (diag.adabon_threshold) d["adabon_threshold"] = *diag.adabon_threshold;
  if (diag.null_count) d["null_count"] = *diag.null_count;
  auto& rej = j["rejected"] = nlohmann::ordered_json::array();
  for (std::size_t i : r.result.rejected)
    rej.push_back(i + 1);
  auto& features = j["features"] = nlohmann::ordered_json::array();
  std::vector<bool> flag(r.scores.size(), false);
  for (std::size_t i : r.result.rejected)
    flag.at(i) = true;
  for (std::size_t i = 0; i < r.scores.size(); ++i)
    features.push_back({{"feature", i + 1},
                        {"s", r.scores.s[i]},
                        {"f", r.scores.f[i]},
                        {"pc_pvalue", r.baseline_pvalues.at(i)},
                        {"rejected", flag[i]}});
  return j;
}

/// nlohmann's dump writes doubles in shortest round-trip form.
inline void write_analysis_json(std::ostream& out, const AnalysisReport& r)
{
  out << analysis_json(r).dump(2) << '\n';
}

inline AnalysisReport read_analysis_csv(std::istream& in)
{
  AnalysisReport r;
  bool schema = false;
  std::optional<std::size_t> expected_rejections;
  std::string line;
  std::size_t line_no = 0;

  const auto on_comment = [&](std::string_view c) {
    if (c == analyze_schema) {
      schema = true;
      return;
    }
    std::istringstream words{std::string(c)};
    std::string word;
    bool diagnostics = false;
    while (words >> word) {
      if (word == "diagnostics") {
        diagnostics = true;
        continue;
      }
      const auto eq = word.find('=');
      if (eq == std::string::npos)
        throw parse_error("unexpected header token '" + word + "' on line " +
                          std::to_string(line_no));
      const std::string_view key(word.data(), eq);
      const std::string_view value(word.data() + eq + 1, word.size() - eq - 1);
      const auto real = [&] {
        const auto v = detail::parse_double(value);
        if (!v)
          throw parse_error("bad value for " + std::string(key) + " on line " +
                            std::to_string(line_no));
        return *v;
      };
      const auto whole = [&] {
        const auto v = detail::parse_integer<std::size_t>(value);
        if (!v)
          throw parse_error("bad value for " + std::string(key) + " on line " +
                            std::to_string(line_no));
        return *v;
      };
      if (diagnostics)
        detail::set_diagnostic(r.result.diagnostics, key, value);
      else if (key == "method") {
        const auto m = parse_method(value);
        if (!m)
          throw parse_error("unknown method '" + std::string(value) + "'");
        r.result.method = *m;
      } else if (key == "u") r.context.u = static_cast<unsigned>(whole());
      else if (key == "k") r.context.k = static_cast<unsigned>(whole());
      else if (key == "alpha") r.context.alpha = real();
      else if (key == "theta") r.context.theta = real();
      else if (key == "gamma") r.context.gamma = real();
      else if (key == "combiner") {
        const auto c = parse_combiner(value);
        if (!c)
          throw parse_error("unknown combiner '" + std::string(value) + "'");
        r.combiner = *c;
      } else if (key == "threshold") r.result.threshold = real();
      else if (key == "rejections") expected_rejections = whole();
      else if (key == "infinite_fisher_statistics") r.infinite_fisher_statistics = whole();
      else
        throw parse_error("unknown header key '" + std::string(key) + "' on line " +
                          std::to_string(line_no));
    }
  };

  if (!detail::next_data_line(in, line, line_no, on_comment))
    throw parse_error("analysis file has no column header");
  if (!schema)
    throw parse_error("missing schema line '# " + std::string(analyze_schema) + "'");
  if (detail::trim(line) != "feature,s,f,pc_pvalue,rejected")
    throw parse_error("unexpected column header on line " + std::to_string(line_no));

  while (detail::next_data_line(in, line, line_no)) {
    const auto cells = detail::split_commas(line);
    if (cells.size() != 5)
      throw parse_error("line " + std::to_string(line_no) + " has " +
                        std::to_string(cells.size()) + " fields, expected 5");
    const auto id = detail::parse_integer<std::size_t>(cells[0]);
    if (!id || *id != r.scores.size() + 1)
      throw parse_error("feature ids must run 1, 2, ... at " + detail::where(line_no, 1));
    double v[3];
    for (int c = 0; c < 3; ++c) {
      const auto x = detail::parse_double(cells[c + 1]);
      if (!x)
        throw parse_error("not a number at " + detail::where(line_no, c + 2));
      v[c] = *x;
    }
    r.scores.s.push_back(v[0]);
    r.scores.f.push_back(v[1]);
    r.baseline_pvalues.push_back(v[2]);
    if (cells[4] == "1")
      r.result.rejected.push_back(*id - 1);
    else if (cells[4] != "0")
      throw parse_error("rejected flag must be 0 or 1 at " + detail::where(line_no, 5));
  }
  if (expected_rejections && *expected_rejections != r.result.rejected.size())
    throw parse_error("rejection count in header disagrees with the rows");
  return r;
}

inline AnalysisReport read_analysis_json(std::istream& in)
{
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
    if (j.value("schema", std::string()) != analyze_schema)
      throw parse_error("missing or unknown schema tag");
    AnalysisReport r;
    const auto m = parse_method(j.at("method").get<std::string>());
    const auto c = parse_combiner(j.at("combiner").get<std::string>());
    if (!m || !c)
      throw parse_error("unknown method or combiner");
    r.result.method = *m;
    r.combiner = *c;
    r.context.u = j.at("u").get<unsigned>();
    r.context.k = j.at("k").get<unsigned>();
    r.context.alpha = j.at("alpha").get<double>();
    r.context.theta = j.at("theta").get<double>();
    r.context.gamma = j.at("gamma").get<double>();
    r.result.threshold = j.at("threshold").get<double>();
    r.infinite_fisher_statistics = j.at("infinite_fisher_statistics").get<std::size_t>();
    for (const auto& [key, v] : j.at("diagnostics").items())
      detail::set_diagnostic(r.result.diagnostics, key,
                             v.is_number_unsigned() ? std::to_string(v.get<std::size_t>())
                                                    : detail::format_digits(v.get<double>(), 17));
    for (const auto& f : j.at("features")) {
      r.scores.s.push_back(f.at("s").get<double>());
      r.scores.f.push_back(f.at("f").get<double>());
      r.baseline_pvalues.push_back(f.at("pc_pvalue").get<double>());
      if (f.at("rejected").get<bool>())
        r.result.rejected.push_back(f.at("feature").get<std::size_t>() - 1);
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(std::string("malformed analysis JSON: ") + e.what());
  }
}

// ---- metrics table ---------------------------------------------------------

inline constexpr const char* metrics_columns[] = {
    "method", "u",     "k",        "alpha", "pi1",    "rho",  "theta",  "gamma",
    "reps",   "kfwer", "kfwer_se", "tpr",   "tpr_se", "fdx",  "fdx_se", "fdr",
    "fdr_se", "mean_pi0", "mean_pi0_se"};

inline void write_metrics_csv(std::ostream& out, const std::vector<MetricsRecord>& records)
{
  using detail::format_digits;
  using detail::format_shortest;
  out << "# " << metrics_schema << '\n';
  out << "# rng: " << rng_description << '\n';
  for (std::size_t c = 0; c < std::size(metrics_columns); ++c)
    out << (c ? "," : "") << metrics_columns[c];
  out << '\n';
  const auto optional = [](const std::optional<double>& v) {
    return v ? format_digits(*v, 6) : std::string();
  };
  for (const auto& r : records) {
    out << method_name(r.method) << ',' << r.u << ',' << r.k << ',' << format_shortest(r.alpha)
        << ',' << format_shortest(r.pi1) << ',' << format_shortest(r.rho) << ','
        << format_shortest(r.theta) << ',' << format_shortest(r.gamma) << ',' << r.reps << ','
        << format_digits(r.kfwer, 6) << ',' << format_digits(r.kfwer_se, 6) << ','
        << format_digits(r.tpr, 6) << ',' << format_digits(r.tpr_se, 6) << ','
        << format_digits(r.fdx, 6) << ',' << format_digits(r.fdx_se, 6) << ','
        << format_digits(r.fdr, 6) << ',' << format_digits(r.fdr_se, 6) << ','
        << optional(r.mean_pi0) << ',' << optional(r.mean_pi0_se) << '\n';
  }
}

/// Reads a metrics table by column name. Columns may appear in any order;
/// every column of the current schema must be present.
inline std::vector<MetricsRecord> read_metrics_csv(std::istream& in)
{
  std::string line;
  std::size_t line_no = 0;
  if (!detail::next_data_line(in, line, line_no))
    throw parse_error("metrics file is empty");

  std::map<std::string, std::size_t, std::less<>> index;
  const auto header = detail::split_commas(line);
  for (std::size_t c = 0; c < header.size(); ++c)
    index.emplace(std::string(header[c]), c);
  std::vector<std::string> missing;
  for (const char* name : metrics_columns)
    if (!index.contains(name))
      missing.emplace_back(name);
  if (!missing.empty()) {
    std::string msg = "metrics file is missing column(s):";
    for (const auto& m : missing)
      msg += ' ' + m;
    throw parse_error(msg);
  }

  std::vector<MetricsRecord> out;
  while (detail::next_data_line(in, line, line_no)) {
    const auto cells = detail::split_commas(line);
    if (cells.size() != header.size())
      throw parse_error("line " + std::to_string(line_no) + " has " +
                        std::to_string(cells.size()) + " fields, expected " +
                        std::to_string(header.size()));
    const auto cell = [&](const char* name) { return cells[index.find(name)->second]; };
    const auto column = [&](const char* name) { return index.find(name)->second + 1; };
    const auto real = [&](const char* name) {
      const auto v = detail::parse_double(cell(name));
      if (!v)
        throw parse_error("not a number at " + detail::where(line_no, column(name)));
      return *v;
    };
    const auto whole = [&](const char* name) {
      const auto v = detail::parse_integer<std::size_t>(cell(name));
      if (!v)
        throw parse_error("not an integer at " + detail::where(line_no, column(name)));
      return *v;
    };
    const auto optional = [&](const char* name) -> std::optional<double> {
      if (cell(name).empty())
        return std::nullopt;
      return real(name);
    };

    MetricsRecord r;
    const auto m = parse_method(cell("method"));
    if (!m)
      throw parse_error("unknown method '" + std::string(cell("method")) + "' at " +
                        detail::where(line_no, column("method")));
    r.method = *m;
    r.u = static_cast<unsigned>(whole("u"));
    r.k = static_cast<unsigned>(whole("k"));
    r.alpha = real("alpha");
    r.pi1 = real("pi1");
    r.rho = real("rho");
    r.theta = real("theta");
    r.gamma = real("gamma");
    r.reps = whole("reps");
    r.kfwer = real("kfwer");
    r.kfwer_se = real("kfwer_se");
    r.tpr = real("tpr");
    r.tpr_se = real("tpr_se");
    r.fdx = real("fdx");
    r.fdx_se = real("fdx_se");
    r.fdr = real("fdr");
    r.fdr_se = real("fdr_se");
    r.mean_pi0 = optional("mean_pi0");
    r.mean_pi0_se = optional("mean_pi0_se");
    out.push_back(r);
  }
  if (out.empty())
    throw parse_error("metrics file has no data rows");
  return out;
}

} // namespace adabon

#endif // ADABON_IO_HPP
