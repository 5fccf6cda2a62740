#ifndef ADABON_PLOT_HPP
#define ADABON_PLOT_HPP

#include <adabon/metrics.hpp>
#include <adabon/procedures.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace adabon {

/// One SVG figure for a single k: rows are rho values, columns are u
/// values, repeated for the error-rate group and the TPR group. x is pi1.
struct Figure {
  unsigned k = 1;
  std::string svg;
};

namespace detail {

inline const char* method_colour(Method m)
{
  switch (m) {
  case Method::adafilter_adabon: return "#d62728";
  case Method::adafilter_bon: return "#1f77b4";
  case Method::bonferroni: return "#2ca02c";
  case Method::hochberg: return "#9467bd";
  case Method::adaptive_bonferroni: return "#8c564b";
  case Method::adaptive_hochberg: return "#e377c2";
  case Method::adafilter_adabon_fdx: return "#ff7f0e";
  }
  return "#000000";
}

inline std::string num(double x)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

inline std::string tick(double x)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

inline std::string escape(const std::string& s)
{
  std::string out;
  for (char c : s) {
    switch (c) {
    case '&': out += "&amp;"; break;
    case '<': out += "&lt;"; break;
    case '>': out += "&gt;"; break;
    default: out += c;
    }
  }
  return out;
}

/// Smallest of {0.02, 0.05, 0.1, 0.2, 0.5, 1} covering `value`.
inline double nice_ceiling(double value)
{
  for (double c : {0.02, 0.05, 0.1, 0.2, 0.5, 1.0})
    if (value <= c)
      return c;
  return 1.0;
}

} // namespace detail

inline Figure render_figure(const std::vector<MetricsRecord>& records, unsigned k)
{
  std::vector<const MetricsRecord*> rows;
  for (const auto& r : records)
    if (r.k == k)
      rows.push_back(&r);
  if (rows.empty())
    throw std::invalid_argument("no metrics rows for k=" + std::to_string(k));

  std::set<unsigned> us;
  std::set<double> rhos;
  std::set<double> pi1s;
  std::vector<Method> methods;
  double alpha = rows.front()->alpha;
  double error_max = 0.0;
  for (const auto* r : rows) {
    us.insert(r->u);
    rhos.insert(r->rho);
    pi1s.insert(r->pi1);
    if (std::find(methods.begin(), methods.end(), r->method) == methods.end())
      methods.push_back(r->method);
    error_max = std::max(error_max, r->kfwer);
    if (r->alpha != alpha)
      throw std::invalid_argument("metrics rows for one k mix several alpha values");
  }
  std::sort(methods.begin(), methods.end(), [](Method a, Method b) {
    return std::find(std::begin(all_methods), std::end(all_methods), a) <
           std::find(std::begin(all_methods), std::end(all_methods), b);
  });
  const double error_top = detail::nice_ceiling(std::max(error_max, 1.6 * alpha));

  const double panel_w = 150, panel_h = 110, gap_x = 18, gap_y = 30, group_gap = 40;
  const double left = 60, top = 60, legend_h = 30;
  const std::size_t ncol = us.size();
  const std::size_t nrow = rhos.size();
  const double group_w = static_cast<double>(ncol) * (panel_w + gap_x) - gap_x;
  const double width = left + 2 * group_w + group_gap + 30;
  const double height = top + static_cast<double>(nrow) * (panel_h + gap_y) + legend_h + 30;

  const double x_lo = *pi1s.begin();
  const double x_hi = *pi1s.rbegin();
  const auto x_of = [&](double origin, double pi1) {
    const double span = x_hi > x_lo ? x_hi - x_lo : 1.0;
    return origin + (pi1 - x_lo) / span * panel_w;
  };
  const auto y_of = [&](double origin, double v, double y_top) {
    return origin + panel_h - std::clamp(v / y_top, 0.0, 1.0) * panel_h;
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << detail::num(width)
      << "\" height=\"" << detail::num(height) << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  const std::string error_label = k == 1 ? "FWER" : std::to_string(k) + "-FWER";
  svg << "<text x=\"" << detail::num(left + group_w / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">Empirical "
      << error_label << "</text>\n";
  svg << "<text x=\"" << detail::num(left + group_w + group_gap + group_w / 2)
      << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">Empirical TPR</text>\n";

  std::size_t row = 0;
  for (auto rho_it = rhos.rbegin(); rho_it != rhos.rend(); ++rho_it, ++row) {
    const double rho = *rho_it;
    const double oy = top + static_cast<double>(row) * (panel_h + gap_y);
    svg << "<text x=\"14\" y=\"" << detail::num(oy + panel_h / 2)
        << "\" transform=\"rotate(-90 14 " << detail::num(oy + panel_h / 2)
        << ")\" text-anchor=\"middle\">rho = " << detail::tick(rho) << "</text>\n";
    for (int group = 0; group < 2; ++group) {
      const double y_top = group == 0 ? error_top : 1.0;
      std::size_t col = 0;
      for (unsigned u : us) {
        const double ox = left + group * (group_w + group_gap) +
                          static_cast<double>(col++) * (panel_w + gap_x);
        svg << "<rect x=\"" << detail::num(ox) << "\" y=\"" << detail::num(oy) << "\" width=\""
            << detail::num(panel_w) << "\" height=\"" << detail::num(panel_h)
            << "\" fill=\"none\" stroke=\"#888\"/>\n";
        if (row == 0)
          svg << "<text x=\"" << detail::num(ox + panel_w / 2) << "\" y=\"" << detail::num(oy - 8)
              << "\" text-anchor=\"middle\">u = " << u << "</text>\n";
        for (double frac : {0.0, 0.5, 1.0}) {
          const double yv = y_of(oy, frac * y_top, y_top);
          svg << "<text x=\"" << detail::num(ox - 3) << "\" y=\"" << detail::num(yv + 3)
              << "\" text-anchor=\"end\" font-size=\"8\">" << detail::tick(frac * y_top)
              << "</text>\n";
        }
        for (double pi1 : pi1s)
          svg << "<text x=\"" << detail::num(x_of(ox, pi1)) << "\" y=\"" << detail::num(oy + panel_h + 10)
              << "\" text-anchor=\"middle\" font-size=\"7\">" << detail::tick(pi1) << "</text>\n";
        if (group == 0) {
          const double ya = y_of(oy, alpha, y_top);
          svg << "<line x1=\"" << detail::num(ox) << "\" y1=\"" << detail::num(ya) << "\" x2=\""
              << detail::num(ox + panel_w) << "\" y2=\"" << detail::num(ya)
              << "\" stroke=\"black\" stroke-dasharray=\"4 3\"/>\n";
        }
        for (Method m : methods) {
          std::vector<std::pair<double, double>> pts;
          for (const auto* r : rows)
            if (r->method == m && r->u == u && r->rho == rho)
              pts.emplace_back(r->pi1, group == 0 ? r->kfwer : r->tpr);
          if (pts.empty())
            continue;
          std::sort(pts.begin(), pts.end());
          svg << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << detail::method_colour(m)
              << "\" points=\"";
          for (const auto& [x, y] : pts)
            svg << detail::num(x_of(ox, x)) << ',' << detail::num(y_of(oy, y, y_top)) << ' ';
          svg << "\"/>\n";
          for (const auto& [x, y] : pts)
            svg << "<circle r=\"2\" fill=\"" << detail::method_colour(m) << "\" cx=\""
                << detail::num(x_of(ox, x)) << "\" cy=\"" << detail::num(y_of(oy, y, y_top))
                << "\"/>\n";
        }
      }
    }
  }

  const double ly = top + static_cast<double>(nrow) * (panel_h + gap_y) + 10;
  svg << "<text x=\"" << detail::num(left + group_w + group_gap / 2) << "\" y=\"" << detail::num(ly - 8)
      << "\" text-anchor=\"middle\">pi1</text>\n";
  double lx = left;
  for (Method m : methods) {
    svg << "<line x1=\"" << detail::num(lx) << "\" y1=\"" << detail::num(ly + 10) << "\" x2=\""
        << detail::num(lx + 20) << "\" y2=\"" << detail::num(ly + 10) << "\" stroke=\""
        << detail::method_colour(m) << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << detail::num(lx + 24) << "\" y=\"" << detail::num(ly + 13) << "\">"
        << detail::escape(std::string(method_name(m))) << "</text>\n";
    lx += 135;
  }
  svg << "<line x1=\"" << detail::num(lx) << "\" y1=\"" << detail::num(ly + 10) << "\" x2=\""
      << detail::num(lx + 20) << "\" y2=\"" << detail::num(ly + 10)
      << "\" stroke=\"black\" stroke-dasharray=\"4 3\"/>\n";
  svg << "<text x=\"" << detail::num(lx + 24) << "\" y=\"" << detail::num(ly + 13) << "\">alpha = "
      << detail::tick(alpha) << "</text>\n";
  svg << "</svg>\n";
  return {k, svg.str()};
}

/// One figure per distinct k, ascending.
inline std::vector<Figure> render_figures(const std::vector<MetricsRecord>& records)
{
  std::set<unsigned> ks;
  for (const auto& r : records)
    ks.insert(r.k);
  if (ks.empty())
    throw std::invalid_argument("no metrics rows to plot");
  std::vector<Figure> out;
  for (unsigned k : ks)
    out.push_back(render_figure(records, k));
  return out;
}

} // namespace adabon

#endif // ADABON_PLOT_HPP
