#include "svg.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include "cart/errors.hpp"

namespace cart::cli {
namespace {

// Pixel coordinate with two decimals, locale-free.
std::string px(double v) {
  char buf[32];
  auto res =
      std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 2);
  return std::string(buf, res.ptr);
}

// Shortest round-trip form, reused for tick labels.
std::string num(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double nice_num(double range, bool round) {
  double expv = std::floor(std::log10(range));
  double f = range / std::pow(10.0, expv);
  double nf;
  if (round)
    nf = f < 1.5 ? 1 : f < 3 ? 2 : f < 7 ? 5 : 10;
  else
    nf = f <= 1 ? 1 : f <= 2 ? 2 : f <= 5 ? 5 : 10;
  return nf * std::pow(10.0, expv);
}

std::vector<double> linear_ticks(double lo, double hi, int target) {
  double step = nice_num(nice_num(hi - lo, false) / (target - 1), true);
  double t0 = std::floor(lo / step) * step;
  std::vector<double> out;
  for (double t = t0; t <= hi + 0.5 * step; t += step) {
    if (t >= lo - 0.5 * step) out.push_back(t);
  }
  return out;
}

struct Series {
  std::string name;
  const char* color;
  std::size_t col;
};

}  // namespace

std::string trajectory_svg(const CsvTable& t, const PlotOptions& opts) {
  if (t.rows.empty()) throw InvalidInputError("csv: no data rows to plot");
  if (t.header.empty()) throw InvalidInputError("csv: missing header");

  static constexpr const char* kColors[3] = {"#c23b22", "#1f6fb2", "#2e8b57"};
  std::vector<Series> series;
  for (std::size_t c = 1; c < t.header.size(); ++c) {
    const std::string& h = t.header[c];
    if (h == "x1" || h == "x2" || h == "x3")
      series.push_back({h, kColors[h[1] - '1'], c});
  }
  if (series.empty())
    throw InvalidInputError("csv: no population columns (x1,x2,x3) to plot");

  // Data ranges. In log mode only positive values count.
  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = x_lo, y_hi = -x_lo;
  for (const auto& row : t.rows) {
    if (!row[0]) continue;
    x_lo = std::min(x_lo, *row[0]);
    x_hi = std::max(x_hi, *row[0]);
    for (const Series& s : series) {
      if (!row[s.col]) continue;
      double v = *row[s.col];
      if (opts.log_y && v <= 0.0) continue;
      double yv = opts.log_y ? std::log10(v) : v;
      y_lo = std::min(y_lo, yv);
      y_hi = std::max(y_hi, yv);
    }
  }
  if (!(x_lo <= x_hi))
    throw InvalidInputError("csv: first column has no values");
  if (!(y_lo <= y_hi))
    throw InvalidInputError(
        opts.log_y ? "csv: no positive values to plot on a log axis"
                   : "csv: no values to plot");
  if (x_hi == x_lo) {
    x_lo -= 0.5;
    x_hi += 0.5;
  }
  if (y_hi == y_lo) {
    y_lo -= 0.5;
    y_hi += 0.5;
  }

  // Axis ranges snapped to ticks.
  std::vector<double> xt = linear_ticks(x_lo, x_hi, 8);
  std::vector<double> yt;
  if (opts.log_y) {
    int e_lo = static_cast<int>(std::floor(y_lo));
    int e_hi = static_cast<int>(std::ceil(y_hi));
    if (e_hi == e_lo) ++e_hi;
    int step = std::max(1, (e_hi - e_lo + 11) / 12);
    for (int e = e_lo; e <= e_hi; e += step) yt.push_back(e);
    y_lo = e_lo;
    y_hi = yt.back();
  } else {
    yt = linear_ticks(y_lo, y_hi, 6);
    y_lo = std::min(y_lo, yt.front());
    y_hi = std::max(y_hi, yt.back());
  }
  x_lo = std::min(x_lo, xt.front());
  x_hi = std::max(x_hi, xt.back());

  const double ml = 76, mr = 24, mt = opts.title.empty() ? 24 : 44, mb = 52;
  const double W = opts.width, H = opts.height;
  const double pw = W - ml - mr, ph = H - mt - mb;
  auto X = [&](double v) { return ml + (v - x_lo) / (x_hi - x_lo) * pw; };
  auto Y = [&](double v) { return H - mb - (v - y_lo) / (y_hi - y_lo) * ph; };

  std::string o;
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(W) +
       "\" height=\"" + num(H) + "\" viewBox=\"0 0 " + num(W) + " " + num(H) +
       "\" font-family=\"Helvetica,Arial,sans-serif\" font-size=\"12\">\n";
  o += "<rect width=\"" + num(W) + "\" height=\"" + num(H) +
       "\" fill=\"#ffffff\"/>\n";
  if (!opts.title.empty()) {
    std::string title;
    for (char c : opts.title) {  // escape the few XML-significant characters
      if (c == '&')
        title += "&amp;";
      else if (c == '<')
        title += "&lt;";
      else if (c == '>')
        title += "&gt;";
      else
        title += c;
    }
    o += "<text x=\"" + px(W / 2) +
         "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" + title +
         "</text>\n";
  }

  // grid and tick labels
  for (double v : yt) {
    double y = Y(v);
    o += "<line x1=\"" + px(ml) + "\" y1=\"" + px(y) + "\" x2=\"" +
         px(W - mr) + "\" y2=\"" + px(y) + "\" stroke=\"#e0e0e0\"/>\n";
    std::string label = opts.log_y ? ("1e" + num(v)) : num(v);
    o += "<text x=\"" + px(ml - 6) + "\" y=\"" + px(y + 4) +
         "\" text-anchor=\"end\">" + label + "</text>\n";
  }
  for (double v : xt) {
    double x = X(v);
    o += "<line x1=\"" + px(x) + "\" y1=\"" + px(mt) + "\" x2=\"" + px(x) +
         "\" y2=\"" + px(H - mb) + "\" stroke=\"#e0e0e0\"/>\n";
    o += "<text x=\"" + px(x) + "\" y=\"" + px(H - mb + 18) +
         "\" text-anchor=\"middle\">" + num(v) + "</text>\n";
  }

  // frame
  o += "<rect x=\"" + px(ml) + "\" y=\"" + px(mt) + "\" width=\"" + px(pw) +
       "\" height=\"" + px(ph) + "\" fill=\"none\" stroke=\"#404040\"/>\n";

  // axis titles
  o += "<text x=\"" + px(ml + pw / 2) + "\" y=\"" + px(H - 12) +
       "\" text-anchor=\"middle\">t (days)</text>\n";
  o += "<text x=\"18\" y=\"" + px(mt + ph / 2) +
       "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
       px(mt + ph / 2) + ")\">cells" +
       (opts.log_y ? std::string(" (log scale)") : std::string()) +
       "</text>\n";

  // series, broken at missing or (log mode) non-positive points
  for (const Series& s : series) {
    std::string points;
    auto flush = [&]() {
      if (points.empty()) return;
      o += "<polyline fill=\"none\" stroke=\"" + std::string(s.color) +
           "\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
      points.clear();
    };
    for (const auto& row : t.rows) {
      if (!row[0] || !row[s.col]) {
        flush();
        continue;
      }
      double v = *row[s.col];
      if (opts.log_y && v <= 0.0) {
        flush();
        continue;
      }
      double yv = opts.log_y ? std::log10(v) : v;
      if (!points.empty()) points += ' ';
      points += px(X(*row[0])) + "," + px(Y(yv));
    }
    flush();
  }

  // legend, top right inside the frame
  double lx = W - mr - 96, ly = mt + 14;
  for (const Series& s : series) {
    o += "<line x1=\"" + px(lx) + "\" y1=\"" + px(ly - 4) + "\" x2=\"" +
         px(lx + 22) + "\" y2=\"" + px(ly - 4) + "\" stroke=\"" +
         std::string(s.color) + "\" stroke-width=\"2\"/>\n";
    o += "<text x=\"" + px(lx + 28) + "\" y=\"" + px(ly) + "\">" + s.name +
         "</text>\n";
    ly += 17;
  }

  o += "</svg>\n";
  return o;
}

}  // namespace cart::cli
