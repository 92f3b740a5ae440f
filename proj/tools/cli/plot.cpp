#include "cli/plot.hpp"

#include "semcom/error.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

namespace semcom::cli {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_number(const std::string& s, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("results CSV line " + std::to_string(line) + ": '" + s + "' is not a number");
  }
}

std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += ch;
    }
  }
  return out;
}

}  // namespace

ResultsTable read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("results CSV is empty");
  const auto header = split_csv(line);
  const std::vector<std::string> fixed{"scheme", "velocity_kmh", "R", "snr_db", "miou"};
  if (header.size() < fixed.size() || !std::equal(fixed.begin(), fixed.end(), header.begin())) {
    throw DataError("results CSV header must start with scheme,velocity_kmh,R,snr_db,miou");
  }
  ResultsTable t;
  for (std::size_t i = fixed.size(); i < header.size(); ++i) {
    if (header[i].rfind("iou_", 0) != 0) throw DataError("unexpected results column '" + header[i] + "'");
    t.class_names.push_back(header[i].substr(4));
  }
  int n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != header.size()) throw DataError("results CSV line " + std::to_string(n) + " has the wrong field count");
    ResultRow r;
    r.scheme = f[0];
    r.velocity_kmh = parse_number(f[1], n);
    r.r = parse_number(f[2], n);
    r.snr_db = parse_number(f[3], n);
    r.miou = parse_number(f[4], n);
    for (std::size_t i = fixed.size(); i < f.size(); ++i) {
      if (f[i].empty()) {
        r.iou.emplace_back();
      } else {
        r.iou.emplace_back(parse_number(f[i], n));
      }
    }
    t.rows.push_back(std::move(r));
  }
  return t;
}

std::string render_miou_svg(const std::vector<ResultRow>& rows, const std::string& title) {
  std::map<std::string, std::vector<std::pair<double, double>>> series;
  for (const auto& r : rows) {
    std::ostringstream name;
    name << r.scheme << " v=" << r.velocity_kmh << "km/h R=" << std::setprecision(4) << r.r;
    series[name.str()].emplace_back(r.snr_db, r.miou);
  }
  double xmin = 0.0;
  double xmax = 1.0;
  if (!rows.empty()) {
    auto [lo, hi] = std::minmax_element(rows.begin(), rows.end(),
                                        [](const ResultRow& a, const ResultRow& b) { return a.snr_db < b.snr_db; });
    xmin = lo->snr_db;
    xmax = hi->snr_db > lo->snr_db ? hi->snr_db : lo->snr_db + 1.0;
  }
  const double w = 720;
  const double h = 480;
  const double left = 70;
  const double right = 250;
  const double top = 40;
  const double bottom = 60;
  const double pw = w - left - right;
  const double ph = h - top - bottom;
  auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  auto sy = [&](double y) { return top + (1.0 - y) * ph; };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  std::ostringstream svg;
  svg << std::fixed << std::setprecision(2);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << left + pw / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape(title) << "</text>\n";
  for (int i = 0; i <= 10; ++i) {
    const double y = i / 10.0;
    svg << "<line x1=\"" << left << "\" y1=\"" << sy(y) << "\" x2=\"" << left + pw << "\" y2=\"" << sy(y)
        << "\" stroke=\"#e0e0e0\"/>\n";
    svg << "<text x=\"" << left - 6 << "\" y=\"" << sy(y) + 4 << "\" text-anchor=\"end\">" << std::setprecision(1) << y
        << "</text>\n" << std::setprecision(2);
  }
  const int xticks = 6;
  for (int i = 0; i <= xticks; ++i) {
    const double x = xmin + (xmax - xmin) * i / xticks;
    svg << "<text x=\"" << sx(x) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << std::setprecision(1)
        << x << "</text>\n" << std::setprecision(2);
  }
  svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << left + pw / 2 << "\" y=\"" << h - 18 << "\" text-anchor=\"middle\">SNR (dB)</text>\n";
  svg << "<text x=\"18\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << top + ph / 2
      << ")\">mIoU</text>\n";
  int idx = 0;
  for (auto& [name, pts] : series) {
    std::sort(pts.begin(), pts.end());
    const char* color = colors[idx % 8];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : pts) svg << sx(x) << ',' << sy(std::clamp(y, 0.0, 1.0)) << ' ';
    svg << "\"/>\n";
    for (const auto& [x, y] : pts) {
      svg << "<circle cx=\"" << sx(x) << "\" cy=\"" << sy(std::clamp(y, 0.0, 1.0)) << "\" r=\"3\" fill=\"" << color
          << "\"/>\n";
    }
    const double ly = top + 10 + idx * 18;
    svg << "<line x1=\"" << left + pw + 12 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 32 << "\" y2=\"" << ly
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << left + pw + 38 << "\" y=\"" << ly + 4 << "\">" << escape(name) << "</text>\n";
    ++idx;
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace semcom::cli
