#include "nbandit/cli/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

#include "nbandit/cli/runner.hpp"

namespace nbandit::cli {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

template <class T>
T parse_field(const std::string& s, const std::string& where) {
  std::istringstream is(s);
  T v{};
  is >> v;
  if (!is || !is.eof()) throw std::runtime_error(where + ": cannot parse '" + s + "'");
  return v;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace

std::vector<RegretRow> read_regret_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kRegretHeader) throw std::runtime_error(path.string() + ": header does not match the regret schema");

  std::vector<RegretRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (f.size() != 7) throw std::runtime_error(where + ": expected 7 fields");
    RegretRow r;
    r.run_id = parse_field<int>(f[0], where);
    r.seed = parse_field<std::uint64_t>(f[1], where);
    r.algorithm = f[2];
    r.t = parse_field<int>(f[3], where);
    r.cumulative_regret = parse_field<double>(f[4], where);
    r.retrains_total = parse_field<int>(f[5], where);
    r.wall_ms = parse_field<double>(f[6], where);
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw std::runtime_error(path.string() + ": no data rows");
  return rows;
}

std::vector<Curve> aggregate_curves(const std::vector<RegretRow>& rows) {
  if (rows.empty()) throw std::runtime_error("nothing to plot");
  std::vector<std::string> order;
  // algorithm -> run key -> (t -> regret)
  std::map<std::string, std::map<std::pair<int, std::uint64_t>, std::map<int, double>>> grouped;
  for (const auto& r : rows) {
    if (!grouped.count(r.algorithm)) order.push_back(r.algorithm);
    auto& run = grouped[r.algorithm][{r.run_id, r.seed}];
    if (!run.emplace(r.t, r.cumulative_regret).second)
      throw std::runtime_error("duplicate round " + std::to_string(r.t) + " for " + r.algorithm);
  }

  std::vector<Curve> curves;
  for (const auto& name : order) {
    const auto& runs = grouped[name];
    Curve c;
    c.algorithm = name;
    c.runs = static_cast<int>(runs.size());
    const auto& first = runs.begin()->second;
    for (const auto& [key, series] : runs) {
      if (series.size() != first.size() ||
          !std::equal(series.begin(), series.end(), first.begin(), [](auto& a, auto& b) { return a.first == b.first; }))
        throw std::runtime_error(name + ": runs cover different rounds");
    }
    for (const auto& [t, unused] : first) {
      double sum = 0.0;
      for (const auto& [key, series] : runs) sum += series.at(t);
      const double mean = sum / c.runs;
      double ss = 0.0;
      for (const auto& [key, series] : runs) ss += (series.at(t) - mean) * (series.at(t) - mean);
      c.t.push_back(t);
      c.mean.push_back(mean);
      c.std.push_back(c.runs > 1 ? std::sqrt(ss / (c.runs - 1)) : 0.0);
    }
    curves.push_back(std::move(c));
  }
  return curves;
}

std::string render_svg(const std::vector<Curve>& curves) {
  if (curves.empty()) throw std::runtime_error("nothing to plot");
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2"};
  const double W = 800, H = 500, left = 70, right = 180, top = 30, bottom = 50;
  const double pw = W - left - right, ph = H - top - bottom;

  double tmin = curves[0].t.front(), tmax = curves[0].t.back(), ymax = 0.0;
  for (const auto& c : curves) {
    tmin = std::min<double>(tmin, c.t.front());
    tmax = std::max<double>(tmax, c.t.back());
    for (std::size_t i = 0; i < c.t.size(); ++i) ymax = std::max(ymax, c.mean[i] + c.std[i]);
  }
  if (tmax <= tmin) tmax = tmin + 1;
  if (ymax <= 0.0) ymax = 1.0;
  auto X = [&](double t) { return left + (t - tmin) / (tmax - tmin) * pw; };
  auto Y = [&](double y) { return top + ph - std::max(0.0, y) / ymax * ph; };

  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << ' ' << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<g stroke=\"black\" stroke-width=\"1\">\n"
     << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph << "\"/>\n"
     << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph << "\"/>\n"
     << "</g>\n";
  os << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double t = tmin + (tmax - tmin) * i / 4.0, y = ymax * i / 4.0;
    os << "<text x=\"" << X(t) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">"
       << std::setprecision(0) << t << std::setprecision(2) << "</text>\n";
    os << "<text x=\"" << left - 6 << "\" y=\"" << Y(y) + 4 << "\" text-anchor=\"end\">" << y << "</text>\n";
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">round t</text>\n";
  os << "<text transform=\"rotate(-90)\" x=\"" << -(top + ph / 2) << "\" y=\"16\" text-anchor=\"middle\">"
     << "cumulative regret</text>\n</g>\n";

  for (std::size_t k = 0; k < curves.size(); ++k) {
    const auto& c = curves[k];
    const char* colour = palette[k % std::size(palette)];
    if (c.runs > 1) {
      os << "<polygon class=\"band\" fill=\"" << colour << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
      for (std::size_t i = 0; i < c.t.size(); ++i) os << X(c.t[i]) << ',' << Y(c.mean[i] + c.std[i]) << ' ';
      for (std::size_t i = c.t.size(); i-- > 0;) os << X(c.t[i]) << ',' << Y(c.mean[i] - c.std[i]) << ' ';
      os << "\"/>\n";
    }
    os << "<polyline class=\"mean\" fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < c.t.size(); ++i) os << X(c.t[i]) << ',' << Y(c.mean[i]) << ' ';
    os << "\"/>\n";
    const double ly = top + 10 + 20.0 * static_cast<double>(k);
    os << "<line x1=\"" << left + pw + 15 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 40 << "\" y2=\"" << ly
       << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << left + pw + 45 << "\" y=\"" << ly + 4
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << xml_escape(c.algorithm) << " (n=" << c.runs
       << ")</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void plot_files(const std::vector<std::filesystem::path>& inputs, const std::filesystem::path& output) {
  if (inputs.empty()) throw std::runtime_error("no input CSVs");
  std::vector<RegretRow> rows;
  for (const auto& p : inputs) {
    auto part = read_regret_csv(p);
    rows.insert(rows.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  const std::string svg = render_svg(aggregate_curves(rows));
  std::ofstream out(output, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + output.string());
  out << svg;
  if (!out) throw std::runtime_error("write failed for " + output.string());
}

}  // namespace nbandit::cli
