#include "internal.hpp"

#include "dtl/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace dtl::cli {

namespace {

struct Row {
  std::string group;  // sigma text when present, else kl text
  double kl = 0.0;
  std::size_t target_size = 0;
  std::string algorithm;
  std::string schedule;
  double accuracy = 0.0;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
  double sd = 0.0;
};

struct Series {
  std::string label;
  std::vector<Point> points;
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double number(const std::string& s, std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw UsageError("line " + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

std::vector<Row> parse_rows(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line)) throw UsageError("results file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line);
  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  std::vector<std::string> missing;
  for (const char* need : {"kl", "target_size", "algorithm", "test_accuracy"}) {
    if (!column(need)) missing.emplace_back(need);
  }
  if (!missing.empty()) {
    std::string names;
    for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
    throw UsageError("results file is missing column(s): " + names);
  }
  const std::size_t kl = *column("kl"), size = *column("target_size"), alg = *column("algorithm"),
                    acc = *column("test_accuracy");
  const auto sigma = column("sigma"), schedule = column("lambda_schedule"), status = column("status");

  std::vector<Row> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != header.size()) {
      throw UsageError("line " + std::to_string(lineno) + " has " + std::to_string(f.size()) +
                       " fields, header has " + std::to_string(header.size()));
    }
    if (status && f[*status] != "ok") continue;
    Row r;
    r.group = sigma ? f[*sigma] : f[kl];
    r.kl = number(f[kl], lineno);
    r.target_size = static_cast<std::size_t>(number(f[size], lineno));
    r.algorithm = f[alg];
    r.schedule = schedule ? f[*schedule] : "";
    r.accuracy = number(f[acc], lineno);
    rows.push_back(std::move(r));
  }
  return rows;
}

template <class T>
bool keep(const std::vector<T>& allowed, const T& v) {
  return allowed.empty() || std::find(allowed.begin(), allowed.end(), v) != allowed.end();
}

// Mean and sample std of accuracy per x group, sorted by mean kl.
std::vector<Point> points(const std::vector<const Row*>& rows) {
  std::map<std::string, std::vector<const Row*>> by_group;
  for (const Row* r : rows) by_group[r->group].push_back(r);
  std::vector<Point> out;
  for (const auto& [group, members] : by_group) {
    Point p;
    const double n = static_cast<double>(members.size());
    for (const Row* m : members) {
      p.x += m->kl;
      p.y += m->accuracy;
    }
    p.x /= n;
    p.y /= n;
    if (members.size() > 1) {
      double ss = 0.0;
      for (const Row* m : members) ss += (m->accuracy - p.y) * (m->accuracy - p.y);
      p.sd = std::sqrt(ss / (n - 1.0));
    }
    out.push_back(p);
  }
  std::sort(out.begin(), out.end(), [](const Point& a, const Point& b) {
    return std::tie(a.x, a.y) < std::tie(b.x, b.y);
  });
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string svg(const std::vector<Series>& series, const std::string& title) {
  constexpr double W = 720, H = 440, left = 70, right = 190, top = 40, bottom = 60;
  const double pw = W - left - right, ph = H - top - bottom;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (const auto& p : s.points) {
      x0 = std::min(x0, p.x);
      x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y - p.sd);
      y1 = std::max(y1, p.y + p.sd);
    }
  }
  y0 = std::max(0.0, y0);
  y1 = std::min(1.0, y1);
  if (x1 - x0 < 1e-9) {
    x0 -= 0.5;
    x1 += 0.5;
  }
  if (y1 - y0 < 1e-9) {
    y0 = std::max(0.0, y0 - 0.05);
    y1 = std::min(1.0, y1 + 0.05);
  }
  auto sx = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto sy = [&](double y) { return top + ph - (std::clamp(y, y0, y1) - y0) / (y1 - y0) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" viewBox=\"0 0 " << W << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  o << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
    << escape(title) << "</text>\n";
  o << "<g class=\"axes\" stroke=\"black\" fill=\"none\">\n";
  o << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(top + ph) << "\" x2=\"" << fmt(left + pw)
    << "\" y2=\"" << fmt(top + ph) << "\"/>\n";
  o << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(top) << "\" x2=\"" << fmt(left) << "\" y2=\""
    << fmt(top + ph) << "\"/>\n";
  o << "</g>\n<g class=\"ticks\">\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = x0 + (x1 - x0) * i / 5.0, yv = y0 + (y1 - y0) * i / 5.0;
    o << "<line x1=\"" << fmt(sx(xv)) << "\" y1=\"" << fmt(top + ph) << "\" x2=\"" << fmt(sx(xv))
      << "\" y2=\"" << fmt(top + ph + 5) << "\" stroke=\"black\"/>";
    o << "<text x=\"" << fmt(sx(xv)) << "\" y=\"" << fmt(top + ph + 18)
      << "\" text-anchor=\"middle\">" << tick_label(xv) << "</text>\n";
    o << "<line x1=\"" << fmt(left - 5) << "\" y1=\"" << fmt(sy(yv)) << "\" x2=\"" << fmt(left)
      << "\" y2=\"" << fmt(sy(yv)) << "\" stroke=\"black\"/>";
    o << "<text x=\"" << fmt(left - 8) << "\" y=\"" << fmt(sy(yv) + 4)
      << "\" text-anchor=\"end\">" << tick_label(yv) << "</text>\n";
  }
  o << "</g>\n";
  o << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"" << fmt(H - 15)
    << "\" text-anchor=\"middle\">KL divergence (source || target)</text>\n";
  o << "<text transform=\"translate(18," << fmt(top + ph / 2)
    << ") rotate(-90)\" text-anchor=\"middle\">target test accuracy</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = kPalette[i % std::size(kPalette)];
    const bool band = std::any_of(s.points.begin(), s.points.end(), [](const Point& p) { return p.sd > 0; });
    o << "<g class=\"series\" data-label=\"" << escape(s.label) << "\">\n";
    if (band) {
      o << "<polygon fill=\"" << color << "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
      for (const auto& p : s.points) o << fmt(sx(p.x)) << ',' << fmt(sy(p.y + p.sd)) << ' ';
      for (auto it = s.points.rbegin(); it != s.points.rend(); ++it) {
        o << fmt(sx(it->x)) << ',' << fmt(sy(it->y - it->sd)) << ' ';
      }
      o << "\"/>\n";
    }
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t k = 0; k < s.points.size(); ++k) {
      o << (k ? " " : "") << fmt(sx(s.points[k].x)) << ',' << fmt(sy(s.points[k].y));
    }
    o << "\"/>\n";
    for (const auto& p : s.points) {
      o << "<circle cx=\"" << fmt(sx(p.x)) << "\" cy=\"" << fmt(sy(p.y)) << "\" r=\"3\" fill=\""
        << color << "\"/>\n";
    }
    const double ly = top + 10 + 18.0 * static_cast<double>(i);
    o << "<line x1=\"" << fmt(left + pw + 15) << "\" y1=\"" << fmt(ly) << "\" x2=\""
      << fmt(left + pw + 35) << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << color
      << "\" stroke-width=\"2\"/>";
    o << "<text x=\"" << fmt(left + pw + 40) << "\" y=\"" << fmt(ly + 4) << "\">" << escape(s.label)
      << "</text>\n";
    o << "</g>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace

Figure parse_figure(const std::string& name) {
  if (name == "acc_vs_kl") return Figure::acc_vs_kl;
  if (name == "model_comparison") return Figure::model_comparison;
  throw UsageError("unknown figure '" + name + "' (expected acc_vs_kl or model_comparison)");
}

std::string render_plot(const std::string& csv, Figure figure, const PlotFilter& filter) {
  const std::vector<Row> all = parse_rows(csv);
  std::vector<const Row*> rows;
  for (const Row& r : all) {
    if (keep(filter.algorithms, r.algorithm) && keep(filter.target_sizes, r.target_size) &&
        keep(filter.schedules, r.schedule)) {
      rows.push_back(&r);
    }
  }
  if (rows.empty()) throw UsageError("no rows matched");

  std::set<std::string> algorithms;
  std::set<std::size_t> sizes;
  for (const Row* r : rows) {
    algorithms.insert(r->algorithm);
    sizes.insert(r->target_size);
  }

  std::vector<Series> series;
  std::string title;
  if (figure == Figure::acc_vs_kl) {
    if (algorithms.size() != 1) {
      throw UsageError("acc_vs_kl shows one algorithm; rows contain " +
                       std::to_string(algorithms.size()) + ", select one with --algorithm");
    }
    std::set<std::string> schedules;
    for (const Row* r : rows) schedules.insert(r->schedule);
    for (std::size_t size : sizes) {
      for (const auto& sched : schedules) {
        std::vector<const Row*> members;
        for (const Row* r : rows) {
          if (r->target_size == size && r->schedule == sched) members.push_back(r);
        }
        if (members.empty()) continue;
        std::string label = "n=" + std::to_string(size);
        if (schedules.size() > 1) label += " " + sched;
        series.push_back({label, points(members)});
      }
    }
    title = "Accuracy vs KL: " + *algorithms.begin();
  } else {
    if (sizes.size() != 1) {
      throw UsageError("model_comparison fixes one target size; rows contain " +
                       std::to_string(sizes.size()) + ", select one with --target-size");
    }
    std::map<std::string, std::set<std::string>> schedules;
    for (const Row* r : rows) schedules[r->algorithm].insert(r->schedule);
    for (const auto& [alg, scheds] : schedules) {
      for (const auto& sched : scheds) {
        std::vector<const Row*> members;
        for (const Row* r : rows) {
          if (r->algorithm == alg && r->schedule == sched) members.push_back(r);
        }
        std::string label = alg;
        if (scheds.size() > 1) label += " " + sched;
        series.push_back({label, points(members)});
      }
    }
    title = "Model comparison (target sample size = " + std::to_string(*sizes.begin()) + ")";
  }
  return svg(series, title);
}

}  // namespace dtl::cli
