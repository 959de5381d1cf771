#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gwsearch/io.hpp"

namespace gwsearch::report {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Minimal SVG plotting
// ---------------------------------------------------------------------------

struct Series {
  std::string name;
  std::string color = "#1f6fb2";
  std::vector<std::pair<double, double>> points;
  bool line = true;
  bool markers = false;
};

struct PlotOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  std::vector<double> x_vlines;  // dashed vertical guides (data units)
  int width = 860;
  int height = 480;
};

inline std::string svg_plot(const std::vector<Series>& series, const PlotOptions& opt) {
  const double ml = 70, mr = 20, mt = 40, mb = 50;
  const double pw = opt.width - ml - mr;
  const double ph = opt.height - mt - mb;

  auto tx = [&](double x) { return opt.log_x ? std::log10(std::max(x, 1e-300)) : x; };
  double x_min = 1e300, x_max = -1e300, y_min = 1e300, y_max = -1e300;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      x_min = std::min(x_min, tx(x));
      x_max = std::max(x_max, tx(x));
      y_min = std::min(y_min, y);
      y_max = std::max(y_max, y);
    }
  }
  for (double v : opt.x_vlines) {
    x_min = std::min(x_min, tx(v));
    x_max = std::max(x_max, tx(v));
  }
  if (!(x_max > x_min)) {
    x_min -= 1.0;
    x_max += 1.0;
  }
  if (!(y_max > y_min)) {
    y_min -= 1.0;
    y_max += 1.0;
  }
  const double ypad = 0.05 * (y_max - y_min);
  y_min -= ypad;
  y_max += ypad;

  auto px = [&](double x) { return ml + (tx(x) - x_min) / (x_max - x_min) * pw; };
  auto py = [&](double y) { return mt + (1.0 - (y - y_min) / (y_max - y_min)) * ph; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\""
      << opt.height << "\" viewBox=\"0 0 " << opt.width << " " << opt.height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << opt.width / 2 << "\" y=\"22\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"15\">" << opt.title << "</text>\n";
  out << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#444\"/>\n";

  auto fmt = [](double v) {
    std::ostringstream s;
    s.precision(4);
    s << v;
    return s.str();
  };
  // axis extremes
  out << "<text x=\"" << ml << "\" y=\"" << opt.height - 28
      << "\" font-family=\"sans-serif\" font-size=\"11\">"
      << (opt.log_x ? "1e" + fmt(x_min) : fmt(x_min)) << "</text>\n";
  out << "<text x=\"" << ml + pw << "\" y=\"" << opt.height - 28
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
      << (opt.log_x ? "1e" + fmt(x_max) : fmt(x_max)) << "</text>\n";
  out << "<text x=\"" << ml - 6 << "\" y=\"" << mt + ph
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(y_min)
      << "</text>\n";
  out << "<text x=\"" << ml - 6 << "\" y=\"" << mt + 10
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(y_max)
      << "</text>\n";
  out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << opt.height - 10
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << opt.x_label
      << "</text>\n";
  out << "<text x=\"16\" y=\"" << mt + ph / 2
      << "\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 "
      << mt + ph / 2 << ")\" text-anchor=\"middle\">" << opt.y_label << "</text>\n";

  for (double v : opt.x_vlines) {
    const double x = px(v);
    out << "<line x1=\"" << x << "\" y1=\"" << mt << "\" x2=\"" << x << "\" y2=\"" << mt + ph
        << "\" stroke=\"#999\" stroke-dasharray=\"5,4\"/>\n";
  }

  int legend_y = static_cast<int>(mt) + 14;
  for (const auto& s : series) {
    if (s.points.empty()) continue;
    if (s.line && s.points.size() > 1) {
      out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.6\" points=\"";
      for (const auto& [x, y] : s.points) out << px(x) << ',' << py(y) << ' ';
      out << "\"/>\n";
    }
    if (s.markers || !s.line) {
      for (const auto& [x, y] : s.points) {
        out << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"" << s.color
            << "\"/>\n";
      }
    }
    out << "<rect x=\"" << ml + 10 << "\" y=\"" << legend_y - 9 << "\" width=\"12\" height=\"4\""
        << " fill=\"" << s.color << "\"/>\n";
    out << "<text x=\"" << ml + 28 << "\" y=\"" << legend_y
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << s.name << "</text>\n";
    legend_y += 16;
  }
  out << "</svg>\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Run-directory report
// ---------------------------------------------------------------------------

inline std::vector<std::string> missing_artifacts(const fs::path& run_dir) {
  std::vector<std::string> missing;
  for (const char* name : {"analysis.json", "tree.json", "runlog.jsonl", "summary.json"}) {
    if (!fs::exists(run_dir / name)) missing.push_back(name);
  }
  return missing;
}

// Emits fitness trajectory (with phase-transition markers), diversity series,
// the sensitivity-vs-FAR comparison for the seed and best candidates, and a
// text summary with the elite lineage. Pure function of the run directory.
inline void write_report(const fs::path& run_dir) {
  const auto missing = missing_artifacts(run_dir);
  if (!missing.empty()) {
    std::string msg = "run directory incomplete; missing:";
    for (const auto& m : missing) msg += " " + m;
    throw std::runtime_error(msg);
  }

  const json analysis = json::parse(io::read_text(run_dir / "analysis.json"));
  const json tree = json::parse(io::read_text(run_dir / "tree.json"));
  const json summary = json::parse(io::read_text(run_dir / "summary.json"));

  // Fitness trajectory
  {
    Series evals{"fitness per evaluation", "#7aa6c2", {}, false, true};
    Series best{"best so far", "#c23b22", {}, true, false};
    Series pts{"phase transitions", "#e69500", {}, false, true};
    const auto& fitness = analysis.at("fitness");
    for (std::size_t i = 0; i < fitness.size(); ++i) {
      evals.points.emplace_back(static_cast<double>(i), fitness[i].get<double>());
    }
    const auto& bests = analysis.at("best_so_far");
    for (std::size_t i = 0; i < bests.size(); ++i) {
      best.points.emplace_back(static_cast<double>(i), bests[i].get<double>());
    }
    for (const auto& pt : analysis.at("phase_transitions")) {
      pts.points.emplace_back(pt.at("eval").get<double>(), pt.at("fitness").get<double>());
    }
    PlotOptions opt;
    opt.title = "Fitness trajectory";
    opt.x_label = "evaluation";
    opt.y_label = "fitness (Mpc dex)";
    io::write_text(run_dir / "fitness_trajectory.svg", svg_plot({evals, best, pts}, opt));
  }

  // Diversity series
  {
    Series shannon{"Shannon index", "#1f6fb2", {}, true, false};
    Series cid{"CID", "#c23b22", {}, true, false};
    for (const auto& d : analysis.at("diversity")) {
      shannon.points.emplace_back(d.at("eval").get<double>(), d.at("shannon").get<double>());
      cid.points.emplace_back(d.at("eval").get<double>(), d.at("cid").get<double>());
    }
    PlotOptions opt;
    opt.title = "Population diversity (sliding window)";
    opt.x_label = "evaluation";
    opt.y_label = "index value";
    io::write_text(run_dir / "diversity.svg", svg_plot({shannon, cid}, opt));
  }

  // Sensitivity vs FAR, clamped to the evaluation range
  {
    std::vector<Series> series;
    const struct {
      const char* file;
      const char* name;
      const char* color;
    } curves[] = {
        {"seed_eval.json", "seed candidate", "#7aa6c2"},
        {"best_eval.json", "best candidate", "#c23b22"},
    };
    for (const auto& c : curves) {
      if (!fs::exists(run_dir / c.file)) continue;
      const auto r = io::eval_result_from_json(json::parse(io::read_text(run_dir / c.file)));
      Series s{c.name, c.color, {}, true, true};
      for (std::size_t i = 0; i < r.far.size(); ++i) {
        if (r.far[i] < 4.0 || r.far[i] > 1000.0) continue;
        s.points.emplace_back(r.far[i], r.d_sens[i]);
      }
      series.push_back(std::move(s));
    }
    PlotOptions opt;
    opt.title = "Sensitive distance vs false-alarm rate";
    opt.x_label = "false alarms per month (log)";
    opt.y_label = "sensitive distance (Mpc)";
    opt.log_x = true;
    opt.x_vlines = {4.0, 1000.0};
    io::write_text(run_dir / "sensitivity_far.svg", svg_plot(series, opt));
  }

  // Text summary with the elite lineage
  {
    std::ostringstream out;
    out << "run summary\n===========\n";
    out << "evaluations: " << summary.at("evaluations").get<std::size_t>() << "\n";
    out << "seed fitness: " << summary.at("seed_fitness").get<double>() << "\n";
    out << "best fitness: " << summary.at("best_fitness").get<double>() << "\n";
    out << "converged: " << (summary.at("converged").get<bool>() ? "yes" : "no") << "\n";

    const auto& nodes = tree.at("nodes");
    const auto best_id = summary.at("best_node").get<std::size_t>();
    std::vector<const json*> lineage;
    std::optional<std::size_t> cur = best_id;
    while (cur) {
      const json& n = nodes.at(*cur);
      lineage.push_back(&n);
      if (n.at("parent").is_null()) break;
      cur = n.at("parent").get<std::size_t>();
    }
    std::reverse(lineage.begin(), lineage.end());
    out << "\nelite lineage (root -> best)\n";
    for (const json* n : lineage) {
      out << "  node " << n->at("id").get<std::size_t>() << " depth "
          << n->at("depth").get<int>() << " op " << n->at("op").get<std::string>();
      if (!n->at("fitness").is_null()) out << " fitness " << n->at("fitness").get<double>();
      out << "\n";
    }

    const auto& pts = analysis.at("phase_transitions");
    out << "\nphase transitions: " << pts.size() << "\n";
    for (const auto& pt : pts) {
      out << "  eval " << pt.at("eval").get<std::size_t>() << " fitness "
          << pt.at("fitness").get<double>() << " gain " << pt.at("gain").get<double>() << "\n";
    }
    io::write_text(run_dir / "summary.txt", out.str());
  }
}

}  // namespace gwsearch::report
