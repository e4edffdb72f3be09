#include "ftcbf/output.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include "ftcbf/error.hpp"

namespace ftcbf {

using nlohmann::json;

void write_trajectory_csv(std::ostream& out, const SimResult& result) {
  std::string header = "t";
  if (!result.states.empty()) {
    const auto& x0 = result.states.front();
    for (std::size_t i = 0; i < x0.agent_count(); ++i) {
      for (std::size_t d = 0; d < x0.agent_dim(); ++d) header += fmt::format(",x{}_{}", i, d);
    }
    for (Eigen::Index j = 0; j < result.controls.front().size(); ++j) header += fmt::format(",u{}", j);
  }
  out << header << '\n';
  fmt::memory_buffer line;
  for (std::size_t k = 0; k < result.size(); ++k) {
    line.clear();
    fmt::format_to(std::back_inserter(line), "{}", result.times[k]);
    const auto& x = result.states[k].flat();
    for (Eigen::Index i = 0; i < x.size(); ++i) fmt::format_to(std::back_inserter(line), ",{}", x(i));
    const auto& u = result.controls[k];
    for (Eigen::Index j = 0; j < u.size(); ++j) fmt::format_to(std::back_inserter(line), ",{}", u(j));
    line.push_back('\n');
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
  }
}

void write_trace_csv(std::ostream& out, const TraceRecord& trace) {
  out << "enter_time,propositions\n";
  for (const auto& e : trace.entries()) out << fmt::format("{},{}\n", e.time, fmt::join(e.set, ";"));
}

void write_switch_log_csv(std::ostream& out, const std::vector<SwitchEvent>& log) {
  out << "time,completed,entered,cycles_completed,individual_bound,composite_estimate\n";
  for (const auto& e : log) {
    out << fmt::format("{},{},{},{},{},{}\n", e.time, e.completed, e.entered, e.cycles_completed,
                       e.individual_bound ? fmt::format("{}", *e.individual_bound) : "",
                       e.composite_estimate);
  }
}

double min_safety_value(const SimResult& result, const SimScenario& scenario) {
  double lowest = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < result.size(); ++k) {
    for (const auto& h : scenario.lasso.at(result.active_problem[k]).safety) {
      lowest = std::min(lowest, h.eval(result.states[k]));
    }
  }
  return lowest;
}

json summary_json(const ScenarioFile& file, const BuiltScenario& built, const SimResult& result) {
  double worst = 0.0;
  for (const auto& v : result.violation_log) worst = std::max(worst, -v.value);
  const double lowest = min_safety_value(result, built.sim);
  json verdict = {{"accepted", result.verdict.accepted},
                  {"omega_approximate", result.verdict.omega_approximate},
                  {"prefix_matched", result.verdict.prefix_matched},
                  {"cycles_matched", result.verdict.cycles_matched},
                  {"mismatch_cycle", result.verdict.mismatch_cycle},
                  {"message", result.verdict.message}};
  verdict["first_mismatch"] =
      result.verdict.first_mismatch ? json(*result.verdict.first_mismatch) : json(nullptr);
  json doc = {{"name", file.name},
              {"status", to_string(result.status)},
              {"verdict", verdict},
              {"cycles_completed", result.cycles_completed},
              {"cycles_target", built.config.suffix_cycles_target},
              {"steps", result.size()},
              {"final_time", result.times.empty() ? 0.0 : result.times.back()},
              {"dt", built.config.dt},
              {"gamma", built.config.params.gamma()},
              {"rho", built.config.params.rho()},
              {"switches", result.switch_log.size()},
              {"trace_entries", result.trace.entries().size()},
              {"violations", result.violation_log.size()},
              {"max_safety_violation", worst}};
  doc["min_safety_value"] = std::isfinite(lowest) ? json(lowest) : json(nullptr);
  doc["failure"] = result.failure ? json(*result.failure) : json(nullptr);
  doc["failure_culprits"] = result.failure_culprits;
  return doc;
}

namespace {

constexpr double kCanvas = 800.0;
constexpr double kMargin = 40.0;
constexpr const char* kAgentColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

const char* agent_color(std::size_t i) {
  return kAgentColors[i % (sizeof(kAgentColors) / sizeof(kAgentColors[0]))];
}

struct Frame {
  double lo_x, lo_y, hi_x, hi_y;
  double scale;

  double px(double x) const { return kMargin + (x - lo_x) * scale; }
  double py(double y) const { return kCanvas - kMargin - (y - lo_y) * scale; }
};

Matrix shape_matrix(const RegionSpec& region, std::size_t n) {
  const auto dim = static_cast<Eigen::Index>(n);
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      region.shape.data(), dim, dim);
}

// Shadow of the region on the first two coordinates (2x2 block of P^-1).
Eigen::Matrix2d planar_cov(const RegionSpec& region, std::size_t n) {
  const Matrix p = shape_matrix(region, n);
  if (n == 1) {
    Eigen::Matrix2d c = Eigen::Matrix2d::Zero();
    c(0, 0) = 1.0 / p(0, 0);
    return c;
  }
  return p.inverse().topLeftCorner(2, 2);
}

Eigen::Vector2d planar(const Eigen::Ref<const Vector>& v) {
  return {v(0), v.size() > 1 ? v(1) : 0.0};
}

Frame make_frame(const ScenarioFile& file, const SimResult& result) {
  const std::size_t n = file.agents.dimension;
  double lo_x, lo_y, hi_x, hi_y;
  if (file.workspace && n >= 2) {
    lo_x = file.workspace->lower[0];
    lo_y = file.workspace->lower[1];
    hi_x = file.workspace->upper[0];
    hi_y = file.workspace->upper[1];
  } else {
    lo_x = lo_y = std::numeric_limits<double>::infinity();
    hi_x = hi_y = -std::numeric_limits<double>::infinity();
    const auto include = [&](double x, double y) {
      lo_x = std::min(lo_x, x);
      hi_x = std::max(hi_x, x);
      lo_y = std::min(lo_y, y);
      hi_y = std::max(hi_y, y);
    };
    for (const auto& region : file.regions) {
      const auto cov = planar_cov(region, n);
      const double cy = region.center.size() > 1 ? region.center[1] : 0.0;
      include(region.center[0] - std::sqrt(cov(0, 0)), cy - std::sqrt(cov(1, 1)));
      include(region.center[0] + std::sqrt(cov(0, 0)), cy + std::sqrt(cov(1, 1)));
    }
    for (const auto& x : result.states) {
      for (std::size_t i = 0; i < x.agent_count(); ++i) {
        const auto p = planar(x.agent(i));
        include(p(0), p(1));
      }
    }
    if (!std::isfinite(lo_x)) {
      lo_x = lo_y = -1.0;
      hi_x = hi_y = 1.0;
    }
    const double pad = 0.05 * std::max({hi_x - lo_x, hi_y - lo_y, 1e-9});
    lo_x -= pad;
    lo_y -= pad;
    hi_x += pad;
    hi_y += pad;
  }
  const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-12});
  return {lo_x, lo_y, hi_x, hi_y, (kCanvas - 2.0 * kMargin) / span};
}

// Polyline through the points, skipping any within 0.5 px of the last kept one.
std::string path_data(const std::vector<Eigen::Vector2d>& pts) {
  std::string d;
  Eigen::Vector2d last;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const bool keep = k == 0 || k + 1 == pts.size() || (pts[k] - last).norm() >= 0.5;
    if (!keep) continue;
    d += fmt::format("{}{:.2f} {:.2f}", k == 0 ? "M" : " L", pts[k](0), pts[k](1));
    last = pts[k];
  }
  return d;
}

}  // namespace

std::string render_trajectory_svg(const ScenarioFile& file, const SimResult& result) {
  const Frame f = make_frame(file, result);
  const std::size_t n = file.agents.dimension;
  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{0}\" viewBox=\"0 0 {0} {0}\">\n",
      kCanvas);
  svg += fmt::format("<title>{}</title>\n", file.name);
  svg += fmt::format(
      "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"white\" stroke=\"black\"/>\n",
      f.px(f.lo_x), f.py(f.hi_y), (f.hi_x - f.lo_x) * f.scale, (f.hi_y - f.lo_y) * f.scale);

  for (const auto& region : file.regions) {
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(planar_cov(region, n));
    const Eigen::Vector2d axes = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Eigen::Vector2d major = eig.eigenvectors().col(1);
    // Screen y points down, so the rotation flips sign.
    const double angle = -std::atan2(major(1), major(0)) * 180.0 / M_PI;
    const double cx = f.px(region.center[0]);
    const double cy = f.py(region.center.size() > 1 ? region.center[1] : 0.0);
    svg += fmt::format(
        "<ellipse cx=\"{:.2f}\" cy=\"{:.2f}\" rx=\"{:.2f}\" ry=\"{:.2f}\" transform=\"rotate({:.3f} {:.2f} {:.2f})\" "
        "fill=\"#dddddd\" fill-opacity=\"0.6\" stroke=\"#555555\"/>\n",
        cx, cy, axes(1) * f.scale, axes(0) * f.scale, angle, cx, cy);
    svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
                       cx, cy + 5.0, region.id);
  }

  const std::size_t agents = result.states.empty() ? 0 : result.states.front().agent_count();
  for (std::size_t i = 0; i < agents; ++i) {
    std::vector<Eigen::Vector2d> pts;
    pts.reserve(result.size());
    for (const auto& x : result.states) {
      const auto p = planar(x.agent(i));
      pts.emplace_back(f.px(p(0)), f.py(p(1)));
    }
    svg += fmt::format("<path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
                       path_data(pts), agent_color(i));
  }

  for (const auto& e : result.switch_log) {
    if (e.completed.empty()) continue;
    const auto it = std::lower_bound(result.times.begin(), result.times.end(), e.time);
    if (it == result.times.end()) continue;
    const auto& x = result.states[static_cast<std::size_t>(it - result.times.begin())];
    for (std::size_t i = 0; i < agents; ++i) {
      const auto p = planar(x.agent(i));
      svg += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"4\" fill=\"{}\" stroke=\"black\"/>\n",
                         f.px(p(0)), f.py(p(1)), agent_color(i));
    }
  }
  svg += "</svg>\n";
  return svg;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PreconditionError(fmt::format("cannot write '{}'", path.string()));
  out << text;
}

template <typename Writer>
void write_with(const std::filesystem::path& path, Writer&& writer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PreconditionError(fmt::format("cannot write '{}'", path.string()));
  writer(out);
}

}  // namespace

void write_run_outputs(const std::filesystem::path& dir, const ScenarioFile& file,
                       const BuiltScenario& built, const SimResult& result) {
  std::filesystem::create_directories(dir);
  write_file(dir / RunFiles::kScenario, to_json(file).dump(2) + "\n");
  write_with(dir / RunFiles::kTrajectory, [&](std::ostream& o) { write_trajectory_csv(o, result); });
  write_with(dir / RunFiles::kTrace, [&](std::ostream& o) { write_trace_csv(o, result.trace); });
  write_with(dir / RunFiles::kSwitchLog,
             [&](std::ostream& o) { write_switch_log_csv(o, result.switch_log); });
  write_file(dir / RunFiles::kSummary, summary_json(file, built, result).dump(2) + "\n");
  write_file(dir / RunFiles::kPlot, render_trajectory_svg(file, result));
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& cell, const std::filesystem::path& path, std::size_t line) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || end != cell.data() + cell.size()) {
    throw PreconditionError(fmt::format("{}:{}: bad number '{}'", path.string(), line, cell));
  }
  return v;
}

std::ifstream open_input(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw PreconditionError(fmt::format("missing run output '{}'", path.string()));
  }
  std::ifstream in(path);
  if (!in) throw PreconditionError(fmt::format("cannot read '{}'", path.string()));
  return in;
}

}  // namespace

LoadedRun load_run(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw PreconditionError(fmt::format("run directory '{}' does not exist", dir.string()));
  }
  LoadedRun run;
  open_input(dir / RunFiles::kScenario);
  run.file = load_scenario(dir / RunFiles::kScenario);
  const std::size_t agents = run.file.agents.count;
  const std::size_t n = run.file.agents.dimension;

  std::vector<double> switch_times;
  {
    const auto path = dir / RunFiles::kSwitchLog;
    auto in = open_input(path);
    std::string line;
    std::getline(in, line);
    for (std::size_t ln = 2; std::getline(in, line); ++ln) {
      const auto cells = split(line, ',');
      if (cells.size() != 6) throw PreconditionError(fmt::format("{}:{}: expected 6 columns", path.string(), ln));
      if (!cells[1].empty()) switch_times.push_back(parse_double(cells[0], path, ln));
    }
  }

  const auto path = dir / RunFiles::kTrajectory;
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw PreconditionError(fmt::format("{} is empty", path.string()));
  const std::size_t columns = split(line, ',').size();
  if (columns < 1 + agents * n) {
    throw PreconditionError(fmt::format("{}: header has {} columns, need at least {}", path.string(),
                                        columns, 1 + agents * n));
  }
  std::size_t position = 0;
  for (std::size_t ln = 2; std::getline(in, line); ++ln) {
    const auto cells = split(line, ',');
    if (cells.size() != columns) {
      throw PreconditionError(fmt::format("{}:{}: expected {} columns", path.string(), ln, columns));
    }
    const double t = parse_double(cells[0], path, ln);
    Vector flat(static_cast<Eigen::Index>(agents * n));
    for (Eigen::Index i = 0; i < flat.size(); ++i) {
      flat(i) = parse_double(cells[static_cast<std::size_t>(i) + 1], path, ln);
    }
    while (position < switch_times.size() && switch_times[position] <= t) ++position;
    run.times.push_back(t);
    run.states.emplace_back(agents, n, std::move(flat));
    run.active_problem.push_back(position);
  }
  if (run.times.empty()) throw PreconditionError(fmt::format("{} has no samples", path.string()));
  return run;
}

ProgressTable progress_table(const LoadedRun& run) {
  const BuiltScenario built = build(run.file);
  const auto& lasso = built.sim.lasso;
  ProgressTable table;
  std::map<std::string, std::size_t> column;
  std::vector<const BarrierFunction*> barriers;
  const auto collect = [&](const ReachabilityProblem& p) {
    for (const auto& wb : p.goals.bounded()) {
      if (column.emplace(wb.barrier.id(), table.goal_ids.size()).second) {
        table.goal_ids.push_back(wb.barrier.id());
        barriers.push_back(&wb.barrier);
      }
    }
  };
  for (const auto& p : lasso.prefix()) collect(p);
  for (const auto& p : lasso.suffix()) collect(p);

  const auto weighted = [](const ReachabilityProblem& p, const StackedState& x) {
    double sum = 0.0;
    for (const auto& [barrier, weight] : p.goals.bounded()) sum += weight * barrier.eval(x);
    return sum;
  };

  const double dt = built.config.dt;
  for (std::size_t k = 0; k < run.states.size(); ++k) {
    const auto& problem = lasso.at(run.active_problem[k]);
    const auto& x = run.states[k];
    table.times.push_back(run.times[k]);
    table.problem.push_back(problem.label);
    std::vector<double> levels;
    for (const auto* h : barriers) levels.push_back(h->eval(x));
    table.levels.push_back(std::move(levels));
    table.weighted_sum.push_back(weighted(problem, x));
    if (k + 1 < run.states.size()) {
      table.rate.push_back((weighted(problem, run.states[k + 1]) - table.weighted_sum.back()) / dt);
    } else {
      table.rate.push_back(std::nullopt);
    }
    bool pending = false;
    for (const auto& wb : problem.goals.bounded()) pending = pending || wb.barrier.eval(x) < 0.0;
    table.pre_goal.push_back(pending);
  }
  return table;
}

void write_progress_csv(std::ostream& out, const ProgressTable& table) {
  std::string header = "t,problem";
  for (const auto& id : table.goal_ids) header += ",h_" + id;
  out << header << ",weighted_sum,rate,pre_goal\n";
  for (std::size_t k = 0; k < table.times.size(); ++k) {
    std::string line = fmt::format("{},{}", table.times[k], table.problem[k]);
    for (double v : table.levels[k]) line += fmt::format(",{}", v);
    line += fmt::format(",{},{},{}\n", table.weighted_sum[k],
                        table.rate[k] ? fmt::format("{}", *table.rate[k]) : "", table.pre_goal[k] ? 1 : 0);
    out << line;
  }
}

namespace {

struct Panel {
  double top;
  double height;
  std::string title;
};

std::string render_panel(const Panel& panel, const std::vector<double>& times,
                         const std::vector<std::vector<double>>& series,
                         const std::vector<std::string>& names) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& s : series) {
    for (double v : s) {
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  if (!std::isfinite(lo)) {
    lo = 0.0;
    hi = 1.0;
  }
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double t0 = times.front();
  const double t1 = times.back() > t0 ? times.back() : t0 + 1.0;
  const double left = 80.0;
  const double width = kCanvas - left - 20.0;
  const double inner_top = panel.top + 25.0;
  const double inner_height = panel.height - 45.0;
  const auto px = [&](double t) { return left + (t - t0) / (t1 - t0) * width; };
  const auto py = [&](double v) { return inner_top + (hi - v) / (hi - lo) * inner_height; };

  std::string out = fmt::format(
      "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"white\" stroke=\"black\"/>\n",
      left, inner_top, width, inner_height);
  out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"14\">{}</text>\n", left, panel.top + 18.0,
                     panel.title);
  out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"11\" text-anchor=\"end\">{:.6g}</text>\n",
                     left - 4.0, inner_top + 10.0, hi);
  out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"11\" text-anchor=\"end\">{:.6g}</text>\n",
                     left - 4.0, inner_top + inner_height, lo);
  if (lo < 0.0 && hi > 0.0) {
    out += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#999999\" "
                       "stroke-dasharray=\"4 3\"/>\n",
                       left, py(0.0), left + width, py(0.0));
  }
  for (std::size_t s = 0; s < series.size(); ++s) {
    std::vector<Eigen::Vector2d> pts;
    for (std::size_t k = 0; k < series[s].size(); ++k) {
      if (std::isfinite(series[s][k])) pts.emplace_back(px(times[k]), py(series[s][k]));
    }
    if (pts.empty()) continue;
    out += fmt::format("<path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.2\"/>\n", path_data(pts),
                       agent_color(s));
    out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"11\" fill=\"{}\">{}</text>\n",
                       left + 200.0 + 90.0 * static_cast<double>(s), panel.top + 18.0,
                       agent_color(s), names[s]);
  }
  return out;
}

}  // namespace

std::string render_progress_svg(const ProgressTable& table) {
  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{0}\" viewBox=\"0 0 {0} {0}\">\n",
      kCanvas);
  if (table.times.empty()) return svg + "</svg>\n";
  const double h = kCanvas / 3.0;

  std::vector<std::vector<double>> levels(table.goal_ids.size());
  for (const auto& row : table.levels) {
    for (std::size_t g = 0; g < row.size(); ++g) levels[g].push_back(row[g]);
  }
  std::vector<std::string> names;
  for (const auto& id : table.goal_ids) names.push_back("h_" + id);
  svg += render_panel({0.0, h, "goal level sets"}, table.times, levels, names);

  svg += render_panel({h, h, "weighted sum"}, table.times, {table.weighted_sum}, {"sum a_i h_i"});

  std::vector<double> rate;
  for (const auto& r : table.rate) rate.push_back(r ? *r : std::numeric_limits<double>::quiet_NaN());
  svg += render_panel({2.0 * h, h, "rate"}, table.times, {rate}, {"d/dt sum a_i h_i"});
  svg += "</svg>\n";
  return svg;
}

}  // namespace ftcbf
