#include "tsc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <fmt/format.h>

namespace tsc::analysis {

namespace {

constexpr double kClockEps = 1e-9;

Stage stage_from_name(const std::string& s) {
  if (s == "GREEN") return Stage::Green;
  if (s == "YELLOW") return Stage::Yellow;
  if (s == "ALLRED") return Stage::AllRed;
  throw ParseError(fmt::format("unknown stage '{}' in controller log", s));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<int> green_indicator(const std::string& row) {
  std::vector<int> g(row.size());
  for (std::size_t k = 0; k < row.size(); ++k) g[k] = row[k] == 'G' ? 1 : 0;
  return g;
}

}  // namespace

double ideal_offset(double spacing_m, double speed_kmh) {
  if (!(spacing_m > 0) || !(speed_kmh > 0))
    throw NonPositiveInput(fmt::format("spacing ({}) and speed ({}) must be positive", spacing_m, speed_kmh));
  return spacing_m * 3.6 / speed_kmh;
}

double ideal_split(double flow_a, double flow_b) {
  if (flow_a < 0 || flow_b < 0 || !std::isfinite(flow_a) || !std::isfinite(flow_b))
    throw NonPositiveInput(fmt::format("flows must be non-negative (got {} and {})", flow_a, flow_b));
  if (flow_a == 0 && flow_b == 0) throw BothZero("both flows are zero");
  return flow_a / (flow_a + flow_b);
}

std::vector<ControllerLog> controller_logs(const Simulation& sim) {
  std::vector<ControllerLog> out;
  for (const auto& c : sim.controllers()) out.push_back({c.id(), c.history(), sim.clock()});
  return out;
}

void write_controller_logs(const std::filesystem::path& path, const std::vector<ControllerLog>& logs) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError(fmt::format("cannot write '{}'", path.string()));
  f << "clock,intersection_id,stage,phase,signal\n";
  for (const auto& log : logs) {
    for (const auto& r : log.records)
      f << fmt::format("{},{},{},{},{}\n", r.clock, log.intersection, stage_name(r.stage), r.phase, r.signal);
    f << fmt::format("{},{},END,,\n", log.end_clock, log.intersection);
  }
  if (!f) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

std::vector<ControllerLog> read_controller_logs(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError(fmt::format("cannot read '{}'", path.string()));
  std::string line;
  std::getline(f, line);
  if (line.rfind("clock,intersection_id,stage,phase,signal", 0) != 0)
    throw ParseError(fmt::format("'{}' is not a controller log", path.string()));
  std::vector<ControllerLog> out;
  std::map<std::string, std::size_t> index;
  int n = 1;
  while (std::getline(f, line)) {
    ++n;
    if (line.empty()) continue;
    auto cols = split_csv(line);
    if (cols.size() != 5) throw ParseError(fmt::format("{}:{}: expected 5 columns", path.string(), n));
    auto [it, fresh] = index.emplace(cols[1], out.size());
    if (fresh) out.push_back({cols[1], {}, 0.0});
    ControllerLog& log = out[it->second];
    try {
      double clock = std::stod(cols[0]);
      if (cols[2] == "END") {
        log.end_clock = clock;
      } else {
        log.records.push_back({clock, stage_from_name(cols[2]), cols[4], static_cast<std::size_t>(std::stoul(cols[3]))});
      }
    } catch (const std::logic_error&) {
      throw ParseError(fmt::format("{}:{}: malformed number", path.string(), n));
    }
  }
  return out;
}

const SignalRecord& record_at(const ControllerLog& log, double t) {
  if (log.records.empty() || t + kClockEps < log.records.front().clock || t > log.end_clock + kClockEps)
    throw WindowOutOfRange(fmt::format("t={} is outside the log of '{}'", t, log.intersection));
  auto it = std::upper_bound(log.records.begin(), log.records.end(), t + kClockEps,
                             [](double v, const SignalRecord& r) { return v < r.clock; });
  return *std::prev(it);
}

std::vector<ArterialRow> arterial_rows(const ScenarioConfig& cfg, const std::string& movement) {
  struct Found {
    ArterialRow row;
    double x, y;
  };
  std::vector<Found> found;
  for (const auto& in : cfg.network.intersections) {
    bool has = std::any_of(in.movements.begin(), in.movements.end(), [&](const Movement& m) { return m.id == movement; });
    if (!has) continue;
    const Node* n = cfg.find_node(in.node);
    found.push_back({{in.id, movement, 0.0}, n ? n->x : 0.0, n ? n->y : 0.0});
  }
  std::sort(found.begin(), found.end(), [](const Found& a, const Found& b) {
    return a.x != b.x ? a.x < b.x : a.y < b.y;
  });
  std::vector<ArterialRow> rows;
  for (const auto& f : found) {
    ArterialRow r = f.row;
    r.position_m = std::hypot(f.x - found.front().x, f.y - found.front().y);
    rows.push_back(r);
  }
  return rows;
}

BandMatrix extract_band(const std::vector<ControllerLog>& logs, const ScenarioConfig& cfg,
                        const std::vector<ArterialRow>& rows, double t0, double t1, double dt) {
  if (!(dt > 0)) throw NonPositiveInput("sample interval must be positive");
  if (t0 < 0 || !(t1 > t0)) throw WindowOutOfRange(fmt::format("window [{}, {}) is empty or before clock 0", t0, t1));
  const auto n = static_cast<std::size_t>(std::ceil((t1 - t0) / dt - kClockEps));
  BandMatrix band;
  band.t0 = t0;
  band.dt = dt;
  band.rows = rows;
  for (const auto& row : rows) {
    auto log = std::find_if(logs.begin(), logs.end(), [&](const ControllerLog& l) { return l.intersection == row.intersection; });
    if (log == logs.end()) throw UnknownIntersection(fmt::format("no controller log for '{}'", row.intersection));
    const Intersection* in = cfg.find_intersection(row.intersection);
    if (!in) throw UnknownIntersection(fmt::format("'{}' is not in the scenario", row.intersection));
    auto mv = std::find_if(in->movements.begin(), in->movements.end(), [&](const Movement& m) { return m.id == row.movement; });
    if (mv == in->movements.end())
      throw BadValue(fmt::format("intersection '{}' has no movement '{}'", row.intersection, row.movement));
    double last = t0 + static_cast<double>(n - 1) * dt;
    if (last > log->end_clock + kClockEps)
      throw WindowOutOfRange(fmt::format("window ends at {} but the log of '{}' stops at {}", t1, row.intersection,
                                         log->end_clock));
    std::string cells(n, 'R');
    for (std::size_t k = 0; k < n; ++k) {
      char s = record_at(*log, t0 + static_cast<double>(k) * dt).signal.at(mv->signal_group);
      cells[k] = s == 'G' || s == 'Y' ? s : 'R';
    }
    band.cells.push_back(std::move(cells));
  }
  return band;
}

int detect_period(const std::string& row) {
  const auto x = green_indicator(row);
  const std::size_t n = x.size();
  double mean = 0.0;
  for (int v : x) mean += v;
  mean /= static_cast<double>(std::max<std::size_t>(n, 1));
  double var = 0.0;
  for (int v : x) var += (v - mean) * (v - mean);
  if (n < 4 || var == 0.0) throw Aperiodic("row is constant or too short to carry a period");
  var /= static_cast<double>(n);

  const std::size_t max_lag = n / 2;
  std::vector<double> c(max_lag + 2, 0.0);
  for (std::size_t lag = 0; lag <= max_lag + 1 && lag < n; ++lag) {
    double s = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) s += (x[t] - mean) * (x[t + lag] - mean);
    c[lag] = s / static_cast<double>(n - lag) / var;
  }
  std::size_t first_neg = 0;
  for (std::size_t lag = 1; lag <= max_lag; ++lag)
    if (c[lag] < 0) {
      first_neg = lag;
      break;
    }
  if (first_neg == 0) throw Aperiodic("autocorrelation never turns negative within half the window");
  double peak = -1.0;
  for (std::size_t lag = first_neg; lag <= max_lag; ++lag) peak = std::max(peak, c[lag]);
  if (peak < 0.8) throw Aperiodic(fmt::format("no autocorrelation peak (best {:.3f})", peak));
  for (std::size_t lag = first_neg; lag <= max_lag; ++lag) {
    bool local = c[lag] >= c[lag - 1] && (lag + 1 >= c.size() || c[lag] >= c[lag + 1]);
    if (local && c[lag] >= peak - 0.05) return static_cast<int>(lag);
  }
  throw Aperiodic("no autocorrelation peak");
}

int measure_offset(const BandMatrix& band, std::size_t row_i, std::size_t row_j) {
  if (row_i >= band.cells.size() || row_j >= band.cells.size())
    throw BadValue(fmt::format("row index out of range (band has {} rows)", band.cells.size()));
  const int pi = detect_period(band.cells[row_i]);
  const int pj = detect_period(band.cells[row_j]);
  if (std::abs(pi - pj) > 1) throw Aperiodic(fmt::format("rows have different periods ({} and {})", pi, pj));
  const auto gi = green_indicator(band.cells[row_i]);
  const auto gj = green_indicator(band.cells[row_j]);
  const std::size_t period = static_cast<std::size_t>(pi);
  const std::size_t m = gi.size() / period * period;
  int best = 0;
  long best_overlap = -1;
  for (std::size_t lag = 0; lag < period; ++lag) {
    long overlap = 0;
    for (std::size_t t = 0; t < m; ++t) overlap += gi[t] * gj[(t + lag) % m];
    if (overlap > best_overlap) {
      best_overlap = overlap;
      best = static_cast<int>(lag);
    }
  }
  return best;
}

std::string band_csv(const BandMatrix& band) {
  std::string out = "time_s,intersection_id,position_m,state\n";
  for (std::size_t k = 0; k < band.samples(); ++k)
    for (std::size_t r = 0; r < band.rows.size(); ++r)
      out += fmt::format("{},{},{},{}\n", band.time_at(k), band.rows[r].intersection, band.rows[r].position_m,
                         band.cells[r][k]);
  return out;
}

std::string render_band_svg(const BandMatrix& band, double guide_speed_kmh) {
  if (band.rows.empty() || band.samples() == 0) throw WindowOutOfRange("cannot render an empty band");
  constexpr double left = 70, right = 20, top = 20, bottom = 40, plot_w = 900, plot_h = 320, bar_h = 14;
  const double duration = static_cast<double>(band.samples()) * band.dt;
  const double sx = plot_w / duration;
  double pmin = band.rows.front().position_m, pmax = pmin;
  for (const auto& r : band.rows) {
    pmin = std::min(pmin, r.position_m);
    pmax = std::max(pmax, r.position_m);
  }
  const double span = pmax - pmin;
  auto y_of = [&](double pos) {
    if (span <= 0) return top + plot_h / 2;
    return top + plot_h - (pos - pmin) / span * (plot_h - bar_h) - bar_h / 2;
  };
  auto x_of = [&](double t) { return left + (t - band.t0) * sx; };
  auto color = [](char s) { return s == 'G' ? "#2e7d32" : s == 'Y' ? "#f9a825" : "#c62828"; };

  std::string out;
  out += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" viewBox=\"0 0 {:.0f} {:.0f}\">\n",
      left + plot_w + right, top + plot_h + bottom, left + plot_w + right, top + plot_h + bottom);
  out += fmt::format("<rect x=\"0\" y=\"0\" width=\"{:.0f}\" height=\"{:.0f}\" fill=\"#ffffff\"/>\n",
                     left + plot_w + right, top + plot_h + bottom);
  for (std::size_t r = 0; r < band.rows.size(); ++r) {
    const auto& row = band.rows[r];
    const std::string& cells = band.cells[r];
    const double y = y_of(row.position_m) - bar_h / 2;
    out += fmt::format("<g class=\"band\" data-intersection=\"{}\" data-position=\"{:.2f}\">\n", row.intersection,
                       row.position_m);
    std::size_t k = 0;
    while (k < cells.size()) {
      std::size_t e = k;
      while (e < cells.size() && cells[e] == cells[k]) ++e;
      out += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\"/>\n",
                         x_of(band.time_at(k)), y, static_cast<double>(e - k) * band.dt * sx, bar_h, color(cells[k]));
      k = e;
    }
    out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"11\" text-anchor=\"end\">{} ({:.0f} m)</text>\n",
                       left - 6, y + bar_h - 3, row.intersection, row.position_m);
    out += "</g>\n";
  }
  // free-flow guide from the first arterial green onset of the first row
  const std::string& first = band.cells.front();
  std::size_t onset = 0;
  for (std::size_t k = 1; k < first.size(); ++k)
    if (first[k] == 'G' && first[k - 1] != 'G') {
      onset = k;
      break;
    }
  const double t_start = band.time_at(onset);
  const double t_end = t_start + (span > 0 ? span / (guide_speed_kmh / 3.6) : 0.0);
  out += fmt::format(
      "<line class=\"guide\" x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#000000\" "
      "stroke-width=\"1.5\" stroke-dasharray=\"6 4\"/>\n",
      x_of(t_start), y_of(pmin), x_of(t_end), y_of(pmax));
  out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"11\">time {:.0f} to {:.0f} s</text>\n", left,
                     top + plot_h + 25, band.t0, band.t0 + duration);
  out += "</svg>\n";
  return out;
}

void render_band(const BandMatrix& band, const std::filesystem::path& out_path, double guide_speed_kmh) {
  std::string svg = render_band_svg(band, guide_speed_kmh);
  std::ofstream f(out_path, std::ios::binary);
  if (!f) throw IoError(fmt::format("cannot write '{}'", out_path.string()));
  f << svg;
  if (!f) throw IoError(fmt::format("failed writing '{}'", out_path.string()));
}

}  // namespace tsc::analysis
