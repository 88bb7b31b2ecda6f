#include "treestealer/eval.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "treestealer/baseline.hpp"
#include "treestealer/error.hpp"
#include "treestealer/extractor.hpp"
#include "treestealer/tree_io.hpp"

namespace treestealer {

using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

}  // namespace

Dataset parse_dataset(std::string_view csv, bool has_header) {
  Dataset out;
  std::vector<std::string_view> label_cells;
  std::size_t width = 0;
  std::size_t line_no = 0;
  bool header_pending = has_header;
  while (!csv.empty()) {
    const auto nl = csv.find('\n');
    const auto line = trim(csv.substr(0, nl));
    csv = nl == std::string_view::npos ? std::string_view{} : csv.substr(nl + 1);
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() < 2) {
      throw DatasetError("line " + std::to_string(line_no) + ": need at least one feature and a label");
    }
    if (width == 0) width = cells.size();
    if (cells.size() != width) {
      throw DatasetError("line " + std::to_string(line_no) + ": expected " +
                         std::to_string(width) + " columns, got " + std::to_string(cells.size()));
    }
    if (header_pending) {
      for (std::size_t c = 0; c + 1 < cells.size(); ++c) out.feature_names.emplace_back(cells[c]);
      header_pending = false;
      continue;
    }
    Sample row;
    for (std::size_t c = 0; c + 1 < cells.size(); ++c) {
      const auto v = parse_number<double>(cells[c]);
      if (!v || !std::isfinite(*v)) {
        throw DatasetError("line " + std::to_string(line_no) + ", column " +
                           std::to_string(c + 1) + ": non-numeric feature '" +
                           std::string(cells[c]) + "'");
      }
      row.x.push_back(*v);
    }
    out.rows.push_back(std::move(row));
    label_cells.push_back(cells.back());
  }
  if (out.rows.empty()) throw DatasetError("dataset has no rows");

  const bool integral = std::all_of(label_cells.begin(), label_cells.end(),
                                    [](auto s) { return parse_number<std::int64_t>(s).has_value(); });
  const bool numeric = std::all_of(label_cells.begin(), label_cells.end(),
                                   [](auto s) { return parse_number<double>(s).has_value(); });
  if (integral) {
    for (std::size_t i = 0; i < label_cells.size(); ++i) {
      out.rows[i].y = *parse_number<std::int64_t>(label_cells[i]);
    }
  } else if (numeric) {
    for (std::size_t i = 0; i < label_cells.size(); ++i) {
      out.rows[i].y = *parse_number<double>(label_cells[i]);
    }
  } else {
    const std::set<std::string_view> names(label_cells.begin(), label_cells.end());
    out.class_names.assign(names.begin(), names.end());
    for (std::size_t i = 0; i < label_cells.size(); ++i) {
      const auto it = std::find(out.class_names.begin(), out.class_names.end(), label_cells[i]);
      out.rows[i].y = static_cast<std::int64_t>(it - out.class_names.begin());
    }
  }
  return out;
}

Dataset load_dataset(const std::filesystem::path& path, bool has_header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open dataset " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_dataset(ss.str(), has_header);
}

Ranges infer_ranges(const Dataset& dataset, double margin) {
  if (dataset.rows.empty()) throw DatasetError("dataset has no rows");
  if (!(margin >= 0.0)) throw Error("margin must be non-negative");
  const auto m = dataset.num_features();
  Ranges r{dataset.rows[0].x, dataset.rows[0].x};
  for (const auto& row : dataset.rows) {
    for (std::size_t f = 0; f < m; ++f) {
      r.low[f] = std::min(r.low[f], row.x[f]);
      r.high[f] = std::max(r.high[f], row.x[f]);
    }
  }
  for (std::size_t f = 0; f < m; ++f) {
    const double span = r.high[f] - r.low[f];
    if (span == 0.0) {
      r.low[f] -= 0.5;
      r.high[f] += 0.5;
    } else {
      r.low[f] -= margin * span;
      r.high[f] += margin * span;
    }
  }
  return r;
}

Dataset uniform_dataset(const DecisionTree& tree, std::size_t n, Rng& rng) {
  Dataset out;
  const auto& lo = tree.ranges_low();
  const auto& hi = tree.ranges_high();
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    for (std::size_t f = 0; f < lo.size(); ++f) s.x.push_back(rng.uniform(lo[f], hi[f]));
    s.y = infer(tree, s.x);
    out.rows.push_back(std::move(s));
  }
  return out;
}

Dataset grid_dataset(const DecisionTree& tree, double grid, std::size_t n, Rng& rng) {
  if (!(grid > 0.0) || !std::isfinite(grid)) throw Error("grid step must be positive");
  const auto& lo = tree.ranges_low();
  const auto& hi = tree.ranges_high();
  std::vector<std::uint64_t> cells;
  for (std::size_t f = 0; f < lo.size(); ++f) {
    const auto k = static_cast<std::uint64_t>(std::floor((hi[f] - lo[f]) / grid + 1e-9));
    if (k == 0) throw Error("grid step exceeds the range of feature " + std::to_string(f));
    cells.push_back(k);
  }
  Dataset out;
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    for (std::size_t f = 0; f < lo.size(); ++f) {
      const auto k = rng.below(cells[f]);
      s.x.push_back(lo[f] + (static_cast<double>(k) + 0.5) * grid);
    }
    s.y = infer(tree, s.x);
    out.rows.push_back(std::move(s));
  }
  return out;
}

double extraction_error(const DecisionTree& target, const DecisionTree& shadow,
                        const Dataset& dataset) {
  if (dataset.rows.empty()) throw DatasetError("dataset has no rows");
  if (target.num_features() != shadow.num_features()) {
    throw DimensionMismatch(target.num_features(), shadow.num_features());
  }
  std::size_t mismatches = 0;
  for (const auto& row : dataset.rows) {
    if (infer(target, row.x) != infer(shadow, row.x)) ++mismatches;
  }
  return static_cast<double>(mismatches) / static_cast<double>(dataset.rows.size());
}

std::string to_string(AttackKind kind) {
  return kind == AttackKind::Extractor ? "extractor" : "baseline";
}

AttackKind parse_attack_kind(const std::string& name) {
  if (name == "extractor") return AttackKind::Extractor;
  if (name == "baseline") return AttackKind::Baseline;
  throw Error("unknown attack '" + name + "' (expected extractor or baseline)");
}

std::string to_string(PointStatus status) {
  switch (status) {
    case PointStatus::Ok:
      return "ok";
    case PointStatus::Timeout:
      return "timeout";
    case PointStatus::Plateau:
      return "plateau";
    case PointStatus::PathDeviation:
      return "path_deviation";
    case PointStatus::Error:
      return "error";
  }
  return "unknown";
}

PointStatus parse_point_status(const std::string& name) {
  for (const auto s : {PointStatus::Ok, PointStatus::Timeout, PointStatus::Plateau,
                       PointStatus::PathDeviation, PointStatus::Error}) {
    if (to_string(s) == name) return s;
  }
  throw SchemaError("status", "unknown point status '" + name + "'");
}

namespace {

SweepPoint run_point(const DecisionTree& target, const Dataset& dataset,
                     const SweepConfig& config, double eps) {
  SweepPoint p;
  p.epsilon = eps;
  if (config.attack == AttackKind::Extractor) {
    SimulatedChannel channel(target, config.channel, config.seed);
    AttackParams params{target.ranges_low(), target.ranges_high(), eps, config.passive_tracking,
                        config.max_queries_per_run};
    try {
      const auto r = dt_extraction(channel, params);
      p.queries = r.queries;
      p.fidelity = fidelity(target, *r.tree, dataset);
    } catch (const PathDeviation& e) {
      p.queries = channel.queries();
      p.status = PointStatus::PathDeviation;
      p.message = e.what();
    } catch (const FeatureNotFound& e) {
      p.queries = channel.queries();
      p.status = PointStatus::PathDeviation;
      p.message = e.what();
    } catch (const Error& e) {
      p.queries = channel.queries();
      p.status = PointStatus::Error;
      p.message = e.what();
    }
  } else {
    TreeLabelOracle oracle(target);
    const auto r = api_attack_extract(oracle, target.ranges_low(), target.ranges_high(),
                                      {eps, config.max_queries_per_run});
    p.queries = r.queries;
    p.fidelity = fidelity(target, r.tree, dataset);
    if (r.budget_exhausted) {
      p.status = PointStatus::Error;
      p.message = "query budget exhausted";
    }
  }
  return p;
}

}  // namespace

SweepResult pareto_sweep(const DecisionTree& target, const Dataset& dataset,
                         const SweepConfig& config) {
  if (!(config.eps_start > 0.0) || !std::isfinite(config.eps_start)) {
    throw Error("eps_start must be positive");
  }
  if (config.plateau_limit < 1 || config.max_points < 1) {
    throw Error("plateau_limit and max_points must be positive");
  }
  SweepResult out;
  out.attack = to_string(config.attack);
  out.channel = config.attack == AttackKind::Extractor ? to_string(config.channel.kind) : "api";
  double eps = config.eps_start;
  int same = 0;
  for (int i = 0; i < config.max_points; ++i, eps /= 2) {
    const auto start = std::chrono::steady_clock::now();
    auto p = run_point(target, dataset, config, eps);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (config.record_wall_time) p.wall_time = elapsed;

    const bool failed = p.status != PointStatus::Ok;
    if (!failed && !out.points.empty() && out.points.back().status == PointStatus::Ok &&
        out.points.back().fidelity == p.fidelity) {
      ++same;
    } else {
      same = failed ? 0 : 1;
    }
    bool stop = false;
    if (elapsed > config.timeout_seconds) {
      p.status = PointStatus::Timeout;
      stop = true;
    } else if (!failed && p.fidelity == 1.0) {
      stop = true;
    } else if (!failed && same >= config.plateau_limit) {
      p.status = PointStatus::Plateau;
      stop = true;
    }
    out.points.push_back(std::move(p));
    if (stop) break;
  }
  out.frontier = pareto_frontier(out.points);
  return out;
}

std::vector<SweepPoint> pareto_frontier(std::span<const SweepPoint> points) {
  std::vector<SweepPoint> usable;
  for (const auto& p : points) {
    if (p.status != PointStatus::PathDeviation && p.status != PointStatus::Error) {
      usable.push_back(p);
    }
  }
  std::stable_sort(usable.begin(), usable.end(), [](const SweepPoint& a, const SweepPoint& b) {
    if (a.queries != b.queries) return a.queries < b.queries;
    return a.fidelity > b.fidelity;
  });
  std::vector<SweepPoint> front;
  for (const auto& p : usable) {
    if (front.empty() || p.fidelity > front.back().fidelity) front.push_back(p);
  }
  return front;
}

namespace {

json point_to_json(const SweepPoint& p) {
  json j;
  j["epsilon"] = p.epsilon;
  j["queries"] = p.queries;
  j["fidelity"] = p.fidelity;
  j["status"] = to_string(p.status);
  if (p.wall_time) j["wall_time"] = *p.wall_time;
  if (!p.message.empty()) j["message"] = p.message;
  return j;
}

SweepPoint point_from_json(const json& j, const std::string& where) {
  auto field = [&](const char* key) -> const json& {
    const auto it = j.find(key);
    if (it == j.end()) throw SchemaError(where + "." + key, "missing required key");
    return *it;
  };
  SweepPoint p;
  if (!j.is_object()) throw SchemaError(where, "expected an object");
  if (!field("epsilon").is_number()) throw SchemaError(where + ".epsilon", "expected a number");
  if (!field("queries").is_number_integer()) {
    throw SchemaError(where + ".queries", "expected an integer");
  }
  if (!field("fidelity").is_number()) throw SchemaError(where + ".fidelity", "expected a number");
  if (!field("status").is_string()) throw SchemaError(where + ".status", "expected a string");
  p.epsilon = field("epsilon").get<double>();
  p.queries = field("queries").get<std::int64_t>();
  p.fidelity = field("fidelity").get<double>();
  p.status = parse_point_status(field("status").get<std::string>());
  if (const auto it = j.find("wall_time"); it != j.end()) p.wall_time = it->get<double>();
  if (const auto it = j.find("message"); it != j.end()) p.message = it->get<std::string>();
  return p;
}

}  // namespace

json report_to_json(const Report& report) {
  json series = json::object();
  for (const auto& [name, s] : report.series) {
    json points = json::array();
    for (const auto& p : s.points) points.push_back(point_to_json(p));
    json frontier = json::array();
    for (const auto& p : s.frontier) frontier.push_back(point_to_json(p));
    series[name] = {{"attack", s.attack}, {"channel", s.channel}, {"points", points},
                    {"frontier", frontier}};
  }
  return {{"series", series}};
}

Report report_from_json(const json& doc) {
  if (!doc.is_object()) throw SchemaError("$", "expected a JSON object");
  const auto it = doc.find("series");
  if (it == doc.end() || !it->is_object()) throw SchemaError("series", "expected an object");
  Report report;
  for (const auto& [name, s] : it->items()) {
    const std::string where = "series." + name;
    SweepResult r;
    if (!s.contains("attack") || !s["attack"].is_string()) {
      throw SchemaError(where + ".attack", "expected a string");
    }
    if (!s.contains("channel") || !s["channel"].is_string()) {
      throw SchemaError(where + ".channel", "expected a string");
    }
    r.attack = s["attack"].get<std::string>();
    r.channel = s["channel"].get<std::string>();
    for (const char* key : {"points", "frontier"}) {
      if (!s.contains(key) || !s[key].is_array()) {
        throw SchemaError(where + "." + key, "expected an array");
      }
      auto& dst = std::string(key) == "points" ? r.points : r.frontier;
      for (std::size_t i = 0; i < s[key].size(); ++i) {
        dst.push_back(point_from_json(s[key][i], where + "." + key + "[" + std::to_string(i) + "]"));
      }
    }
    report.series.emplace(name, std::move(r));
  }
  return report;
}

std::string sweep_csv(const SweepResult& sweep) {
  std::ostringstream os;
  os.precision(17);
  os << "epsilon,queries,fidelity,status\n";
  for (const auto& p : sweep.points) {
    os << p.epsilon << ',' << p.queries << ',' << p.fidelity << ',' << to_string(p.status) << '\n';
  }
  return os.str();
}

void emit_report(const Report& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "report.json", std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / "report.json").string());
    out << report_to_json(report).dump(2) << '\n';
  }
  for (const auto& [name, s] : report.series) {
    std::ofstream out(dir / (name + ".csv"), std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / (name + ".csv")).string());
    out << sweep_csv(s);
  }
}

Report load_report(const std::filesystem::path& json_path) {
  std::ifstream in(json_path, std::ios::binary);
  if (!in) throw Error("cannot open report " + json_path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError("$", e.what());
  }
  return report_from_json(doc);
}

}  // namespace treestealer
