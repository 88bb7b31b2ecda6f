#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "treestealer/cart.hpp"
#include "treestealer/channel.hpp"
#include "treestealer/random.hpp"
#include "treestealer/tree.hpp"

namespace treestealer {

struct Dataset {
  std::vector<Sample> rows;
  std::vector<std::string> feature_names;
  // Class names when labels were read as strings; label i is class_names[i].
  std::vector<std::string> class_names;

  std::size_t num_features() const { return rows.empty() ? 0 : rows.front().x.size(); }
};

// Last column is the label. Integer label cells become class labels, other
// numbers regression values, anything else class names mapped to their
// sorted index.
Dataset load_dataset(const std::filesystem::path& path, bool has_header);
Dataset parse_dataset(std::string_view csv, bool has_header);

struct Ranges {
  std::vector<double> low;
  std::vector<double> high;
};

// Per feature [min - margin*span, max + margin*span]. A constant feature
// gets +-0.5 around its value.
Ranges infer_ranges(const Dataset& dataset, double margin = 0.05);

// Uniform samples over the box, labelled by `tree`.
Dataset uniform_dataset(const DecisionTree& tree, std::size_t n, Rng& rng);
// Samples drawn uniformly from the centres of grid cells low + (k + 1/2) * grid.
Dataset grid_dataset(const DecisionTree& tree, double grid, std::size_t n, Rng& rng);

// Share of rows on which the two trees predict different labels.
double extraction_error(const DecisionTree& target, const DecisionTree& shadow,
                        const Dataset& dataset);
inline double fidelity(const DecisionTree& target, const DecisionTree& shadow,
                       const Dataset& dataset) {
  return 1.0 - extraction_error(target, shadow, dataset);
}

enum class AttackKind { Extractor, Baseline };
std::string to_string(AttackKind kind);
AttackKind parse_attack_kind(const std::string& name);

enum class PointStatus { Ok, Timeout, Plateau, PathDeviation, Error };
std::string to_string(PointStatus status);
PointStatus parse_point_status(const std::string& name);

struct SweepPoint {
  double epsilon = 0.0;
  std::int64_t queries = 0;
  double fidelity = 0.0;
  PointStatus status = PointStatus::Ok;
  std::optional<double> wall_time;
  // Set for PathDeviation and Error points.
  std::string message;

  friend bool operator==(const SweepPoint&, const SweepPoint&) = default;
};

struct SweepResult {
  std::string attack;
  std::string channel;
  std::vector<SweepPoint> points;
  std::vector<SweepPoint> frontier;

  friend bool operator==(const SweepResult&, const SweepResult&) = default;
};

struct SweepConfig {
  AttackKind attack = AttackKind::Extractor;
  ChannelModel channel;
  bool passive_tracking = true;
  double eps_start = 100.0;
  double timeout_seconds = 60.0;
  int plateau_limit = 10;
  int max_points = 40;
  std::int64_t max_queries_per_run = 5'000'000;
  std::uint64_t seed = 0;
  // Wall times make reports non-reproducible, so they are opt-in.
  bool record_wall_time = false;
};

// Runs the attack at eps_start, eps_start/2, ... until fidelity reaches 1,
// a run exceeds the timeout, plateau_limit consecutive runs give the same
// fidelity, or max_points runs were made.
SweepResult pareto_sweep(const DecisionTree& target, const Dataset& dataset,
                         const SweepConfig& config);

// Non-dominated points by (fewer queries, higher fidelity), queries ascending.
// Failed points are skipped.
std::vector<SweepPoint> pareto_frontier(std::span<const SweepPoint> points);

struct Report {
  std::map<std::string, SweepResult> series;
  friend bool operator==(const Report&, const Report&) = default;
};

nlohmann::json report_to_json(const Report& report);
Report report_from_json(const nlohmann::json& doc);

// Writes report.json plus <attack>.csv per series into `dir`.
void emit_report(const Report& report, const std::filesystem::path& dir);
Report load_report(const std::filesystem::path& json_path);
std::string sweep_csv(const SweepResult& sweep);

}  // namespace treestealer
