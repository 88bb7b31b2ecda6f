#include "cli.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "treestealer/baseline.hpp"
#include "treestealer/cart.hpp"
#include "treestealer/channel.hpp"
#include "treestealer/error.hpp"
#include "treestealer/eval.hpp"
#include "treestealer/extractor.hpp"
#include "treestealer/generate.hpp"
#include "treestealer/tree_io.hpp"

namespace treestealer::cli {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 0;
  std::string out;
  std::string log_level = "warn";
};

std::pair<double, double> parse_pair(const std::string& text, const std::string& what) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw UsageError(what + " must look like a:b, got '" + text + "'");
  try {
    std::size_t used = 0;
    const double a = std::stod(text.substr(0, colon), &used);
    if (used != colon) throw std::invalid_argument(text);
    const auto rest = text.substr(colon + 1);
    const double b = std::stod(rest, &used);
    if (used != rest.size()) throw std::invalid_argument(text);
    return {a, b};
  } catch (const std::logic_error&) {
    throw UsageError(what + " must look like a:b, got '" + text + "'");
  }
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot write " + path);
  f << text;
}

void require_file(const std::string& path, const std::string& flag) {
  if (!path.empty() && !fs::is_regular_file(path)) {
    throw UsageError(flag + ": no such file '" + path + "'");
  }
}

DecisionTree target_from(const std::string& tree_path, const std::string& dataset_path,
                         bool no_header, spdlog::logger& log) {
  if (!tree_path.empty()) return load_tree(tree_path);
  const auto ds = load_dataset(dataset_path, !no_header);
  log.info("training CART on {} rows", ds.rows.size());
  return train_cart(ds.rows);
}

Dataset fidelity_dataset(const DecisionTree& tree, std::optional<double> grid_step,
                         std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const auto grid = grid_step ? grid_step : tree.threshold_grid();
  return grid ? grid_dataset(tree, *grid, n, rng) : uniform_dataset(tree, n, rng);
}

std::string fmt_real(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_st>(err);
  spdlog::logger log("treestealer", sink);
  log.set_pattern("[%l] %v");

  CLI::App app{"Decision-tree extraction from simulated TEE side channels", "treestealer"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "RNG seed")->envname("TREESTEALER_SEED");
  app.add_option("--out", g.out, "Output file (directory for sweep)");
  app.add_option("--log-level", g.log_level, "error|warn|info|debug")
      ->check(CLI::IsMember({"error", "warn", "info", "debug"}));

  // gen-tree
  auto* gen = app.add_subcommand("gen-tree", "Generate a random grid tree");
  std::size_t gen_features = 2;
  std::string gen_depth = "2:4";
  std::string gen_range = "0:1";
  double gen_grid = 0.125;
  double gen_split = 0.7;
  bool gen_regression = false;
  std::optional<int> gen_classes;
  gen->add_option("--features", gen_features, "Number of features")->check(CLI::PositiveNumber);
  gen->add_option("--depth", gen_depth, "min:max leaf depth");
  gen->add_option("--range", gen_range, "lo:hi for all features or one lo:hi per feature, comma separated");
  gen->add_option("--grid", gen_grid, "Threshold grid step")->check(CLI::PositiveNumber);
  gen->add_option("--split-prob", gen_split, "Split probability between min and max depth")
      ->check(CLI::Range(0.0, 1.0));
  gen->add_flag("--regression", gen_regression, "Real-valued leaves");
  gen->add_option("--classes", gen_classes, "Draw class labels from [0, k)")->check(CLI::PositiveNumber);

  // train
  auto* train = app.add_subcommand("train", "Train a CART tree on a CSV dataset");
  std::string train_dataset;
  bool train_no_header = false;
  CartConfig cart;
  train->add_option("--dataset", train_dataset, "CSV file, label in the last column")->required();
  train->add_flag("--no-header", train_no_header, "The CSV has no header row");
  train->add_option("--max-depth", cart.max_depth)->check(CLI::PositiveNumber);
  train->add_option("--min-leaf", cart.min_leaf)->check(CLI::PositiveNumber);
  train->add_option("--margin", cart.margin, "Range margin as a share of the span")
      ->check(CLI::NonNegativeNumber);

  // attack
  auto* attack = app.add_subcommand("attack", "Extract a tree through a side channel");
  std::string at_tree;
  std::string at_dataset;
  bool at_no_header = false;
  std::string at_channel = "perfect";
  double at_eps = 0.0;
  bool at_strict = true;
  bool at_no_tracking = false;
  double at_noise = 0.0;
  std::string at_transcript;
  std::int64_t at_max_queries = 0;
  auto* at_tree_opt = attack->add_option("--tree", at_tree, "Target tree JSON");
  auto* at_ds_opt = attack->add_option("--dataset", at_dataset, "Train the target on this CSV");
  at_tree_opt->excludes(at_ds_opt);
  attack->add_flag("--no-header", at_no_header, "The CSV has no header row");
  attack->add_option("--channel", at_channel, "perfect|phr|step")
      ->check(CLI::IsMember({"perfect", "phr", "step"}));
  attack->add_option("--epsilon", at_eps, "Threshold resolution")->required()->check(CLI::PositiveNumber);
  attack->add_flag("--strict,!--lenient", at_strict, "Fail on truncated PHR traces (default)");
  attack->add_flag("--no-passive-tracking", at_no_tracking, "Only track ranges at the attacked node");
  attack->add_option("--noise", at_noise, "Per-bit trace flip probability")->check(CLI::Range(0.0, 1.0));
  attack->add_option("--transcript", at_transcript, "Write the query transcript as JSON lines");
  attack->add_option("--max-queries", at_max_queries, "Query budget, 0 = unlimited")
      ->check(CLI::NonNegativeNumber);

  // baseline
  auto* base = app.add_subcommand("baseline", "Label-only black-box extraction");
  std::string bl_tree;
  double bl_eps = 0.0;
  std::int64_t bl_max = 1'000'000;
  base->add_option("--tree", bl_tree, "Target tree JSON")->required();
  base->add_option("--epsilon", bl_eps)->required()->check(CLI::PositiveNumber);
  base->add_option("--max-queries", bl_max)->check(CLI::PositiveNumber);

  // eval
  auto* ev = app.add_subcommand("eval", "Fidelity of a shadow tree against its target");
  std::string ev_target;
  std::string ev_shadow;
  std::string ev_dataset;
  bool ev_no_header = false;
  std::size_t ev_grid_n = 0;
  std::optional<double> ev_grid_step;
  ev->add_option("--target", ev_target)->required();
  ev->add_option("--shadow", ev_shadow)->required();
  auto* ev_ds = ev->add_option("--dataset", ev_dataset, "CSV rows to compare on");
  auto* ev_gd = ev->add_option("--grid-dataset", ev_grid_n, "Synthesize N samples in the ranges")
                    ->check(CLI::PositiveNumber);
  ev_ds->excludes(ev_gd);
  ev->add_flag("--no-header", ev_no_header);
  ev->add_option("--grid-step", ev_grid_step, "Sample grid-cell centres with this step")
      ->check(CLI::PositiveNumber);

  // sweep
  auto* sw = app.add_subcommand("sweep", "Epsilon-halving sweep with Pareto frontier");
  std::string sw_tree;
  std::string sw_dataset;
  bool sw_no_header = false;
  std::string sw_attack = "extractor";
  std::string sw_channel = "perfect";
  SweepConfig sw_cfg;
  std::size_t sw_grid_n = 1000;
  std::optional<double> sw_grid_step;
  bool sw_no_tracking = false;
  auto* sw_tree_opt = sw->add_option("--tree", sw_tree);
  auto* sw_ds_opt = sw->add_option("--dataset", sw_dataset, "Train the target on this CSV and measure fidelity on it");
  sw_tree_opt->excludes(sw_ds_opt);
  sw->add_flag("--no-header", sw_no_header);
  sw->add_option("--attack", sw_attack, "extractor|baseline|both")
      ->check(CLI::IsMember({"extractor", "baseline", "both"}));
  sw->add_option("--channel", sw_channel)->check(CLI::IsMember({"perfect", "phr", "step"}));
  sw->add_option("--eps-start", sw_cfg.eps_start)->check(CLI::PositiveNumber);
  sw->add_option("--timeout", sw_cfg.timeout_seconds, "Seconds per run")->check(CLI::PositiveNumber);
  sw->add_option("--plateau", sw_cfg.plateau_limit)->check(CLI::PositiveNumber);
  sw->add_option("--max-points", sw_cfg.max_points)->check(CLI::PositiveNumber);
  sw->add_option("--grid-dataset", sw_grid_n, "Synthetic fidelity samples")->check(CLI::PositiveNumber);
  sw->add_option("--grid-step", sw_grid_step)->check(CLI::PositiveNumber);
  sw->add_flag("--no-passive-tracking", sw_no_tracking);
  sw->add_flag("--wall-time", sw_cfg.record_wall_time, "Record per-run wall time");

  // report
  auto* rep = app.add_subcommand("report", "Summarize a sweep report");
  std::string rep_in;
  rep->add_option("--in", rep_in, "report.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }
  log.set_level(spdlog::level::from_str(g.log_level));

  try {
    if (*gen) {
      GeneratorConfig cfg;
      cfg.num_features = gen_features;
      const auto [dmin, dmax] = parse_pair(gen_depth, "--depth");
      cfg.depth_min = static_cast<int>(dmin);
      cfg.depth_max = static_cast<int>(dmax);
      std::vector<std::string> parts;
      for (std::size_t start = 0;;) {
        const auto comma = gen_range.find(',', start);
        parts.push_back(gen_range.substr(start, comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
      if (parts.size() != 1 && parts.size() != gen_features) {
        throw UsageError("--range needs 1 or " + std::to_string(gen_features) + " entries");
      }
      for (std::size_t f = 0; f < gen_features; ++f) {
        const auto [lo, hi] = parse_pair(parts[parts.size() == 1 ? 0 : f], "--range");
        cfg.ranges_low.push_back(lo);
        cfg.ranges_high.push_back(hi);
      }
      cfg.grid = gen_grid;
      cfg.seed = g.seed;
      cfg.split_probability = gen_split;
      cfg.regression = gen_regression;
      cfg.num_classes = gen_classes;
      const auto tree = generate_random_tree(cfg);
      write_text(g.out, tree_to_json(tree).dump(2) + "\n", out);
      if (!g.out.empty()) {
        out << "tree: " << tree.size() << " nodes, " << tree.num_leaves() << " leaves, depth "
            << tree.max_depth() << "\n";
      }
      return kOk;
    }

    if (*train) {
      require_file(train_dataset, "--dataset");
      const auto ds = load_dataset(train_dataset, !train_no_header);
      const auto tree = train_cart(ds.rows, cart);
      write_text(g.out, tree_to_json(tree).dump(2) + "\n", out);
      if (!g.out.empty()) {
        out << "tree: " << tree.size() << " nodes, " << tree.num_leaves() << " leaves, depth "
            << tree.max_depth() << "\n";
      }
      return kOk;
    }

    if (*attack) {
      if (at_tree.empty() == at_dataset.empty()) throw UsageError("attack needs --tree or --dataset");
      require_file(at_tree, "--tree");
      require_file(at_dataset, "--dataset");
      const auto target = target_from(at_tree, at_dataset, at_no_header, log);
      ChannelModel model;
      model.kind = parse_channel_kind(at_channel);
      model.strict = at_strict;
      model.flip_noise = at_noise;
      SimulatedChannel channel(target, model, g.seed);
      AttackParams params{target.ranges_low(), target.ranges_high(), at_eps, !at_no_tracking,
                          at_max_queries};
      ExtractionResult result{ShadowTree(target.num_features()), std::nullopt, 0, {}, {}};
      try {
        result = dt_extraction(channel, params);
      } catch (const Error& e) {
        out << "attack failed after " << channel.queries() << " queries\n";
        throw;
      }
      for (const auto& w : result.warnings) log.warn("{}", w);
      if (!at_transcript.empty()) write_text(at_transcript, transcript_jsonl(result.transcript), out);
      write_text(g.out, tree_to_json(*result.tree).dump(2) + "\n", out);
      out << "queries " << result.queries << "\n";
      out << "shadow: " << result.tree->size() << " nodes, " << result.tree->num_leaves()
          << " leaves\n";
      return kOk;
    }

    if (*base) {
      require_file(bl_tree, "--tree");
      const auto target = load_tree(bl_tree);
      TreeLabelOracle oracle(target);
      const auto r = api_attack_extract(oracle, target.ranges_low(), target.ranges_high(),
                                        {bl_eps, bl_max});
      write_text(g.out, tree_to_json(r.tree).dump(2) + "\n", out);
      out << "queries " << r.queries << "\n";
      out << "shadow: " << r.tree.size() << " nodes, " << r.tree.num_leaves() << " leaves\n";
      if (r.budget_exhausted) {
        log.warn("query budget exhausted; shadow tree is partial");
        return kPartial;
      }
      return kOk;
    }

    if (*ev) {
      require_file(ev_target, "--target");
      require_file(ev_shadow, "--shadow");
      require_file(ev_dataset, "--dataset");
      const auto target = load_tree(ev_target);
      const auto shadow = load_tree(ev_shadow);
      Dataset ds;
      if (!ev_dataset.empty()) {
        ds = load_dataset(ev_dataset, !ev_no_header);
      } else {
        ds = fidelity_dataset(target, ev_grid_step, ev_grid_n == 0 ? 1000 : ev_grid_n, g.seed);
      }
      const double r = extraction_error(target, shadow, ds);
      out << "fidelity " << fmt_real(1.0 - r) << "\n";
      out << "error " << fmt_real(r) << " over " << ds.rows.size() << " rows\n";
      if (!g.out.empty()) {
        nlohmann::json j{{"fidelity", 1.0 - r}, {"error", r}, {"rows", ds.rows.size()}};
        write_text(g.out, j.dump(2) + "\n", out);
      }
      return kOk;
    }

    if (*sw) {
      if (g.out.empty()) throw UsageError("sweep needs --out <directory>");
      if (sw_tree.empty() == sw_dataset.empty()) throw UsageError("sweep needs --tree or --dataset");
      require_file(sw_tree, "--tree");
      require_file(sw_dataset, "--dataset");
      const auto target = target_from(sw_tree, sw_dataset, sw_no_header, log);
      Dataset ds;
      if (!sw_dataset.empty()) {
        ds = load_dataset(sw_dataset, !sw_no_header);
      } else {
        ds = fidelity_dataset(target, sw_grid_step, sw_grid_n, g.seed);
      }
      sw_cfg.channel.kind = parse_channel_kind(sw_channel);
      sw_cfg.passive_tracking = !sw_no_tracking;
      sw_cfg.seed = g.seed;
      std::vector<AttackKind> kinds;
      if (sw_attack != "baseline") kinds.push_back(AttackKind::Extractor);
      if (sw_attack != "extractor") kinds.push_back(AttackKind::Baseline);
      Report report;
      bool partial = false;
      for (const auto kind : kinds) {
        sw_cfg.attack = kind;
        auto s = pareto_sweep(target, ds, sw_cfg);
        const auto& last = s.points.back();
        partial = partial || last.status != PointStatus::Ok || last.fidelity < 1.0;
        out << s.attack << ": " << s.points.size() << " runs, last eps " << fmt_real(last.epsilon)
            << ", queries " << last.queries << ", fidelity " << fmt_real(last.fidelity) << ", "
            << to_string(last.status) << "\n";
        report.series.emplace(s.attack, std::move(s));
      }
      emit_report(report, g.out);
      return partial ? kPartial : kOk;
    }

    if (*rep) {
      require_file(rep_in, "--in");
      const auto report = load_report(rep_in);
      for (const auto& [name, s] : report.series) {
        out << name << " (" << s.channel << ")\n";
        out << "  epsilon        queries   fidelity  status\n";
        for (const auto& p : s.points) {
          out << "  " << std::left << std::setw(14) << fmt_real(p.epsilon) << " " << std::right
              << std::setw(8) << p.queries << "  " << std::fixed << std::setprecision(4)
              << p.fidelity << std::defaultfloat << "    " << to_string(p.status) << "\n";
        }
        out << "  frontier:";
        for (const auto& p : s.frontier) out << " (" << p.queries << ", " << fmt_real(p.fidelity) << ")";
        out << "\n";
      }
      return kOk;
    }
  } catch (const UsageError& e) {
    log.error("{}", e.what());
    return kUsage;
  } catch (const BudgetExhausted& e) {
    log.error("{}", e.what());
    return kPartial;
  } catch (const std::exception& e) {
    log.error("{}", e.what());
    return kFailure;
  }
  return kUsage;
}

}  // namespace treestealer::cli
