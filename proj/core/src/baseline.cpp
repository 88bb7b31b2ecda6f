#include "treestealer/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>

#include "treestealer/error.hpp"

namespace treestealer {

void BaselineConfig::validate() const {
  if (!std::isfinite(epsilon) || !(epsilon > 0.0)) throw Error("epsilon must be positive");
  if (max_queries <= 0) throw Error("max_queries must be positive");
}

namespace {

struct Region {
  std::vector<double> low;
  std::vector<double> high;

  std::vector<double> centre() const {
    std::vector<double> c(low.size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = low[i] + (high[i] - low[i]) / 2;
    return c;
  }
  bool thin(double eps) const {
    for (std::size_t i = 0; i < low.size(); ++i) {
      if (high[i] - low[i] <= eps) return true;
    }
    return false;
  }
};

bool contains(const LeafBox& b, std::span<const double> x) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < b.low[i] || x[i] > b.high[i]) return false;
  }
  return true;
}

bool overlaps(const LeafBox& b, const Region& r) {
  for (std::size_t i = 0; i < r.low.size(); ++i) {
    if (b.high[i] <= r.low[i] || b.low[i] >= r.high[i]) return false;
  }
  return true;
}

// Parts of `region` outside boxes[start..], ignoring parts thinner than eps.
void uncovered(Region region, std::span<const LeafBox> boxes, std::size_t start, double eps,
               std::vector<Region>& out) {
  if (region.thin(eps)) return;
  for (std::size_t i = start; i < boxes.size(); ++i) {
    const auto& b = boxes[i];
    if (!overlaps(b, region)) continue;
    for (std::size_t d = 0; d < region.low.size(); ++d) {
      if (b.low[d] > region.low[d]) {
        Region below = region;
        below.high[d] = b.low[d];
        uncovered(std::move(below), boxes, i + 1, eps, out);
        region.low[d] = b.low[d];
      }
      if (b.high[d] < region.high[d]) {
        Region above = region;
        above.low[d] = b.high[d];
        uncovered(std::move(above), boxes, i + 1, eps, out);
        region.high[d] = b.high[d];
      }
    }
    return;
  }
  out.push_back(std::move(region));
}

struct BudgetHit {};

class Session {
 public:
  Session(LabelOracle& oracle, std::span<const double> lo, std::span<const double> hi,
          const BaselineConfig& config)
      : oracle_(oracle), lo_(lo.begin(), lo.end()), hi_(hi.begin(), hi.end()), config_(config) {}

  Label query(const std::vector<double>& x) {
    if (const auto it = cache_.find(x); it != cache_.end()) return it->second;
    if (queries_ >= config_.max_queries) throw BudgetHit{};
    ++queries_;
    const auto& label = cache_.emplace(x, oracle_.query(x)).first->second;
    for (std::size_t f = 0; f < x.size(); ++f) lines_[line_key(x, f)].emplace(x[f], label);
    return label;
  }

  // Cell of the label at p, bounded per feature by the nearest label changes
  // on the axis-parallel line through p.
  void sweep(const std::vector<double>& p, const Label& label) {
    LeafBox box{lo_, hi_, label};
    try {
      narrow(p, box);
    } catch (const BudgetHit&) {
      boxes_.push_back(std::move(box));
      throw;
    }
    boxes_.push_back(std::move(box));
  }

  void narrow(const std::vector<double>& p, LeafBox& box) {
    for (std::size_t f = 0; f < p.size(); ++f) {
      box.low[f] = boundary(p, f, lo_[f], box.label);
      box.high[f] = boundary(p, f, hi_[f], box.label);
    }
  }

  // Edge of the label's cell between p and `outer` along feature f.
  double boundary(const std::vector<double>& p, std::size_t f, double outer, const Label& label) {
    auto at = [&](double v) {
      auto x = p;
      x[f] = v;
      return x;
    };
    double inside = p[f];
    if (outer == inside || query(at(outer)) == label) return outer;
    // Answers already on this line narrow the bracket.
    const auto& line = lines_.at(line_key(p, f));
    if (outer < inside) {
      for (auto it = line.lower_bound(outer); it != line.end() && it->first < inside; ++it) {
        (it->second == label ? inside : outer) = it->first;
        if (it->second == label) break;
      }
    } else {
      for (auto it = line.upper_bound(outer); it != line.begin();) {
        --it;
        if (it->first <= inside) break;
        (it->second == label ? inside : outer) = it->first;
        if (it->second == label) break;
      }
    }
    while (std::abs(inside - outer) > config_.epsilon) {
      const double mid = outer + (inside - outer) / 2;
      (query(at(mid)) == label ? inside : outer) = mid;
    }
    return outer + (inside - outer) / 2;
  }

  static std::pair<std::size_t, std::vector<double>> line_key(std::vector<double> x, std::size_t f) {
    x[f] = 0.0;
    return {f, std::move(x)};
  }

  void run() {
    const auto start = Region{lo_, hi_}.centre();
    sweep(start, query(start));
    for (;;) {
      std::vector<Region> gaps;
      uncovered(Region{lo_, hi_}, boxes_, 0, config_.epsilon, gaps);
      if (gaps.empty()) return;
      bool progress = false;
      for (auto& gap : gaps) {
        if (const auto seed = known_point(gap)) {
          sweep(seed->first, seed->second);
          progress = true;
          continue;
        }
        const auto c = gap.centre();
        if (covered(c)) continue;
        sweep(c, query(c));
        progress = true;
      }
      if (!progress) return;
    }
  }

  std::int64_t queries() const { return queries_; }
  std::vector<LeafBox>& boxes() { return boxes_; }

 private:
  bool covered(std::span<const double> x) const {
    return std::any_of(boxes_.begin(), boxes_.end(),
                       [&](const LeafBox& b) { return contains(b, x); });
  }

  bool boxed(const Label& label) const {
    return std::any_of(boxes_.begin(), boxes_.end(),
                       [&](const LeafBox& b) { return b.label == label; });
  }

  // Already-answered point of a new label inside the gap, nearest the gap
  // centre.
  std::optional<std::pair<std::vector<double>, Label>> known_point(const Region& gap) const {
    const auto c = gap.centre();
    std::optional<std::pair<std::vector<double>, Label>> best;
    double best_dist = 0.0;
    for (const auto& [x, label] : cache_) {
      bool inside = true;
      double dist = 0.0;
      for (std::size_t i = 0; i < x.size() && inside; ++i) {
        inside = x[i] >= gap.low[i] && x[i] <= gap.high[i];
        dist += (x[i] - c[i]) * (x[i] - c[i]);
      }
      if (!inside || covered(x) || boxed(label)) continue;
      if (!best || dist < best_dist) {
        best = {x, label};
        best_dist = dist;
      }
    }
    return best;
  }

  LabelOracle& oracle_;
  std::vector<double> lo_;
  std::vector<double> hi_;
  BaselineConfig config_;
  std::map<std::vector<double>, Label> cache_;
  std::map<std::pair<std::size_t, std::vector<double>>, std::map<double, Label>> lines_;
  std::vector<LeafBox> boxes_;
  std::int64_t queries_ = 0;
};

Label majority(std::span<const LeafBox* const> boxes, const Region& region) {
  std::map<Label, double> volume;
  for (const auto* b : boxes) {
    double v = 1.0;
    for (std::size_t d = 0; d < region.low.size(); ++d) {
      v *= std::max(0.0, std::min(b->high[d], region.high[d]) - std::max(b->low[d], region.low[d]));
    }
    volume[b->label] += v;
  }
  return std::max_element(volume.begin(), volume.end(),
                          [](const auto& a, const auto& b) { return a.second < b.second; })
      ->first;
}

// Side of cut c at feature f holding most of the box.
bool goes_right(const LeafBox& b, std::size_t f, double c) {
  return c - b.low[f] >= b.high[f] - c;
}

int build(TreeBuilder& builder, const std::vector<const LeafBox*>& live, const Region& region,
          double tol) {
  const bool uniform = std::all_of(live.begin(), live.end(),
                                   [&](const LeafBox* b) { return b->label == live[0]->label; });
  if (uniform) return builder.leaf(live[0]->label);

  const std::size_t m = region.low.size();
  std::optional<std::pair<std::size_t, double>> best;
  std::size_t best_cost = live.size() + 1;
  for (std::size_t f = 0; f < m; ++f) {
    std::vector<double> cuts;
    for (const auto* b : live) {
      cuts.push_back(b->low[f]);
      cuts.push_back(b->high[f]);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    for (const double c : cuts) {
      if (c - region.low[f] <= tol || region.high[f] - c <= tol) continue;
      std::size_t left = 0;
      std::size_t right = 0;
      bool valid = true;
      for (const auto* b : live) {
        if (goes_right(*b, f, c) ? b->high[f] > c + tol : b->low[f] < c - tol) {
          valid = false;
          break;
        }
        ++(goes_right(*b, f, c) ? right : left);
      }
      if (!valid || left == 0 || right == 0) continue;
      const auto cost = std::max(left, right);
      if (cost < best_cost) {
        best_cost = cost;
        best = {f, c};
      }
    }
  }
  if (!best) return builder.leaf(majority(live, region));

  const auto [f, c] = *best;
  std::vector<const LeafBox*> left_boxes;
  std::vector<const LeafBox*> right_boxes;
  for (const auto* b : live) (goes_right(*b, f, c) ? right_boxes : left_boxes).push_back(b);
  Region left_region = region;
  Region right_region = region;
  left_region.low[f] = c;
  right_region.high[f] = c;
  const int l = build(builder, left_boxes, left_region, tol);
  const int r = build(builder, right_boxes, right_region, tol);
  return builder.inner(static_cast<int>(f), c, l, r);
}

}  // namespace

DecisionTree boxes_to_tree(std::span<const LeafBox> boxes, std::span<const double> ranges_low,
                           std::span<const double> ranges_high, double tol) {
  if (boxes.empty()) throw Error("no boxes to build a tree from");
  std::vector<const LeafBox*> ptrs;
  for (const auto& b : boxes) ptrs.push_back(&b);
  Region all{{ranges_low.begin(), ranges_low.end()}, {ranges_high.begin(), ranges_high.end()}};
  TreeBuilder builder;
  const int root = build(builder, ptrs, all, tol);
  return builder.build(root, all.low, all.high);
}

BaselineResult api_attack_extract(LabelOracle& oracle, std::span<const double> ranges_low,
                                  std::span<const double> ranges_high,
                                  const BaselineConfig& config) {
  config.validate();
  if (ranges_low.size() != ranges_high.size() || ranges_low.size() != oracle.num_features()) {
    throw DimensionMismatch(oracle.num_features(), ranges_low.size());
  }
  Session session(oracle, ranges_low, ranges_high, config);
  bool exhausted = false;
  try {
    session.run();
  } catch (const BudgetHit&) {
    exhausted = true;
  }
  auto& boxes = session.boxes();
  if (boxes.empty()) throw BudgetExhausted("query budget exhausted before the first label");
  auto tree = boxes_to_tree(boxes, ranges_low, ranges_high, config.epsilon);
  return {std::move(tree), session.queries(), exhausted, std::move(boxes)};
}

}  // namespace treestealer
