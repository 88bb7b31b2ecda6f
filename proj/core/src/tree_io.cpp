#include "treestealer/tree_io.hpp"

#include <fstream>
#include <unordered_map>

#include "treestealer/error.hpp"

namespace treestealer {

using nlohmann::json;

namespace {

const json& require(const json& obj, const std::string& key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(where + key, "missing required key");
  return *it;
}

std::vector<double> real_array(const json& value, const std::string& field) {
  if (!value.is_array()) throw SchemaError(field, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (!value[i].is_number()) {
      throw SchemaError(field + "[" + std::to_string(i) + "]", "expected a number");
    }
    out.push_back(value[i].get<double>());
  }
  return out;
}

std::optional<int> optional_int(const json& value, const std::string& field) {
  if (value.is_null()) return std::nullopt;
  if (!value.is_number_integer()) throw SchemaError(field, "expected an integer or null");
  return value.get<int>();
}

}  // namespace

json label_to_json(const Label& label) {
  if (const auto* i = std::get_if<std::int64_t>(&label)) return *i;
  return std::get<double>(label);
}

Label label_from_json(const json& value, const std::string& field) {
  if (value.is_number_integer()) return value.get<std::int64_t>();
  if (value.is_number_float()) return value.get<double>();
  throw SchemaError(field, "expected an integer or real label");
}

json tree_to_json(const DecisionTree& tree) {
  json nodes = json::array();
  for (const auto& n : tree.nodes()) {
    json node;
    node["id"] = n.id;
    node["feature"] = n.feature ? json(*n.feature) : json(nullptr);
    node["threshold"] = n.threshold ? json(*n.threshold) : json(nullptr);
    node["left"] = n.left ? json(*n.left) : json(nullptr);
    node["right"] = n.right ? json(*n.right) : json(nullptr);
    node["value"] = n.value ? label_to_json(*n.value) : json(nullptr);
    nodes.push_back(std::move(node));
  }
  json doc;
  doc["num_features"] = tree.num_features();
  doc["ranges_low"] = tree.ranges_low();
  doc["ranges_high"] = tree.ranges_high();
  doc["nodes"] = std::move(nodes);
  doc["root"] = tree.root().id;
  if (tree.threshold_grid()) doc["threshold_grid"] = *tree.threshold_grid();
  return doc;
}

DecisionTree tree_from_json(const json& doc) {
  if (!doc.is_object()) throw SchemaError("$", "expected a JSON object");
  const auto& m_value = require(doc, "num_features", "");
  if (!m_value.is_number_integer() || m_value.get<long long>() < 1) {
    throw SchemaError("num_features", "expected a positive integer");
  }
  const auto m = m_value.get<std::size_t>();
  auto low = real_array(require(doc, "ranges_low", ""), "ranges_low");
  auto high = real_array(require(doc, "ranges_high", ""), "ranges_high");
  if (low.size() != m) throw SchemaError("ranges_low", "length differs from num_features");
  if (high.size() != m) throw SchemaError("ranges_high", "length differs from num_features");
  const auto& nodes_value = require(doc, "nodes", "");
  if (!nodes_value.is_array()) throw SchemaError("nodes", "expected an array");
  const auto& root_value = require(doc, "root", "");
  if (!root_value.is_number_integer()) throw SchemaError("root", "expected an integer node id");

  // File ids are arbitrary integers; map them to positions first.
  std::unordered_map<int, int> position;
  std::vector<TreeNode> nodes;
  for (std::size_t i = 0; i < nodes_value.size(); ++i) {
    const auto& item = nodes_value[i];
    const std::string where = "nodes[" + std::to_string(i) + "].";
    if (!item.is_object()) throw SchemaError("nodes[" + std::to_string(i) + "]", "expected an object");
    const auto& id_value = require(item, "id", where);
    if (!id_value.is_number_integer()) throw SchemaError(where + "id", "expected an integer");
    const int id = id_value.get<int>();
    if (!position.emplace(id, static_cast<int>(i)).second) {
      throw SchemaError(where + "id", "duplicate node id " + std::to_string(id));
    }
    TreeNode node;
    node.id = id;
    node.feature = optional_int(require(item, "feature", where), where + "feature");
    const auto& t = require(item, "threshold", where);
    if (!t.is_null()) {
      if (!t.is_number()) throw SchemaError(where + "threshold", "expected a number or null");
      node.threshold = t.get<double>();
    }
    node.left = optional_int(require(item, "left", where), where + "left");
    node.right = optional_int(require(item, "right", where), where + "right");
    const auto& v = require(item, "value", where);
    if (!v.is_null()) node.value = label_from_json(v, where + "value");
    nodes.push_back(std::move(node));
  }
  auto resolve = [&](std::optional<int>& ref, const std::string& field) {
    if (!ref) return;
    const auto it = position.find(*ref);
    if (it == position.end()) throw SchemaError(field, "unknown node id " + std::to_string(*ref));
    ref = it->second;
  };
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string where = "nodes[" + std::to_string(i) + "].";
    resolve(nodes[i].left, where + "left");
    resolve(nodes[i].right, where + "right");
  }
  const auto root_it = position.find(root_value.get<int>());
  if (root_it == position.end()) throw SchemaError("root", "unknown node id");

  DecisionTree tree(std::move(nodes), root_it->second, std::move(low), std::move(high));
  if (const auto it = doc.find("threshold_grid"); it != doc.end() && !it->is_null()) {
    if (!it->is_number() || it->get<double>() <= 0) {
      throw SchemaError("threshold_grid", "expected a positive number");
    }
    tree.set_threshold_grid(it->get<double>());
  }
  return tree;
}

void save_tree(const DecisionTree& tree, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << tree_to_json(tree).dump(2) << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

DecisionTree load_tree(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw SchemaError("$", std::string("invalid JSON: ") + e.what());
  }
  return tree_from_json(doc);
}

}  // namespace treestealer
