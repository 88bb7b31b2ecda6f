#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>

#include "treestealer/tree.hpp"

namespace treestealer {

// Tree JSON:
//   {"num_features": m, "ranges_low": [..], "ranges_high": [..],
//    "nodes": [{"id", "feature", "threshold", "left", "right", "value"}],
//    "root": id}
// Split fields are null on leaves, "value" is null on inner nodes. Integer
// labels stay JSON integers, real labels are written as floats. An optional
// "threshold_grid" records the generator grid.
nlohmann::json tree_to_json(const DecisionTree& tree);
DecisionTree tree_from_json(const nlohmann::json& doc);

void save_tree(const DecisionTree& tree, const std::filesystem::path& path);
DecisionTree load_tree(const std::filesystem::path& path);

nlohmann::json label_to_json(const Label& label);
Label label_from_json(const nlohmann::json& value, const std::string& field);

}  // namespace treestealer
