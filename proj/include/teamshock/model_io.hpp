#pragma once

#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "teamshock/model_selection.hpp"
#include "teamshock/version.hpp"

namespace teamshock {

/// A model file: the fitted regressor plus what it predicts.
struct ModelFile {
  Regressor model;
  std::string outcome;
  int month = 0;
  std::string spec;
};

namespace detail {

inline nlohmann::ordered_json tree_to_json(const RegressionTree& t) {
  nlohmann::ordered_json j;
  j["max_depth"] = t.max_depth();
  j["min_samples_leaf"] = t.min_samples_leaf();
  auto nodes = nlohmann::ordered_json::array();
  for (const auto& n : t.nodes()) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
  j["nodes"] = std::move(nodes);
  return j;
}

inline RegressionTree tree_from_json(const nlohmann::json& j) {
  std::vector<TreeNode> nodes;
  for (const auto& a : j.at("nodes")) {
    if (!a.is_array() || a.size() != 5) throw std::runtime_error("model: malformed tree node");
    nodes.push_back({a[0].get<int>(), a[1].get<double>(), a[2].get<int>(), a[3].get<int>(), a[4].get<double>()});
  }
  if (nodes.empty()) throw std::runtime_error("model: tree without nodes");
  const int n = static_cast<int>(nodes.size());
  for (const auto& nd : nodes) {
    if (nd.feature >= 0 && (nd.left <= 0 || nd.left >= n || nd.right <= 0 || nd.right >= n))
      throw std::runtime_error("model: tree child index out of range");
  }
  return RegressionTree(std::move(nodes), j.at("max_depth").get<int>(), j.at("min_samples_leaf").get<int>());
}

}  // namespace detail

inline void write_model(std::ostream& out, const ModelFile& f) {
  nlohmann::ordered_json j;
  j["format"] = "teamshock-model";
  j["version"] = kModelFormatVersion;
  j["kind"] = to_string(f.model.kind);
  j["outcome"] = f.outcome;
  j["month"] = f.month;
  j["spec"] = f.spec;
  j["features"] = f.model.features;
  auto trees = nlohmann::ordered_json::array();
  if (f.model.kind == ModelKind::gbdt) {
    j["initial"] = f.model.gbdt.initial;
    j["learning_rate"] = f.model.gbdt.learning_rate;
    for (const auto& t : f.model.gbdt.trees) trees.push_back(detail::tree_to_json(t));
  } else {
    for (const auto& t : f.model.rf.trees) trees.push_back(detail::tree_to_json(t));
  }
  j["trees"] = std::move(trees);
  out << j.dump() << '\n';
}

inline ModelFile read_model(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("model: invalid JSON: ") + e.what());
  }
  try {
    if (j.at("format") != "teamshock-model") throw std::runtime_error("model: not a teamshock model file");
    if (j.at("version").get<int>() != kModelFormatVersion)
      throw std::runtime_error("model: unsupported format version " + j.at("version").dump());
    ModelFile f;
    f.model.kind = model_kind_from_string(j.at("kind").get<std::string>());
    f.outcome = j.at("outcome").get<std::string>();
    f.month = j.at("month").get<int>();
    f.spec = j.value("spec", "");
    f.model.features = j.at("features").get<std::vector<std::string>>();
    std::vector<RegressionTree> trees;
    for (const auto& t : j.at("trees")) {
      trees.push_back(detail::tree_from_json(t));
      for (const auto& n : trees.back().nodes())
        if (n.feature >= static_cast<int>(f.model.features.size()))
          throw std::runtime_error("model: split feature index out of range");
    }
    if (f.model.kind == ModelKind::gbdt) {
      f.model.gbdt.initial = j.at("initial").get<double>();
      f.model.gbdt.learning_rate = j.at("learning_rate").get<double>();
      f.model.gbdt.trees = std::move(trees);
    } else {
      if (trees.empty()) throw std::runtime_error("model: forest without trees");
      f.model.rf.trees = std::move(trees);
    }
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("model: ") + e.what());
  }
}

}  // namespace teamshock
