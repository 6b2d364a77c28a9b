#include "surro/models/model_io.hpp"

namespace surro {

using nlohmann::json;

Vector predict(const AnyModel& model, const Matrix& features) {
  return std::visit([&](const auto& m) { return m.predict(features); }, model);
}

namespace {

json vector_to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vector_from_json(const json& doc) {
  const auto values = doc.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json tree_to_json(const TreeModel& tree) {
  json nodes = json::array();
  for (const auto& n : tree.nodes) {
    nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right},
                     {"value", n.value}, {"weight", n.weight}, {"count", n.count}, {"sse", n.sse}});
  }
  return {{"kind", "tree"},
          {"n_features", tree.n_features},
          {"depth", tree.depth},
          {"params", tree_params_to_json(tree.params)},
          {"nodes", nodes}};
}

TreeModel tree_from_json(const json& doc) {
  TreeModel tree;
  tree.n_features = doc.at("n_features").get<int>();
  tree.depth = doc.at("depth").get<int>();
  tree.params = tree_params_from_json(doc.at("params"));
  for (const auto& n : doc.at("nodes")) {
    TreeNode node;
    node.feature = n.at("feature").get<int>();
    node.threshold = n.at("threshold").get<double>();
    node.left = n.at("left").get<int>();
    node.right = n.at("right").get<int>();
    node.value = n.at("value").get<double>();
    node.weight = n.value("weight", 0.0);
    node.count = n.value("count", 0);
    node.sse = n.value("sse", 0.0);
    tree.nodes.push_back(node);
  }
  const auto size = static_cast<int>(tree.nodes.size());
  if (size == 0) throw Error(Errc::SchemaError, "tree without nodes");
  for (const auto& node : tree.nodes) {
    if (!node.is_leaf() && (node.left <= 0 || node.left >= size || node.right <= 0 || node.right >= size ||
                            node.feature >= tree.n_features)) {
      throw Error(Errc::SchemaError, "tree node references are out of range");
    }
  }
  return tree;
}

}  // namespace

json tree_params_to_json(const TreeParams& p) {
  return {{"max_depth", p.max_depth},         {"min_samples_leaf", p.min_samples_leaf},
          {"min_samples_split", p.min_samples_split}, {"ccp_alpha", p.ccp_alpha},
          {"max_features", p.max_features},   {"leaf_l2", p.leaf_l2}};
}

TreeParams tree_params_from_json(const json& doc) {
  TreeParams p;
  p.max_depth = doc.value("max_depth", p.max_depth);
  p.min_samples_leaf = doc.value("min_samples_leaf", p.min_samples_leaf);
  p.min_samples_split = doc.value("min_samples_split", p.min_samples_split);
  p.ccp_alpha = doc.value("ccp_alpha", p.ccp_alpha);
  p.max_features = doc.value("max_features", p.max_features);
  p.leaf_l2 = doc.value("leaf_l2", p.leaf_l2);
  return p;
}

json model_to_json(const AnyModel& model) {
  struct Visitor {
    json operator()(const LinearModel& m) const {
      return {{"kind", "linear"}, {"coefficients", vector_to_json(m.coefficients)}, {"intercept", m.intercept}};
    }
    json operator()(const LogisticModel& m) const {
      return {{"kind", "logistic"}, {"coefficients", vector_to_json(m.coefficients)}, {"intercept", m.intercept}};
    }
    json operator()(const TreeModel& m) const { return tree_to_json(m); }
    json operator()(const EnsembleModel& m) const {
      json trees = json::array();
      for (const auto& t : m.trees) trees.push_back(tree_to_json(t));
      return {{"kind", m.kind == EnsembleKind::forest ? "forest" : "boosting"},
              {"n_features", m.n_features},
              {"params", {{"learning_rate", m.learning_rate}, {"base_score", m.base_score}}},
              {"trees", trees}};
    }
  };
  return std::visit(Visitor{}, model);
}

AnyModel model_from_json(const json& doc) {
  try {
    const auto kind = doc.at("kind").get<std::string>();
    if (kind == "linear") {
      LinearModel m;
      m.coefficients = vector_from_json(doc.at("coefficients"));
      m.intercept = doc.at("intercept").get<double>();
      return m;
    }
    if (kind == "logistic") {
      LogisticModel m;
      m.coefficients = vector_from_json(doc.at("coefficients"));
      m.intercept = doc.at("intercept").get<double>();
      return m;
    }
    if (kind == "tree") return tree_from_json(doc);
    if (kind == "forest" || kind == "boosting") {
      EnsembleModel m;
      m.kind = kind == "forest" ? EnsembleKind::forest : EnsembleKind::boosting;
      m.n_features = doc.at("n_features").get<int>();
      m.learning_rate = doc.at("params").at("learning_rate").get<double>();
      m.base_score = doc.at("params").at("base_score").get<double>();
      for (const auto& t : doc.at("trees")) m.trees.push_back(tree_from_json(t));
      return m;
    }
    throw Error(Errc::SchemaError, "unknown model kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw Error(Errc::SchemaError, e.what());
  }
}

}  // namespace surro
