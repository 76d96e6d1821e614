#include <json.hpp>

#include "samba/forest.hpp"

// Model document (format_version 1):
//
// {
//   "format_version": 1,
//   "n_classes": K,
//   "feature_names": ["original", ...],
//   "params": {"n_trees": T, "max_depth": D, "min_samples_split": S,
//              "features_per_split": M, "seed": N},
//   "trees": [ [node, node, ...], ... ]
// }
//
// Each tree is its preorder node list; node 0 is the root. A split node is
// {"feature": f, "threshold": t, "left": i, "right": j} with child indices into
// the same list; a leaf is {"counts": [n_1, ..., n_K]}. Thresholds are written
// with the shortest decimal form that round-trips to the same double.

namespace samba {

using nlohmann::json;

std::string serialize_model(const RandomForestModel& model) {
  json trees = json::array();
  for (const auto& tree : model.trees()) {
    json nodes = json::array();
    for (const auto& n : tree.nodes) {
      if (n.is_leaf()) {
        nodes.push_back({{"counts", n.counts}});
      } else {
        nodes.push_back(
            {{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}});
      }
    }
    trees.push_back(std::move(nodes));
  }
  const auto& p = model.params();
  json doc = {
      {"format_version", kModelFormatVersion},
      {"n_classes", model.n_classes()},
      {"feature_names", model.feature_names()},
      {"params",
       {{"n_trees", p.n_trees},
        {"max_depth", p.max_depth},
        {"min_samples_split", p.min_samples_split},
        {"features_per_split", p.resolved_features_per_split(model.n_features())},
        {"seed", p.seed}}},
      {"trees", std::move(trees)},
  };
  return doc.dump(1) + "\n";
}

RandomForestModel deserialize_model(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedModel, std::string("model is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("format_version")) {
    throw Error(ErrorCode::MalformedModel, "model document lacks format_version");
  }
  const auto& version = doc["format_version"];
  if (!version.is_number_integer()) {
    throw Error(ErrorCode::MalformedModel, "format_version must be an integer");
  }
  if (version.get<long long>() != kModelFormatVersion) {
    throw Error(ErrorCode::UnsupportedVersion,
                "unsupported model format_version " + version.dump());
  }

  try {
    ForestParams params;
    const auto& p = doc.at("params");
    params.n_trees = p.at("n_trees").get<int>();
    params.max_depth = p.at("max_depth").get<int>();
    params.min_samples_split = p.at("min_samples_split").get<int>();
    params.features_per_split = p.at("features_per_split").get<int>();
    params.seed = p.at("seed").get<std::uint64_t>();

    std::vector<DecisionTree> trees;
    for (const auto& jt : doc.at("trees")) {
      DecisionTree tree;
      for (const auto& jn : jt) {
        TreeNode node;
        if (jn.contains("counts")) {
          node.counts = jn.at("counts").get<std::vector<std::uint32_t>>();
        } else {
          node.feature = jn.at("feature").get<int>();
          node.threshold = jn.at("threshold").get<double>();
          node.left = jn.at("left").get<int>();
          node.right = jn.at("right").get<int>();
          if (node.feature < 0) throw Error(ErrorCode::MalformedModel, "negative feature index");
        }
        tree.nodes.push_back(std::move(node));
      }
      trees.push_back(std::move(tree));
    }
    if (static_cast<int>(trees.size()) != params.n_trees) {
      throw Error(ErrorCode::MalformedModel, "tree count differs from params.n_trees");
    }
    auto names = doc.at("feature_names").get<std::vector<std::string>>();
    params.validate(static_cast<Eigen::Index>(names.size()));
    return RandomForestModel(std::move(trees), doc.at("n_classes").get<int>(), std::move(names),
                             params);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedModel, std::string("malformed model: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidConfig) throw Error(ErrorCode::MalformedModel, e.what());
    throw;
  }
}

}  // namespace samba
