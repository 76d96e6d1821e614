#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "samba/feature_stack.hpp"
#include "samba/image.hpp"
#include "samba/labels.hpp"

namespace samba {

/// Standard CART impurity 1 - sum (n_i / n)^2. Throws EmptyCounts.
double gini(std::span<const std::uint32_t> counts);

struct ForestParams {
  int n_trees = 100;
  int max_depth = 25;
  int min_samples_split = 2;
  std::optional<int> features_per_split;  // unset: ceil(sqrt(F))
  std::uint64_t seed = 42;

  int resolved_features_per_split(Eigen::Index n_features) const;
  void validate(Eigen::Index n_features) const;

  friend bool operator==(const ForestParams&, const ForestParams&) = default;
};

/// Flat preorder node; a leaf has `feature == -1` and non-empty `counts`.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<std::uint32_t> counts;

  bool is_leaf() const noexcept { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// Samples go left when `value <= threshold`.
struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

struct SplitChoice {
  int feature = 0;
  double threshold = 0.0;
  double impurity_decrease = 0.0;
};

/// Best axis-aligned split of the rows `samples` (repeats allowed) over
/// `features`. Candidate thresholds are midpoints between consecutive distinct
/// values. Ties go to the lower feature index, then the lower threshold.
/// Returns nothing when no candidate strictly lowers impurity.
///
/// `labels` holds 0-based class indices below `n_classes`.
std::optional<SplitChoice> best_split(const FeatureMatrix& features,
                                      std::span<const std::uint8_t> labels, int n_classes,
                                      std::span<const std::uint32_t> samples,
                                      std::span<const int> feature_subset);

class RandomForestModel {
 public:
  RandomForestModel(std::vector<DecisionTree> trees, int n_classes,
                    std::vector<std::string> feature_names, ForestParams params);

  const std::vector<DecisionTree>& trees() const noexcept { return trees_; }
  int n_classes() const noexcept { return n_classes_; }
  const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }
  const ForestParams& params() const noexcept { return params_; }
  Eigen::Index n_features() const noexcept { return static_cast<Eigen::Index>(feature_names_.size()); }

  /// Mean over trees of the normalized leaf histogram reached by `x`.
  Eigen::VectorXd predict_proba(Eigen::Ref<const Eigen::RowVectorXd> x) const;

  friend bool operator==(const RandomForestModel& a, const RandomForestModel& b) {
    return a.trees_ == b.trees_ && a.n_classes_ == b.n_classes_ &&
           a.feature_names_ == b.feature_names_ && a.params_ == b.params_;
  }

 private:
  void accumulate(const double* x, double* out) const;
  friend struct SegmentAccess;

  std::vector<DecisionTree> trees_;
  int n_classes_;
  std::vector<std::string> feature_names_;
  ForestParams params_;
  // Per tree, per node: leaf probabilities (flattened, n_classes each).
  std::vector<std::vector<double>> leaf_proba_;
};

/// Indices of the bootstrap resample tree `tree` is grown from.
std::vector<std::uint32_t> bootstrap_sample(std::size_t n, std::uint64_t seed, int tree);

/// Bitwise reproducible for fixed (ts, params); `workers` only affects speed.
RandomForestModel train_forest(const TrainingSet& ts, const ForestParams& params, int workers = 1);

struct SegmentationResult {
  ClassPlane class_map;           // 1..K
  Eigen::MatrixXd probabilities;  // one row per pixel, K columns
  PlaneD uncertainty;             // 1 - max probability
};

SegmentationResult segment(const RandomForestModel& model, const FeatureStack& stack,
                           int workers = 1);

/// Fraction of labelled pixels (over all maps) whose predicted class equals the label.
double labelled_accuracy(std::span<const SegmentationResult> results,
                         std::span<const LabelMap> maps);

/// Versioned JSON model document.
inline constexpr int kModelFormatVersion = 1;
std::string serialize_model(const RandomForestModel& model);
RandomForestModel deserialize_model(std::string_view document);

}  // namespace samba
