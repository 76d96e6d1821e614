#include "samba/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "samba/parallel.hpp"
#include "samba/random.hpp"

namespace samba {

using u128 = unsigned __int128;

double gini(std::span<const std::uint32_t> counts) {
  std::uint64_t n = 0;
  for (auto c : counts) n += c;
  if (n == 0) throw Error(ErrorCode::EmptyCounts, "gini of an empty node");
  double sum_sq = 0.0;
  for (auto c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(n);
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

int ForestParams::resolved_features_per_split(Eigen::Index n_features) const {
  if (features_per_split) return *features_per_split;
  return static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_features))));
}

void ForestParams::validate(Eigen::Index n_features) const {
  if (n_trees < 1) throw Error(ErrorCode::InvalidConfig, "n_trees must be >= 1");
  if (max_depth < 1) throw Error(ErrorCode::InvalidConfig, "max_depth must be >= 1");
  if (min_samples_split < 2) throw Error(ErrorCode::InvalidConfig, "min_samples_split must be >= 2");
  const int m = resolved_features_per_split(n_features);
  if (m < 1 || m > n_features) {
    throw Error(ErrorCode::InvalidConfig, "features_per_split must lie in [1, F]");
  }
}

std::optional<SplitChoice> best_split(const FeatureMatrix& features,
                                      std::span<const std::uint8_t> labels, int n_classes,
                                      std::span<const std::uint32_t> samples,
                                      std::span<const int> feature_subset) {
  const std::uint64_t n = samples.size();
  if (n < 2 || feature_subset.empty()) return std::nullopt;

  std::vector<std::uint64_t> total(static_cast<std::size_t>(n_classes), 0);
  for (auto s : samples) ++total[labels[s]];
  u128 parent_sq = 0;
  for (auto c : total) parent_sq += u128{c} * c;

  // Weighted child impurity is minimized when Q = SL/nL + SR/nR is maximized
  // (S = sum of squared class counts). Q is compared as an exact fraction.
  u128 best_num = parent_sq;
  u128 best_den = n;
  std::optional<SplitChoice> best;

  std::vector<int> subset(feature_subset.begin(), feature_subset.end());
  std::sort(subset.begin(), subset.end());

  std::vector<std::pair<double, std::uint8_t>> column(n);
  std::vector<std::uint64_t> left(static_cast<std::size_t>(n_classes));
  for (int f : subset) {
    for (std::size_t i = 0; i < n; ++i) column[i] = {features(samples[i], f), labels[samples[i]]};
    std::sort(column.begin(), column.end());
    if (column.front().first == column.back().first) continue;

    std::fill(left.begin(), left.end(), 0);
    u128 left_sq = 0;
    u128 right_sq = parent_sq;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const std::uint8_t c = column[i].second;
      const std::uint64_t right_c = total[c] - left[c];
      left_sq += 2 * u128{left[c]} + 1;
      right_sq -= 2 * u128{right_c} - 1;
      ++left[c];
      if (!(column[i].first < column[i + 1].first)) continue;

      const std::uint64_t nl = i + 1, nr = n - nl;
      const u128 num = left_sq * nr + right_sq * nl;
      const u128 den = u128{nl} * nr;
      if (num * best_den > best_num * den) {
        best_num = num;
        best_den = den;
        const double a = column[i].first, b = column[i + 1].first;
        double threshold = std::midpoint(a, b);
        if (!(threshold < b)) threshold = a;
        const double q = static_cast<double>(left_sq) / static_cast<double>(nl) +
                         static_cast<double>(right_sq) / static_cast<double>(nr);
        const double decrease =
            (q - static_cast<double>(parent_sq) / static_cast<double>(n)) / static_cast<double>(n);
        best = SplitChoice{f, threshold, decrease};
      }
    }
  }
  return best;
}

namespace {

struct TreeGrower {
  const FeatureMatrix& features;
  std::span<const std::uint8_t> labels;  // 0-based
  int n_classes;
  int max_depth;
  int min_samples_split;
  int features_per_split;
  SplitMix64 rng;
  std::vector<int> feature_pool;
  DecisionTree tree;

  std::vector<int> draw_features() {
    // Partial Fisher-Yates over a fresh identity pool.
    std::iota(feature_pool.begin(), feature_pool.end(), 0);
    const std::size_t f = feature_pool.size();
    for (std::size_t i = 0; i < static_cast<std::size_t>(features_per_split); ++i) {
      std::swap(feature_pool[i], feature_pool[i + rng.below(f - i)]);
    }
    std::vector<int> subset(feature_pool.begin(), feature_pool.begin() + features_per_split);
    std::sort(subset.begin(), subset.end());
    return subset;
  }

  int grow(const std::vector<std::uint32_t>& samples, int depth) {
    std::vector<std::uint32_t> counts(static_cast<std::size_t>(n_classes), 0);
    for (auto s : samples) ++counts[labels[s]];
    const int index = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(TreeNode{-1, 0.0, -1, -1, counts});

    const bool pure =
        std::count_if(counts.begin(), counts.end(), [](std::uint32_t c) { return c > 0; }) <= 1;
    if (pure || depth >= max_depth || static_cast<int>(samples.size()) < min_samples_split) {
      return index;
    }
    const auto subset = draw_features();
    const auto split = best_split(features, labels, n_classes, samples, subset);
    if (!split) return index;

    std::vector<std::uint32_t> left, right;
    for (auto s : samples) {
      (features(s, split->feature) <= split->threshold ? left : right).push_back(s);
    }
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(index)];
    node.feature = split->feature;
    node.threshold = split->threshold;
    node.left = l;
    node.right = r;
    node.counts.clear();
    return index;
  }
};

}  // namespace

std::vector<std::uint32_t> bootstrap_sample(std::size_t n, std::uint64_t seed, int tree) {
  SplitMix64 rng(seed, static_cast<std::uint64_t>(tree));
  std::vector<std::uint32_t> out(n);
  for (auto& s : out) s = static_cast<std::uint32_t>(rng.below(n));
  return out;
}

RandomForestModel train_forest(const TrainingSet& ts, const ForestParams& params, int workers) {
  if (ts.size() == 0) throw Error(ErrorCode::EmptyTrainingSet, "training set is empty");
  const Eigen::Index n_features = ts.features.cols();
  if (ts.features.rows() != static_cast<Eigen::Index>(ts.size()) ||
      static_cast<Eigen::Index>(ts.feature_names.size()) != n_features) {
    throw Error(ErrorCode::DimensionMismatch, "training set shape is inconsistent");
  }
  params.validate(n_features);

  int n_classes = 0;
  std::vector<std::uint8_t> labels(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts.classes[i] == 0) throw Error(ErrorCode::InvalidConfig, "class id 0 in training set");
    n_classes = std::max<int>(n_classes, ts.classes[i]);
    labels[i] = static_cast<std::uint8_t>(ts.classes[i] - 1);
  }

  ForestParams resolved = params;
  resolved.features_per_split = params.resolved_features_per_split(n_features);

  std::vector<DecisionTree> trees(static_cast<std::size_t>(params.n_trees));
  parallel_for(trees.size(), workers, [&](std::size_t t) {
    const auto sample = bootstrap_sample(ts.size(), params.seed, static_cast<int>(t));
    // The bootstrap draws consume the front of the stream; node draws continue it.
    SplitMix64 rng(params.seed, t);
    for (std::size_t i = 0; i < ts.size(); ++i) rng.next();
    TreeGrower grower{ts.features,
                      labels,
                      n_classes,
                      params.max_depth,
                      params.min_samples_split,
                      *resolved.features_per_split,
                      rng,
                      std::vector<int>(static_cast<std::size_t>(n_features)),
                      {}};
    grower.grow(sample, 0);
    trees[t] = std::move(grower.tree);
  });
  return RandomForestModel(std::move(trees), n_classes, ts.feature_names, resolved);
}

RandomForestModel::RandomForestModel(std::vector<DecisionTree> trees, int n_classes,
                                     std::vector<std::string> feature_names, ForestParams params)
    : trees_(std::move(trees)),
      n_classes_(n_classes),
      feature_names_(std::move(feature_names)),
      params_(params) {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::MalformedModel, what); };
  if (trees_.empty()) bad("model has no trees");
  if (n_classes_ < 1 || n_classes_ > 255) bad("n_classes out of range");
  const auto n_features = static_cast<int>(feature_names_.size());
  leaf_proba_.resize(trees_.size());
  for (std::size_t t = 0; t < trees_.size(); ++t) {
    const auto& nodes = trees_[t].nodes;
    if (nodes.empty()) bad("empty tree");
    auto& proba = leaf_proba_[t];
    proba.assign(nodes.size() * static_cast<std::size_t>(n_classes_), 0.0);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& node = nodes[i];
      const int count = static_cast<int>(nodes.size());
      if (node.is_leaf()) {
        if (node.counts.size() != static_cast<std::size_t>(n_classes_)) bad("leaf count width");
        std::uint64_t sum = 0;
        for (auto c : node.counts) sum += c;
        if (sum == 0) bad("empty leaf");
        for (int k = 0; k < n_classes_; ++k) {
          proba[i * n_classes_ + k] = static_cast<double>(node.counts[k]) / static_cast<double>(sum);
        }
      } else {
        if (node.feature >= n_features) bad("split feature out of range");
        if (!std::isfinite(node.threshold)) bad("non-finite threshold");
        // Preorder: children come after their parent, so traversal terminates.
        if (node.left <= static_cast<int>(i) || node.right <= static_cast<int>(i) ||
            node.left >= count || node.right >= count) {
          bad("bad child reference");
        }
      }
    }
  }
}

void RandomForestModel::accumulate(const double* x, double* out) const {
  for (std::size_t t = 0; t < trees_.size(); ++t) {
    const auto& nodes = trees_[t].nodes;
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
      const auto& n = nodes[i];
      i = static_cast<std::size_t>(x[n.feature] <= n.threshold ? n.left : n.right);
    }
    const double* p = &leaf_proba_[t][i * n_classes_];
    for (int k = 0; k < n_classes_; ++k) out[k] += p[k];
  }
  const double inv = 1.0 / static_cast<double>(trees_.size());
  for (int k = 0; k < n_classes_; ++k) out[k] *= inv;
}

Eigen::VectorXd RandomForestModel::predict_proba(Eigen::Ref<const Eigen::RowVectorXd> x) const {
  if (x.size() != n_features()) {
    throw Error(ErrorCode::DimensionMismatch, "feature vector length differs from the model");
  }
  Eigen::RowVectorXd row = x;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n_classes_);
  accumulate(row.data(), out.data());
  return out;
}

struct SegmentAccess {
  static void run(const RandomForestModel& m, const double* x, double* out) { m.accumulate(x, out); }
};

SegmentationResult segment(const RandomForestModel& model, const FeatureStack& stack, int workers) {
  if (stack.names() != model.feature_names()) {
    throw Error(ErrorCode::FeatureMismatch,
                "feature stack does not match the classifier's feature list");
  }
  const int k = model.n_classes();
  const Eigen::Index n = stack.n_pixels();
  SegmentationResult result;
  result.class_map.resize(stack.height(), stack.width());
  result.uncertainty.resize(stack.height(), stack.width());
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> proba =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Zero(n, k);

  constexpr Eigen::Index kChunk = 4096;
  const auto chunks = static_cast<std::size_t>((n + kChunk - 1) / kChunk);
  parallel_for(chunks, workers, [&](std::size_t c) {
    const Eigen::Index begin = static_cast<Eigen::Index>(c) * kChunk;
    const Eigen::Index end = std::min(n, begin + kChunk);
    for (Eigen::Index p = begin; p < end; ++p) {
      double* out = proba.row(p).data();
      SegmentAccess::run(model, stack.data().row(p).data(), out);
      int arg = 0;
      for (int j = 1; j < k; ++j) {
        if (out[j] > out[arg]) arg = j;
      }
      result.class_map.data()[p] = static_cast<std::uint8_t>(arg + 1);
      result.uncertainty.data()[p] = std::clamp(1.0 - out[arg], 0.0, 1.0);
    }
  });
  result.probabilities = proba;
  return result;
}

double labelled_accuracy(std::span<const SegmentationResult> results,
                         std::span<const LabelMap> maps) {
  std::size_t total = 0, correct = 0;
  for (const auto& map : maps) {
    const auto& predicted = results[static_cast<std::size_t>(map.slice_index())].class_map;
    const auto& labels = map.classes();
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
      if (labels.data()[i] == 0) continue;
      ++total;
      if (predicted.data()[i] == labels.data()[i]) ++correct;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace samba
