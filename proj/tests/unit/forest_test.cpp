#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "samba/forest.hpp"
#include "samba/random.hpp"

namespace {

using namespace samba;

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidConfig;
}

TrainingSet make_set(const Eigen::MatrixXd& X, const std::vector<std::uint8_t>& y) {
  TrainingSet ts;
  ts.features = X;
  ts.classes = y;
  for (long f = 0; f < X.cols(); ++f) ts.feature_names.push_back("f" + std::to_string(f));
  return ts;
}

TrainingSet blobs(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.05);
  Eigen::MatrixXd X(200, 2);
  std::vector<std::uint8_t> y(200);
  for (int i = 0; i < 200; ++i) {
    const bool second = i >= 100;
    X(i, 0) = (second ? 1.0 : 0.0) + n(rng);
    X(i, 1) = n(rng);
    y[static_cast<std::size_t>(i)] = second ? 2 : 1;
  }
  return make_set(X, y);
}

TEST(Gini, Examples) {
  const std::vector<std::uint32_t> even = {5, 5}, pure = {10, 0}, skew = {3, 1}, none = {0, 0};
  EXPECT_DOUBLE_EQ(gini(even), 0.5);
  EXPECT_DOUBLE_EQ(gini(pure), 0.0);
  EXPECT_DOUBLE_EQ(gini(skew), 0.375);
  EXPECT_EQ(code_of([&] { gini(none); }), ErrorCode::EmptyCounts);
}

TEST(SplitMix64, StreamsDiffer) {
  SplitMix64 a(42, 0), b(42, 1), c(42, 0);
  const auto x = a.next();
  EXPECT_NE(x, b.next());
  EXPECT_EQ(x, c.next());
  SplitMix64 r(7);
  for (int i = 0; i < 1000; ++i) EXPECT_LT(r.below(13), 13u);
}

TEST(BestSplit, IdenticalVectorsHaveNoSplit) {
  FeatureMatrix X = FeatureMatrix::Constant(4, 2, 0.3);
  const std::vector<std::uint8_t> y = {0, 1, 0, 1};
  const std::vector<std::uint32_t> rows = {0, 1, 2, 3};
  const std::vector<int> feats = {0, 1};
  EXPECT_FALSE(best_split(X, y, 2, rows, feats).has_value());
}

TEST(BestSplit, TwoPointsSplitAtHalf) {
  FeatureMatrix X(2, 1);
  X << 0, 1;
  const std::vector<std::uint8_t> y = {0, 1};
  const std::vector<std::uint32_t> rows = {0, 1};
  const std::vector<int> feats = {0};
  const auto s = best_split(X, y, 2, rows, feats);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->feature, 0);
  EXPECT_EQ(s->threshold, 0.5);
  EXPECT_DOUBLE_EQ(s->impurity_decrease, 0.5);
}

TEST(BestSplit, OneDimensionalMatchesExhaustive) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 49);
    const int k = 2 + static_cast<int>(rng() % 3);
    Eigen::MatrixXd X(n, 1);
    std::vector<int> y(static_cast<std::size_t>(n));
    std::vector<std::uint8_t> y8(y.size());
    std::vector<std::uint32_t> rows(y.size());
    std::vector<std::size_t> orows(y.size());
    for (int i = 0; i < n; ++i) {
      X(i, 0) = trial % 2 ? static_cast<double>(rng() % 6) : std::uniform_real_distribution<>(0, 1)(rng);
      y[static_cast<std::size_t>(i)] = static_cast<int>(rng() % static_cast<unsigned>(k));
      y8[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(y[static_cast<std::size_t>(i)]);
      rows[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(i);
      orows[static_cast<std::size_t>(i)] = static_cast<std::size_t>(i);
    }
    const std::vector<int> feats = {0};
    const auto got = best_split(FeatureMatrix(X), y8, k, rows, feats);
    const auto want = oracle::exhaustive_split(X, y, k, orows);
    ASSERT_EQ(got.has_value(), want.has_value()) << trial;
    if (got) {
      EXPECT_EQ(got->threshold, want->threshold) << trial;
      EXPECT_NEAR(got->impurity_decrease, want->decrease, 1e-12);
    }
  }
}

TEST(BestSplit, TiesPreferLowerFeature) {
  FeatureMatrix X(4, 2);
  X << 0, 0, 0, 0, 1, 1, 1, 1;
  const std::vector<std::uint8_t> y = {0, 0, 1, 1};
  const std::vector<std::uint32_t> rows = {0, 1, 2, 3};
  const std::vector<int> feats = {0, 1};
  EXPECT_EQ(best_split(X, y, 2, rows, feats)->feature, 0);
}

TEST(TrainForest, SingleClassIsConstant) {
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(20, 3);
  const TrainingSet ts = make_set(X, std::vector<std::uint8_t>(20, 1));
  ForestParams p;
  p.n_trees = 5;
  const auto m = train_forest(ts, p);
  EXPECT_EQ(m.n_classes(), 1);
  for (int i = 0; i < 20; ++i) EXPECT_DOUBLE_EQ(m.predict_proba(X.row(i))(0), 1.0);
}

TEST(TrainForest, SeparatedBlobsFitPerfectly) {
  const TrainingSet ts = blobs(2);
  ForestParams p;
  p.n_trees = 20;
  const auto m = train_forest(ts, p);
  for (int i = 0; i < 200; ++i) {
    const Eigen::VectorXd pr = m.predict_proba(ts.features.row(i));
    const int cls = pr(1) > pr(0) ? 2 : 1;
    EXPECT_EQ(cls, ts.classes[static_cast<std::size_t>(i)]);
  }
}

TEST(TrainForest, SameSeedSameModel) {
  const TrainingSet ts = blobs(3);
  ForestParams p;
  p.n_trees = 10;
  EXPECT_EQ(serialize_model(train_forest(ts, p, 1)), serialize_model(train_forest(ts, p, 4)));
  ForestParams q = p;
  q.seed = 43;
  EXPECT_NE(serialize_model(train_forest(ts, p)), serialize_model(train_forest(ts, q)));
}

TEST(TrainForest, EmptySetFails) {
  EXPECT_EQ(code_of([] { train_forest(make_set(Eigen::MatrixXd(0, 2), {}), ForestParams{}); }),
            ErrorCode::EmptyTrainingSet);
}

TEST(TrainForest, DepthLimitRespected) {
  const TrainingSet ts = blobs(4);
  ForestParams p;
  p.n_trees = 3;
  p.max_depth = 1;
  const auto m = train_forest(ts, p);
  for (const auto& t : m.trees()) EXPECT_LE(t.nodes.size(), 3u);
}

RandomForestModel two_stump_model() {
  auto leaf = [](std::vector<std::uint32_t> c) { return TreeNode{-1, 0, -1, -1, std::move(c)}; };
  DecisionTree a{{leaf({4, 0})}};
  DecisionTree b{{leaf({0, 2})}};
  return RandomForestModel({a, b}, 2, {"x"}, ForestParams{});
}

TEST(PredictProba, TwoTreeAverage) {
  const auto m = two_stump_model();
  const Eigen::RowVectorXd x = Eigen::RowVectorXd::Zero(1);
  const Eigen::VectorXd p = m.predict_proba(x);
  EXPECT_DOUBLE_EQ(p(0), 0.5);
  EXPECT_DOUBLE_EQ(p(1), 0.5);
  EXPECT_EQ(code_of([&] { m.predict_proba(Eigen::RowVectorXd::Zero(2)); }), ErrorCode::DimensionMismatch);
}

TEST(PredictProba, MatchesManualTraversal) {
  const TrainingSet ts = blobs(5);
  ForestParams p;
  p.n_trees = 7;
  const auto m = train_forest(ts, p);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-0.5, 1.5);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::RowVectorXd x = Eigen::RowVector2d(u(rng), u(rng));
    Eigen::VectorXd expected = Eigen::VectorXd::Zero(2);
    for (const auto& t : m.trees()) {
      int i = 0;
      while (!t.nodes[static_cast<std::size_t>(i)].is_leaf()) {
        const auto& n = t.nodes[static_cast<std::size_t>(i)];
        i = x(n.feature) <= n.threshold ? n.left : n.right;
      }
      const auto& c = t.nodes[static_cast<std::size_t>(i)].counts;
      const double total = c[0] + c[1];
      expected(0) += c[0] / total / m.trees().size();
      expected(1) += c[1] / total / m.trees().size();
    }
    const Eigen::VectorXd got = m.predict_proba(x);
    EXPECT_LT((got - expected).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(got.sum(), 1.0, 1e-9);
  }
}

FeatureStack stack_of(const Eigen::MatrixXd& X, int w, int h, std::vector<std::string> names) {
  return FeatureStack(w, h, std::move(names), FeatureMatrix(X));
}

TEST(Segment, TieGoesToLowestClassAndUncertaintyIsOneMinusMax) {
  const auto m = two_stump_model();
  const auto s = segment(m, stack_of(Eigen::MatrixXd::Zero(2, 1), 2, 1, {"x"}));
  EXPECT_EQ(s.class_map(0, 0), 1);
  EXPECT_DOUBLE_EQ(s.uncertainty(0, 0), 0.5);

  auto leaf = [](std::vector<std::uint32_t> c) { return TreeNode{-1, 0, -1, -1, std::move(c)}; };
  const RandomForestModel skew({DecisionTree{{leaf({7, 3})}}}, 2, {"x"}, ForestParams{});
  const auto r = segment(skew, stack_of(Eigen::MatrixXd::Zero(1, 1), 1, 1, {"x"}));
  EXPECT_NEAR(r.uncertainty(0, 0), 0.3, 1e-12);
  const RandomForestModel unanimous({DecisionTree{{leaf({0, 5})}}}, 2, {"x"}, ForestParams{});
  const auto u = segment(unanimous, stack_of(Eigen::MatrixXd::Zero(1, 1), 1, 1, {"x"}));
  EXPECT_EQ(u.uncertainty(0, 0), 0.0);
  EXPECT_EQ(u.class_map(0, 0), 2);
}

TEST(Segment, NameMismatchFails) {
  const auto m = two_stump_model();
  EXPECT_EQ(code_of([&] { segment(m, stack_of(Eigen::MatrixXd::Zero(1, 1), 1, 1, {"y"})); }),
            ErrorCode::FeatureMismatch);
}

TEST(Segment, ClassMapIsArgmaxOfProbabilities) {
  const TrainingSet ts = blobs(7);
  ForestParams p;
  p.n_trees = 9;
  const auto m = train_forest(ts, p);
  const auto s = segment(m, stack_of(ts.features, 20, 10, ts.feature_names), 3);
  for (long i = 0; i < s.probabilities.rows(); ++i) {
    Eigen::Index best = 0;
    s.probabilities.row(i).maxCoeff(&best);
    EXPECT_EQ(s.class_map.data()[i], best + 1);
    EXPECT_NEAR(s.probabilities.row(i).sum(), 1.0, 1e-9);
    EXPECT_DOUBLE_EQ(s.uncertainty.data()[i], 1.0 - s.probabilities.row(i).maxCoeff());
  }
}

TEST(ModelFile, RoundTrip) {
  const TrainingSet ts = blobs(8);
  ForestParams p;
  p.n_trees = 4;
  p.features_per_split = 2;
  const auto m = train_forest(ts, p);
  const std::string doc = serialize_model(m);
  const auto back = deserialize_model(doc);
  EXPECT_TRUE(back == m);
  EXPECT_EQ(serialize_model(back), doc);
}

TEST(ModelFile, CorruptionAndVersion) {
  ForestParams p;
  p.n_trees = 2;
  const std::string doc = serialize_model(train_forest(blobs(9), p));
  EXPECT_EQ(code_of([&] { deserialize_model(doc.substr(0, doc.size() / 2)); }), ErrorCode::MalformedModel);
  std::string v99 = doc;
  const auto at = v99.find("\"format_version\": 1");
  ASSERT_NE(at, std::string::npos);
  v99.replace(at, 19, "\"format_version\": 99");
  EXPECT_EQ(code_of([&] { deserialize_model(v99); }), ErrorCode::UnsupportedVersion);
}

}  // namespace
