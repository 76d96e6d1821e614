#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "commands.hpp"
#include "oracles.hpp"
#include "samba/forest.hpp"

namespace {

namespace fs = std::filesystem;
using namespace samba;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("samba_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  int run(std::vector<std::string> args) {
    args.insert(args.begin(), "samba");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    out_.str("");
    err_.str("");
    return cli::run(static_cast<int>(argv.size()), argv.data(), out_, err_);
  }

  // Disk image plus a labels PNG with one stroke per class.
  void write_fixture(const std::string& image, const std::string& labels, bool two_classes = true) {
    const auto f = oracle::disk_fixture(64, 0.05, 3);
    write_file(path(image), encode_png(GrayImage(f.image)));
    LabelMap m(64, 64);
    const std::vector<Point2> inside = {{double(f.centres[0][0]), double(f.centres[0][1])}};
    apply_delta_in_place(m, rasterize_brush(inside, 4, 2, 64, 64));
    if (two_classes) {
      const std::vector<Point2> outside = {{4, 4}, {20, 4}};
      apply_delta_in_place(m, rasterize_brush(outside, 2, 1, 64, 64));
    }
    write_file(path(labels), encode_png(m.classes()));
  }

  double reported_accuracy() const {
    const std::string s = out_.str();
    const auto at = s.find("train_accuracy: ");
    return at == std::string::npos ? -1.0 : std::stod(s.substr(at + 16));
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

TEST_F(CliTest, TrainReportsAccuracy) {
  write_fixture("img.png", "labels.png");
  ASSERT_EQ(run({"train", "--image", path("img.png"), "--labels", path("labels.png"), "--out",
                 path("model.json"), "--trees", "20"}),
            0)
      << err_.str();
  EXPECT_GE(reported_accuracy(), 0.99);
  EXPECT_NE(out_.str().find("features: 25"), std::string::npos);
  const auto doc = read_file(path("model.json"));
  EXPECT_EQ(deserialize_model(std::string(doc.begin(), doc.end())).trees().size(), 20u);
}

TEST_F(CliTest, SingleClassIsPerfect) {
  write_fixture("img.png", "labels.png", false);
  ASSERT_EQ(run({"train", "--image", path("img.png"), "--labels", path("labels.png"), "--out",
                 path("model.json"), "--trees", "3"}),
            0);
  EXPECT_EQ(reported_accuracy(), 1.0);
}

TEST_F(CliTest, LabelSizeMismatchIsUsageError) {
  write_fixture("img.png", "labels.png");
  write_file(path("small.png"), encode_png(ClassPlane(ClassPlane::Ones(8, 8))));
  EXPECT_EQ(run({"train", "--image", path("img.png"), "--labels", path("small.png"), "--out",
                 path("model.json")}),
            2);
  EXPECT_FALSE(fs::exists(path("model.json")));
}

TEST_F(CliTest, BadArgumentsAreUsageErrors) {
  EXPECT_EQ(run({}), 2);
  EXPECT_EQ(run({"train", "--image", "x.png"}), 2);
  EXPECT_EQ(run({"frobnicate"}), 2);
}

TEST_F(CliTest, NoLabelsIsEngineError) {
  write_fixture("img.png", "labels.png");
  write_file(path("empty.png"), encode_png(ClassPlane(ClassPlane::Zero(64, 64))));
  EXPECT_EQ(run({"train", "--image", path("img.png"), "--labels", path("empty.png"), "--out",
                 path("model.json")}),
            1);
  EXPECT_NE(err_.str().find("NoLabels"), std::string::npos);
}

TEST_F(CliTest, ApplyMatchesInProcessSegmentation) {
  write_fixture("img.png", "labels.png");
  ASSERT_EQ(run({"train", "--image", path("img.png"), "--labels", path("labels.png"), "--out",
                 path("model.json"), "--trees", "10"}),
            0);
  ASSERT_EQ(run({"apply", "--model", path("model.json"), "--image", path("img.png"), "--out", path("out")}), 0)
      << err_.str();

  const auto doc = read_file(path("model.json"));
  const auto model = deserialize_model(std::string(doc.begin(), doc.end()));
  const auto img = decode_image(read_file(path("img.png")));
  const auto seg = segment(model, build_feature_stack(to_grayscale(img.slice(0)), FeatureConfig{}));
  EXPECT_EQ(read_file(path("out/img_seg.png")), encode_png(seg.class_map));
  EXPECT_EQ(read_file(path("out/img_unc.png")), encode_png(GrayImage(seg.uncertainty)));
}

TEST_F(CliTest, ApplyBatchSkipsCorruptFiles) {
  write_fixture("img.png", "labels.png");
  ASSERT_EQ(run({"train", "--image", path("img.png"), "--labels", path("labels.png"), "--out",
                 path("model.json"), "--trees", "5"}),
            0);
  fs::create_directories(dir_ / "batch");
  fs::copy_file(path("img.png"), path("batch/a.png"));
  fs::copy_file(path("img.png"), path("batch/c.png"));
  std::ofstream(path("batch/b.png")) << "corrupt";
  EXPECT_EQ(run({"apply", "--model", path("model.json"), "--image", path("batch"), "--out", path("out")}), 1);
  EXPECT_TRUE(fs::exists(path("out/a_seg.png")));
  EXPECT_TRUE(fs::exists(path("out/c_seg.png")));
  EXPECT_FALSE(fs::exists(path("out/b_seg.png")));
  EXPECT_NE(err_.str().find("b.png"), std::string::npos);
}

TEST_F(CliTest, ApplyEmptyDirectoryWritesNothing) {
  write_fixture("img.png", "labels.png");
  ASSERT_EQ(run({"train", "--image", path("img.png"), "--labels", path("labels.png"), "--out",
                 path("model.json"), "--trees", "2"}),
            0);
  fs::create_directories(dir_ / "empty");
  EXPECT_EQ(run({"apply", "--model", path("model.json"), "--image", path("empty"), "--out", path("out")}), 0);
  EXPECT_FALSE(fs::exists(path("out")) && !fs::is_empty(path("out")));
}

TEST_F(CliTest, ApplyRejectsForeignFeatureConfig) {
  write_fixture("img.png", "labels.png");
  ASSERT_EQ(run({"train", "--image", path("img.png"), "--labels", path("labels.png"), "--out",
                 path("model.json"), "--trees", "2"}),
            0);
  std::ofstream(path("other.cfg")) << "sigmas = 1, 3\n";
  EXPECT_EQ(run({"apply", "--model", path("model.json"), "--image", path("img.png"), "--out", path("out"),
                 "--config", path("other.cfg")}),
            1);
  EXPECT_NE(err_.str().find("FeatureMismatch"), std::string::npos);
}

TEST_F(CliTest, FeaturesDumpDefault) {
  write_fixture("img.png", "labels.png");
  ASSERT_EQ(run({"features", "--image", path("img.png"), "--out", path("feat")}), 0);
  std::ifstream manifest(path("feat/features.txt"));
  std::vector<std::string> names;
  for (std::string line; std::getline(manifest, line);) names.push_back(line);
  EXPECT_EQ(names, feature_names(FeatureConfig{}));
  std::size_t pngs = 0;
  for (const auto& e : fs::directory_iterator(path("feat"))) pngs += e.path().extension() == ".png";
  EXPECT_EQ(pngs, 25u);
  EXPECT_TRUE(fs::exists(path("feat/00_original.png")));
}

TEST_F(CliTest, FeaturesDumpMinimal) {
  write_fixture("img.png", "labels.png");
  std::ofstream(path("min.cfg"))
      << "enable_gaussian = false\nenable_sobel = false\nenable_hessian = false\nenable_dog = false\n";
  ASSERT_EQ(run({"features", "--image", path("img.png"), "--config", path("min.cfg"), "--out", path("feat")}), 0);
  std::size_t pngs = 0;
  for (const auto& e : fs::directory_iterator(path("feat"))) pngs += e.path().extension() == ".png";
  EXPECT_EQ(pngs, 1u);
}

TEST(ConfigFromNames, RecoversConfigs) {
  FeatureConfig a;
  FeatureConfig b;
  b.sigmas = {0.7, 1.25, 3};
  b.enable_sobel = false;
  b.enable_window_stats = true;
  b.window_radii = {1, 4};
  b.enable_membrane = true;
  b.membrane_size = 11;
  b.membrane_width = 3;
  FeatureConfig c;
  c.enable_gaussian = c.enable_sobel = c.enable_hessian = c.enable_dog = false;
  for (const auto& cfg : {a, b, c}) {
    EXPECT_EQ(feature_names(cli::config_from_feature_names(feature_names(cfg))), feature_names(cfg));
  }
  EXPECT_THROW(cli::config_from_feature_names({"original", "mystery"}), Error);
  EXPECT_THROW(cli::config_from_feature_names({"gaussian_s1"}), Error);
}

}  // namespace
