#include "commands.hpp"

#include <algorithm>
#include <csignal>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <fstream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "samba/forest.hpp"
#include "samba/labels.hpp"
#include "samba/server.hpp"

namespace samba::cli {

namespace fs = std::filesystem;

namespace {

FeatureConfig load_config(const std::optional<std::string>& path) {
  if (!path) return FeatureConfig{};
  const auto bytes = read_file(*path);
  return parse_feature_config(std::string(bytes.begin(), bytes.end()));
}

ImageStack load_image(const std::string& path) {
  const auto bytes = read_file(path);
  return decode_image(bytes);
}

std::vector<LabelMap> load_labels(const std::string& path) {
  const auto bytes = read_file(path);
  std::vector<LabelMap> maps;
  int slice = 0;
  for (const auto& page : decode_raw(bytes)) {
    if (page.sample != RawPage::Sample::U8) {
      throw UsageError("labels must be 8-bit class-id images");
    }
    ClassPlane classes(page.height, page.width);
    for (Eigen::Index i = 0; i < classes.size(); ++i) {
      classes.data()[i] = static_cast<std::uint8_t>(page.values[static_cast<std::size_t>(i) * page.channels]);
    }
    maps.emplace_back(std::move(classes), slice++);
  }
  return maps;
}

int hardware_workers() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

std::vector<FeatureStack> build_stacks(const ImageStack& image, const FeatureConfig& cfg) {
  std::vector<FeatureStack> stacks;
  for (const auto& slice : image.slices()) {
    stacks.push_back(build_feature_stack(to_grayscale(slice), cfg, hardware_workers()));
  }
  return stacks;
}

double parse_sigma(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument(s);
  return v;
}

bool starts_with(const std::string& s, const std::string& prefix) {
  return s.rfind(prefix, 0) == 0;
}

}  // namespace

FeatureConfig config_from_feature_names(const std::vector<std::string>& names) {
  FeatureConfig cfg;
  cfg.enable_gaussian = cfg.enable_sobel = cfg.enable_hessian = cfg.enable_dog = false;
  cfg.enable_window_stats = cfg.enable_membrane = false;
  std::set<double> sigmas;
  std::set<int> radii;
  try {
    for (const auto& name : names) {
      if (name == "original") continue;
      if (starts_with(name, "gaussian_s")) {
        cfg.enable_gaussian = true;
        sigmas.insert(parse_sigma(name.substr(10)));
      } else if (starts_with(name, "sobel_s")) {
        cfg.enable_sobel = true;
        sigmas.insert(parse_sigma(name.substr(7)));
      } else if (starts_with(name, "hessian_max_s") || starts_with(name, "hessian_min_s")) {
        cfg.enable_hessian = true;
        sigmas.insert(parse_sigma(name.substr(13)));
      } else if (starts_with(name, "dog_s")) {
        cfg.enable_dog = true;
        const auto mid = name.find("_s", 5);
        sigmas.insert(parse_sigma(name.substr(5, mid - 5)));
        sigmas.insert(parse_sigma(name.substr(mid + 2)));
      } else if (starts_with(name, "window_")) {
        cfg.enable_window_stats = true;
        radii.insert(std::stoi(name.substr(name.rfind("_r") + 2)));
      } else if (starts_with(name, "membrane_")) {
        cfg.enable_membrane = true;
        const auto tail = name.substr(name.rfind('_') + 1);
        const auto x = tail.find('x');
        cfg.membrane_size = std::stoi(tail.substr(0, x));
        cfg.membrane_width = std::stoi(tail.substr(x + 1));
      } else {
        throw Error(ErrorCode::FeatureMismatch, "unknown feature '" + name + "'");
      }
    }
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::FeatureMismatch, "unparseable feature name in classifier");
  }
  if (!sigmas.empty()) cfg.sigmas.assign(sigmas.begin(), sigmas.end());
  if (!radii.empty()) cfg.window_radii.assign(radii.begin(), radii.end());
  try {
    if (feature_names(cfg) == names) return cfg;
  } catch (const Error&) {
  }
  throw Error(ErrorCode::FeatureMismatch, "classifier feature list matches no configuration");
}

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream&) {
  const FeatureConfig cfg = load_config(args.config);
  const ImageStack image = load_image(args.image);
  std::vector<LabelMap> maps = load_labels(args.labels);
  if (maps.size() != image.size() && maps.size() != 1) {
    throw UsageError("labels have " + std::to_string(maps.size()) + " pages, image has " +
                     std::to_string(image.size()) + " slices");
  }
  for (const auto& m : maps) {
    if (m.width() != image.width() || m.height() != image.height()) {
      throw UsageError("labels are " + std::to_string(m.width()) + "x" + std::to_string(m.height()) +
                       " but the image is " + std::to_string(image.width()) + "x" +
                       std::to_string(image.height()));
    }
  }

  ForestParams params;
  if (args.trees) params.n_trees = *args.trees;
  if (args.seed) params.seed = *args.seed;

  const auto stacks = build_stacks(image, cfg);
  const TrainingSet ts = extract_training_set(stacks, maps);
  const RandomForestModel model = train_forest(ts, params, hardware_workers());

  std::vector<SegmentationResult> results;
  for (const auto& s : stacks) results.push_back(segment(model, s, hardware_workers()));
  const double accuracy = labelled_accuracy(results, maps);

  const std::string doc = serialize_model(model);
  write_file(args.out, std::span(reinterpret_cast<const std::uint8_t*>(doc.data()), doc.size()));

  std::map<int, std::size_t> per_class;
  for (auto c : ts.classes) ++per_class[c];
  out << "features: " << ts.feature_names.size() << "\n";
  for (const auto& [cls, n] : per_class) out << "class " << cls << " samples: " << n << "\n";
  out << "train_accuracy: " << std::fixed << std::setprecision(6) << accuracy << "\n";
  out << "model: " << args.out << "\n";
  return kOk;
}

int cmd_apply(const ApplyArgs& args, std::ostream& out, std::ostream& err) {
  const auto doc = read_file(args.model);
  const RandomForestModel model = deserialize_model(std::string(doc.begin(), doc.end()));
  const FeatureConfig cfg = args.config ? load_config(args.config)
                                        : config_from_feature_names(model.feature_names());

  std::vector<fs::path> inputs;
  if (fs::is_directory(args.image)) {
    for (const auto& entry : fs::directory_iterator(args.image)) {
      if (entry.is_regular_file()) inputs.push_back(entry.path());
    }
    std::sort(inputs.begin(), inputs.end());
  } else {
    if (!fs::exists(args.image)) throw UsageError("no such image: " + args.image);
    inputs.push_back(args.image);
  }
  if (inputs.empty()) return kOk;
  fs::create_directories(args.out);

  int failures = 0;
  for (const auto& path : inputs) {
    try {
      const ImageStack image = load_image(path.string());
      const auto stacks = build_stacks(image, cfg);
      for (std::size_t s = 0; s < stacks.size(); ++s) {
        const SegmentationResult r = segment(model, stacks[s], hardware_workers());
        std::string stem = path.stem().string();
        if (stacks.size() > 1) stem += "_" + std::to_string(s);
        write_file((fs::path(args.out) / (stem + "_seg.png")).string(), encode_png(r.class_map));
        write_file((fs::path(args.out) / (stem + "_unc.png")).string(),
                   encode_png(GrayImage(r.uncertainty)));
      }
      out << path.string() << ": " << stacks.size() << " slice(s)\n";
    } catch (const Error& e) {
      ++failures;
      err << path.string() << ": " << to_string(e.code()) << ": " << e.what() << "\n";
    } catch (const std::exception& e) {
      ++failures;
      err << path.string() << ": " << e.what() << "\n";
    }
  }
  return failures == 0 ? kOk : kEngineError;
}

int cmd_features(const FeaturesArgs& args, std::ostream& out, std::ostream&) {
  const FeatureConfig cfg = load_config(args.config);
  const ImageStack image = load_image(args.image);
  const FeatureStack stack = build_feature_stack(to_grayscale(image.slice(0)), cfg);
  fs::create_directories(args.out);

  std::ofstream manifest(fs::path(args.out) / "features.txt");
  for (Eigen::Index f = 0; f < stack.n_features(); ++f) {
    PlaneD plane = stack.feature_plane(f);
    const double lo = plane.minCoeff(), hi = plane.maxCoeff();
    plane = hi > lo ? PlaneD((plane - lo) / (hi - lo)) : PlaneD(PlaneD::Zero(plane.rows(), plane.cols()));
    std::ostringstream file;
    file << std::setw(2) << std::setfill('0') << f << "_" << stack.names()[static_cast<std::size_t>(f)]
         << ".png";
    write_file((fs::path(args.out) / file.str()).string(), encode_png(GrayImage(plane.cwiseMin(1.0).cwiseMax(0.0))));
    manifest << stack.names()[static_cast<std::size_t>(f)] << "\n";
  }
  out << stack.n_features() << " features written to " << args.out << "\n";
  return kOk;
}

namespace {
Server* g_server = nullptr;
void on_signal(int) {
  if (g_server) g_server->stop();
}
}  // namespace

int cmd_serve(const ServeArgs& args, std::ostream& out, std::ostream&) {
  ServerOptions options;
  options.host = args.host;
  options.port = args.port;
  options.max_sessions = args.max_sessions;
  options.workers = hardware_workers();
  if (const char* dir = std::getenv("SAMBA_STATIC_DIR"); dir && *dir) options.static_dir = dir;
  Server server(std::move(options));
  const int port = server.bind();
  out << "listening on http://" << args.host << ":" << port << std::endl;
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.run();
  g_server = nullptr;
  return kOk;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Trainable segmentation with smart labelling"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a classifier from an image and class-id labels");
  train_cmd->add_option("--image", train.image, "Image (PNG, JPEG, TIFF)")->required();
  train_cmd->add_option("--labels", train.labels, "Class-id PNG, 0 = unlabelled")->required();
  train_cmd->add_option("--config", train.config, "Feature config file");
  train_cmd->add_option("--out", train.out, "Model file to write")->required();
  train_cmd->add_option("--trees", train.trees, "Number of trees")->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", train.seed, "Random seed");

  ApplyArgs apply;
  auto* apply_cmd = app.add_subcommand("apply", "Segment images with a trained classifier");
  apply_cmd->add_option("--model", apply.model, "Model file")->required();
  apply_cmd->add_option("--image", apply.image, "Image file or directory")->required();
  apply_cmd->add_option("--out", apply.out, "Output directory")->required();
  apply_cmd->add_option("--config", apply.config, "Feature config (default: inferred from model)");

  FeaturesArgs features;
  auto* features_cmd = app.add_subcommand("features", "Dump the feature stack as PNGs");
  features_cmd->add_option("--image", features.image, "Image")->required();
  features_cmd->add_option("--config", features.config, "Feature config file");
  features_cmd->add_option("--out", features.out, "Output directory")->required();

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  serve_cmd->add_option("--port", serve.port, "Port");
  serve_cmd->add_option("--host", serve.host, "Bind address");
  serve_cmd->add_option("--max-sessions", serve.max_sessions, "Session limit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n" << app.help();
    return kUsageError;
  }

  try {
    if (*train_cmd) return cmd_train(train, out, err);
    if (*apply_cmd) return cmd_apply(apply, out, err);
    if (*features_cmd) return cmd_features(features, out, err);
    if (*serve_cmd) return cmd_serve(serve, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return e.code() == ErrorCode::InvalidConfig ? kUsageError : kEngineError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kEngineError;
  }
  return kUsageError;
}

}  // namespace samba::cli
