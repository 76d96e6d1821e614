#include "samba/feature_stack.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <sstream>

#include "samba/filters.hpp"
#include "samba/parallel.hpp"

namespace samba {

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); }

// Shortest decimal form that round-trips, so names pin parameters exactly.
std::string fmt_num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  invalid(key + ": expected true/false, got '" + v + "'");
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double d = 0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    invalid(key + ": not a number: '" + v + "'");
  }
  if (used != v.size()) invalid(key + ": not a number: '" + v + "'");
  return d;
}

int parse_int(const std::string& key, const std::string& v) {
  int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    invalid(key + ": not an integer: '" + v + "'");
  }
  return out;
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& key, const std::string& v, Parse parse) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse(key, item));
  }
  return out;
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    out += fmt_num(static_cast<double>(xs[i]));
  }
  return out;
}

}  // namespace

void FeatureConfig::validate() const {
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    if (!(sigmas[i] > 0.0)) invalid("sigmas must be positive");
    if (i > 0 && !(sigmas[i] > sigmas[i - 1])) invalid("sigmas must be strictly increasing");
  }
  for (std::size_t i = 0; i < window_radii.size(); ++i) {
    if (window_radii[i] < 1) invalid("window_radii must be >= 1");
    if (i > 0 && window_radii[i] <= window_radii[i - 1]) {
      invalid("window_radii must be strictly increasing");
    }
  }
  if (membrane_size < 3 || membrane_size % 2 == 0) invalid("membrane_size must be odd and >= 3");
  if (membrane_width < 1 || membrane_width > membrane_size) {
    invalid("membrane_width must be in [1, membrane_size]");
  }
}

FeatureConfig parse_feature_config(const std::string& text) {
  FeatureConfig cfg;
  std::stringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) invalid("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key == "sigmas") cfg.sigmas = parse_list<double>(key, value, parse_double);
    else if (key == "enable_gaussian") cfg.enable_gaussian = parse_bool(key, value);
    else if (key == "enable_sobel") cfg.enable_sobel = parse_bool(key, value);
    else if (key == "enable_hessian") cfg.enable_hessian = parse_bool(key, value);
    else if (key == "enable_dog") cfg.enable_dog = parse_bool(key, value);
    else if (key == "enable_window_stats") cfg.enable_window_stats = parse_bool(key, value);
    else if (key == "enable_membrane") cfg.enable_membrane = parse_bool(key, value);
    else if (key == "window_radii") cfg.window_radii = parse_list<int>(key, value, parse_int);
    else if (key == "membrane_size") cfg.membrane_size = parse_int(key, value);
    else if (key == "membrane_width") cfg.membrane_width = parse_int(key, value);
    else invalid("unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

std::string format_feature_config(const FeatureConfig& cfg) {
  auto b = [](bool v) { return v ? "true" : "false"; };
  std::ostringstream os;
  os << "sigmas = " << join(cfg.sigmas) << "\n"
     << "enable_gaussian = " << b(cfg.enable_gaussian) << "\n"
     << "enable_sobel = " << b(cfg.enable_sobel) << "\n"
     << "enable_hessian = " << b(cfg.enable_hessian) << "\n"
     << "enable_dog = " << b(cfg.enable_dog) << "\n"
     << "enable_window_stats = " << b(cfg.enable_window_stats) << "\n"
     << "enable_membrane = " << b(cfg.enable_membrane) << "\n"
     << "window_radii = " << join(cfg.window_radii) << "\n"
     << "membrane_size = " << cfg.membrane_size << "\n"
     << "membrane_width = " << cfg.membrane_width << "\n";
  return os.str();
}

namespace {

// One unit of work in the stack: fills `names.size()` consecutive columns
// starting at `column`.
struct FeatureJob {
  std::vector<std::string> names;
  std::function<std::vector<PlaneD>()> compute;
};

std::vector<FeatureJob> plan_features(const PlaneD* img, const FeatureConfig& cfg,
                                      const std::vector<PlaneD>* blurs) {
  std::vector<FeatureJob> jobs;
  auto blur = [blurs](std::size_t i) -> const PlaneD& { return (*blurs)[i]; };
  const auto& sigmas = cfg.sigmas;

  jobs.push_back({{"original"}, [img] { return std::vector<PlaneD>{*img}; }});
  if (cfg.enable_gaussian) {
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
      jobs.push_back({{"gaussian_s" + fmt_num(sigmas[i])},
                      [blur, i] { return std::vector<PlaneD>{blur(i)}; }});
    }
  }
  if (cfg.enable_sobel) {
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
      jobs.push_back({{"sobel_s" + fmt_num(sigmas[i])},
                      [blur, i] { return std::vector<PlaneD>{sobel_magnitude(blur(i), 0.0)}; }});
    }
  }
  if (cfg.enable_hessian) {
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
      const std::string s = fmt_num(sigmas[i]);
      jobs.push_back({{"hessian_max_s" + s, "hessian_min_s" + s}, [blur, i] {
                        auto h = hessian_eigenvalues_unsmoothed(blur(i));
                        return std::vector<PlaneD>{std::move(h.largest), std::move(h.smallest)};
                      }});
    }
  }
  if (cfg.enable_dog) {
    for (std::size_t i = 0; i + 1 < sigmas.size(); ++i) {
      jobs.push_back({{"dog_s" + fmt_num(sigmas[i]) + "_s" + fmt_num(sigmas[i + 1])},
                      [blur, i] { return std::vector<PlaneD>{PlaneD(blur(i + 1) - blur(i))}; }});
    }
  }
  if (cfg.enable_window_stats) {
    // Stat-major order: every radius of "mean", then every radius of "min", ...
    std::vector<std::string> names;
    for (WindowStat stat : kWindowStats) {
      for (int r : cfg.window_radii) {
        names.push_back(std::string("window_") + window_stat_name(stat) + "_r" + std::to_string(r));
      }
    }
    const auto radii = cfg.window_radii;
    jobs.push_back({names, [img, radii] {
                      std::vector<std::array<PlaneD, 5>> per_radius;
                      for (int r : radii) per_radius.push_back(window_statistics(*img, r));
                      std::vector<PlaneD> out;
                      for (std::size_t s = 0; s < kWindowStats.size(); ++s) {
                        for (auto& stats : per_radius) out.push_back(std::move(stats[s]));
                      }
                      return out;
                    }});
  }
  if (cfg.enable_membrane) {
    std::vector<std::string> names;
    const std::string suffix =
        "_" + std::to_string(cfg.membrane_size) + "x" + std::to_string(cfg.membrane_width);
    for (const char* p : kMembraneProjectionNames) names.push_back(std::string("membrane_") + p + suffix);
    const int size = cfg.membrane_size, width = cfg.membrane_width;
    jobs.push_back({names, [img, size, width] {
                      auto p = membrane_projections(*img, size, width);
                      return std::vector<PlaneD>(std::make_move_iterator(p.begin()),
                                                 std::make_move_iterator(p.end()));
                    }});
  }
  return jobs;
}

}  // namespace

std::vector<std::string> feature_names(const FeatureConfig& cfg) {
  cfg.validate();
  std::vector<std::string> names;
  for (const auto& job : plan_features(nullptr, cfg, nullptr)) {
    names.insert(names.end(), job.names.begin(), job.names.end());
  }
  return names;
}

FeatureStack::FeatureStack(int width, int height, std::vector<std::string> names, FeatureMatrix data)
    : width_(width), height_(height), names_(std::move(names)), data_(std::move(data)) {
  if (data_.rows() != static_cast<Eigen::Index>(width_) * height_ ||
      data_.cols() != static_cast<Eigen::Index>(names_.size())) {
    throw Error(ErrorCode::DimensionMismatch, "feature matrix shape does not match stack");
  }
}

PlaneD FeatureStack::feature_plane(Eigen::Index f) const {
  PlaneD out(height_, width_);
  Eigen::Map<Eigen::VectorXd>(out.data(), out.size()) = data_.col(f);
  return out;
}

FeatureStack build_feature_stack(const GrayImage& img, const FeatureConfig& cfg, int workers) {
  cfg.validate();
  const PlaneD& plane = img.plane();

  const bool need_blurs = cfg.enable_gaussian || cfg.enable_sobel || cfg.enable_hessian ||
                          (cfg.enable_dog && cfg.sigmas.size() > 1);
  std::vector<PlaneD> blurs(need_blurs ? cfg.sigmas.size() : 0);
  parallel_for(blurs.size(), workers,
               [&](std::size_t i) { blurs[i] = gaussian_blur(plane, cfg.sigmas[i]); });

  const auto jobs = plan_features(&plane, cfg, &blurs);
  std::vector<std::size_t> first_column(jobs.size());
  std::vector<std::string> names;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    first_column[j] = names.size();
    names.insert(names.end(), jobs[j].names.begin(), jobs[j].names.end());
  }

  FeatureMatrix data(plane.size(), static_cast<Eigen::Index>(names.size()));
  parallel_for(jobs.size(), workers, [&](std::size_t j) {
    const auto planes = jobs[j].compute();
    for (std::size_t k = 0; k < planes.size(); ++k) {
      data.col(static_cast<Eigen::Index>(first_column[j] + k)) =
          Eigen::Map<const Eigen::VectorXd>(planes[k].data(), planes[k].size());
    }
  });
  return FeatureStack(img.width(), img.height(), std::move(names), std::move(data));
}

}  // namespace samba
