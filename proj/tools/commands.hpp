#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "samba/feature_stack.hpp"

namespace samba::cli {

enum ExitCode : int { kOk = 0, kEngineError = 1, kUsageError = 2 };

/// Bad invocation or inputs that do not fit together (exit code 2).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainArgs {
  std::string image;
  std::string labels;
  std::optional<std::string> config;
  std::string out;
  std::optional<int> trees;
  std::optional<std::uint64_t> seed;
};

struct ApplyArgs {
  std::string model;
  std::string image;  // file or directory
  std::string out;    // directory
  std::optional<std::string> config;
};

struct FeaturesArgs {
  std::string image;
  std::optional<std::string> config;
  std::string out;  // directory
};

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8000;
  std::size_t max_sessions = 16;
};

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err);
int cmd_apply(const ApplyArgs& args, std::ostream& out, std::ostream& err);
int cmd_features(const FeaturesArgs& args, std::ostream& out, std::ostream& err);
int cmd_serve(const ServeArgs& args, std::ostream& out, std::ostream& err);

/// Rebuilds the config whose feature list is `names`; throws FeatureMismatch
/// when no config produces exactly that list.
FeatureConfig config_from_feature_names(const std::vector<std::string>& names);

/// Parses argv and dispatches; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace samba::cli
