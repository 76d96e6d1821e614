#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "samba/feature_stack.hpp"
#include "samba/forest.hpp"
#include "samba/image.hpp"
#include "samba/labels.hpp"
#include "samba/smart_label.hpp"

namespace samba {

/// Failure carrying the HTTP status and a stable error name for the client.
class ApiError : public std::runtime_error {
 public:
  ApiError(int status, std::string code, const std::string& message)
      : std::runtime_error(message), status_(status), code_(std::move(code)) {}
  int status() const noexcept { return status_; }
  const std::string& code() const noexcept { return code_; }

 private:
  int status_;
  std::string code_;
};

/// Maps engine errors onto the HTTP contract.
ApiError to_api_error(const Error& e);

enum class EmbeddingStatus { Pending, Ready, Failed, Absent };
const char* to_string(EmbeddingStatus s) noexcept;

struct SessionStatus {
  std::vector<EmbeddingStatus> embedding_status;
  bool features_ready = false;
  bool model_trained = false;
};

struct TrainOutcome {
  double train_accuracy = 0.0;
};

/// One uploaded image and everything derived from it. Readers never block on
/// the writer's slow work: writers build new state off-lock and swap it in.
class Session {
 public:
  struct Options {
    FeatureConfig features;
    std::shared_ptr<const SmartLabelBackend> backend;
    int workers = 1;
  };

  Session(std::string id, ImageStack stack, Options options);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  /// Starts embedding and feature-stack computation on background threads.
  void start_background();

  const std::string& id() const noexcept { return id_; }
  const ImageStack& stack() const noexcept { return stack_; }

  SessionStatus status() const;
  void wait_until_idle() const;

  MaskProposal prompt(const PromptPoint& point, int scale_index) const;

  /// Applies deltas per slice, in order, atomically. Returns labelled pixels
  /// over all slices.
  std::size_t apply_deltas(const std::vector<std::pair<int, LabelDelta>>& deltas);
  LabelMap label_map(int slice) const;
  std::size_t labelled_count() const;

  TrainOutcome train(const ForestParams& params);
  void install_model(RandomForestModel model);

  std::shared_ptr<const RandomForestModel> model() const;
  /// Throws 409 NotTrained.
  std::shared_ptr<const std::vector<SegmentationResult>> segmentation() const;

  void touch() noexcept;
  std::chrono::steady_clock::time_point last_access() const noexcept;

 private:
  void check_slice(int slice) const;
  std::shared_ptr<const std::vector<FeatureStack>> ready_features() const;
  std::vector<SegmentationResult> segment_all(const RandomForestModel& model,
                                              const std::vector<FeatureStack>& stacks) const;

  const std::string id_;
  const ImageStack stack_;
  const Options options_;

  mutable std::shared_mutex state_mutex_;
  std::vector<LabelMap> labels_;
  std::vector<EmbeddingStatus> embedding_status_;
  std::vector<std::string> embedding_errors_;
  std::vector<std::shared_ptr<const ImageEmbedding>> embeddings_;
  std::shared_ptr<const std::vector<FeatureStack>> features_;
  std::shared_ptr<const RandomForestModel> model_;
  std::shared_ptr<const std::vector<SegmentationResult>> segmentation_;

  std::mutex writer_mutex_;
  std::atomic<bool> training_{false};
  std::atomic<std::int64_t> last_access_ns_;

  std::jthread embedding_worker_;
  std::jthread feature_worker_;
};

/// In-memory sessions with idle eviction and a size cap.
class SessionStore {
 public:
  SessionStore(std::size_t max_sessions, std::chrono::minutes ttl);

  std::shared_ptr<Session> create(ImageStack stack, Session::Options options);
  /// Throws 404 UnknownSession.
  std::shared_ptr<Session> get(const std::string& id);
  std::size_t size() const;
  void evict_expired();

 private:
  mutable std::mutex mutex_;
  std::unordered_map<std::string, std::shared_ptr<Session>> sessions_;
  std::size_t max_sessions_;
  std::chrono::minutes ttl_;
};

}  // namespace samba
