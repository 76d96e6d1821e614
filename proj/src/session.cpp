#include "samba/session.hpp"

#include <algorithm>
#include <random>
#include <sstream>

namespace samba {

ApiError to_api_error(const Error& e) {
  int status = 400;
  switch (e.code()) {
    case ErrorCode::NoLabels: status = 422; break;
    case ErrorCode::FeatureMismatch: status = 409; break;
    case ErrorCode::BackendUnavailable: status = 503; break;
    case ErrorCode::InferenceFailure: status = 500; break;
    default: status = 400; break;
  }
  return ApiError(status, std::string(to_string(e.code())), e.what());
}

const char* to_string(EmbeddingStatus s) noexcept {
  switch (s) {
    case EmbeddingStatus::Pending: return "pending";
    case EmbeddingStatus::Ready: return "ready";
    case EmbeddingStatus::Failed: return "failed";
    case EmbeddingStatus::Absent: return "absent";
  }
  return "absent";
}

namespace {

std::int64_t now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace

Session::Session(std::string id, ImageStack stack, Options options)
    : id_(std::move(id)), stack_(std::move(stack)), options_(std::move(options)),
      last_access_ns_(now_ns()) {
  options_.features.validate();
  const auto n = stack_.size();
  for (std::size_t s = 0; s < n; ++s) {
    labels_.emplace_back(stack_.width(), stack_.height(), static_cast<int>(s));
  }
  embedding_status_.assign(n, options_.backend ? EmbeddingStatus::Pending : EmbeddingStatus::Absent);
  embedding_errors_.assign(n, {});
  embeddings_.resize(n);
}

Session::~Session() {
  embedding_worker_.request_stop();
  feature_worker_.request_stop();
}

void Session::start_background() {
  if (options_.backend) {
    embedding_worker_ = std::jthread([this](std::stop_token stop) {
      for (std::size_t s = 0; s < stack_.size() && !stop.stop_requested(); ++s) {
        try {
          auto e = std::make_shared<const ImageEmbedding>(
              options_.backend->compute_embedding(stack_.slice(s)));
          std::unique_lock lock(state_mutex_);
          embeddings_[s] = std::move(e);
          embedding_status_[s] = EmbeddingStatus::Ready;
        } catch (const std::exception& ex) {
          std::unique_lock lock(state_mutex_);
          embedding_status_[s] = EmbeddingStatus::Failed;
          embedding_errors_[s] = ex.what();
        }
      }
    });
  }
  feature_worker_ = std::jthread([this](std::stop_token stop) {
    auto stacks = std::make_shared<std::vector<FeatureStack>>();
    for (std::size_t s = 0; s < stack_.size(); ++s) {
      if (stop.stop_requested()) return;
      stacks->push_back(
          build_feature_stack(to_grayscale(stack_.slice(s)), options_.features, options_.workers));
    }
    std::unique_lock lock(state_mutex_);
    features_ = std::move(stacks);
  });
}

SessionStatus Session::status() const {
  std::shared_lock lock(state_mutex_);
  return {embedding_status_, features_ != nullptr, model_ != nullptr};
}

void Session::wait_until_idle() const {
  for (;;) {
    const auto st = status();
    const bool embeddings_done = std::none_of(st.embedding_status.begin(), st.embedding_status.end(),
                                              [](auto s) { return s == EmbeddingStatus::Pending; });
    if (embeddings_done && st.features_ready) return;
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
}

void Session::check_slice(int slice) const {
  if (slice < 0 || static_cast<std::size_t>(slice) >= stack_.size()) {
    throw ApiError(400, "OutOfBounds", "slice index out of range");
  }
}

MaskProposal Session::prompt(const PromptPoint& point, int scale_index) const {
  check_slice(point.slice_index);
  if (point.x < 0 || point.y < 0 || point.x >= stack_.width() || point.y >= stack_.height()) {
    throw ApiError(400, "OutOfBounds", "prompt point outside the image");
  }
  std::shared_ptr<const ImageEmbedding> embedding;
  {
    std::shared_lock lock(state_mutex_);
    const auto s = static_cast<std::size_t>(point.slice_index);
    if (embedding_status_[s] == EmbeddingStatus::Failed) {
      throw ApiError(503, "BackendUnavailable", embedding_errors_[s]);
    }
    if (embedding_status_[s] != EmbeddingStatus::Ready) {
      throw ApiError(409, "EmbeddingNotReady", "embedding for this slice is not ready");
    }
    embedding = embeddings_[s];
  }
  const MaskTriple triple = options_.backend->prompt_masks(*embedding, point);
  return select_scale(triple, scale_index);
}

std::size_t Session::apply_deltas(const std::vector<std::pair<int, LabelDelta>>& deltas) {
  std::lock_guard writer(writer_mutex_);
  std::vector<LabelMap> next;
  {
    std::shared_lock lock(state_mutex_);
    next = labels_;
  }
  for (const auto& [slice, delta] : deltas) {
    check_slice(slice);
    apply_delta_in_place(next[static_cast<std::size_t>(slice)], delta);
  }
  std::size_t count = 0;
  for (const auto& m : next) count += m.labelled_count();
  std::unique_lock lock(state_mutex_);
  labels_ = std::move(next);
  return count;
}

LabelMap Session::label_map(int slice) const {
  check_slice(slice);
  std::shared_lock lock(state_mutex_);
  return labels_[static_cast<std::size_t>(slice)];
}

std::size_t Session::labelled_count() const {
  std::shared_lock lock(state_mutex_);
  std::size_t count = 0;
  for (const auto& m : labels_) count += m.labelled_count();
  return count;
}

std::shared_ptr<const std::vector<FeatureStack>> Session::ready_features() const {
  std::shared_lock lock(state_mutex_);
  if (!features_) throw ApiError(409, "FeaturesNotReady", "feature stack is still being computed");
  return features_;
}

std::vector<SegmentationResult> Session::segment_all(const RandomForestModel& model,
                                                     const std::vector<FeatureStack>& stacks) const {
  std::vector<SegmentationResult> out;
  out.reserve(stacks.size());
  for (const auto& s : stacks) out.push_back(segment(model, s, options_.workers));
  return out;
}

TrainOutcome Session::train(const ForestParams& params) {
  if (training_.exchange(true)) {
    throw ApiError(409, "TrainingInProgress", "a training job is already running");
  }
  struct Reset {
    std::atomic<bool>& flag;
    ~Reset() { flag = false; }
  } reset{training_};

  std::lock_guard writer(writer_mutex_);
  const auto stacks = ready_features();
  std::vector<LabelMap> labels;
  {
    std::shared_lock lock(state_mutex_);
    labels = labels_;
  }
  const TrainingSet ts = extract_training_set(*stacks, labels);
  auto model = std::make_shared<const RandomForestModel>(train_forest(ts, params, options_.workers));
  auto seg = std::make_shared<const std::vector<SegmentationResult>>(segment_all(*model, *stacks));
  const double accuracy = labelled_accuracy(*seg, labels);

  std::unique_lock lock(state_mutex_);
  model_ = std::move(model);
  segmentation_ = std::move(seg);
  return {accuracy};
}

void Session::install_model(RandomForestModel model) {
  std::lock_guard writer(writer_mutex_);
  const auto stacks = ready_features();
  if (model.feature_names() != stacks->front().names()) {
    throw ApiError(409, "FeatureMismatch",
                   "classifier was trained on a different feature configuration");
  }
  auto installed = std::make_shared<const RandomForestModel>(std::move(model));
  auto seg = std::make_shared<const std::vector<SegmentationResult>>(segment_all(*installed, *stacks));
  std::unique_lock lock(state_mutex_);
  model_ = std::move(installed);
  segmentation_ = std::move(seg);
}

std::shared_ptr<const RandomForestModel> Session::model() const {
  std::shared_lock lock(state_mutex_);
  if (!model_) throw ApiError(409, "NotTrained", "no classifier has been trained");
  return model_;
}

std::shared_ptr<const std::vector<SegmentationResult>> Session::segmentation() const {
  std::shared_lock lock(state_mutex_);
  if (!segmentation_) throw ApiError(409, "NotTrained", "no classifier has been trained");
  return segmentation_;
}

void Session::touch() noexcept { last_access_ns_ = now_ns(); }

std::chrono::steady_clock::time_point Session::last_access() const noexcept {
  return std::chrono::steady_clock::time_point(std::chrono::nanoseconds(last_access_ns_.load()));
}

SessionStore::SessionStore(std::size_t max_sessions, std::chrono::minutes ttl)
    : max_sessions_(max_sessions), ttl_(ttl) {}

namespace {

std::string new_session_id() {
  static thread_local std::random_device rd;
  std::ostringstream os;
  os << std::hex;
  for (int i = 0; i < 4; ++i) os << static_cast<std::uint32_t>(rd());
  return os.str();
}

}  // namespace

std::shared_ptr<Session> SessionStore::create(ImageStack stack, Session::Options options) {
  evict_expired();
  std::shared_ptr<Session> session;
  {
    std::lock_guard lock(mutex_);
    if (sessions_.size() >= max_sessions_) {
      throw ApiError(503, "TooManySessions", "session limit reached");
    }
    std::string id;
    do {
      id = new_session_id();
    } while (sessions_.count(id));
    session = std::make_shared<Session>(id, std::move(stack), std::move(options));
    sessions_.emplace(id, session);
  }
  session->start_background();
  return session;
}

std::shared_ptr<Session> SessionStore::get(const std::string& id) {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ApiError(404, "UnknownSession", "no session '" + id + "'");
  it->second->touch();
  return it->second;
}

std::size_t SessionStore::size() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

void SessionStore::evict_expired() {
  std::vector<std::shared_ptr<Session>> expired;
  {
    std::lock_guard lock(mutex_);
    const auto cutoff = std::chrono::steady_clock::now() - ttl_;
    for (auto it = sessions_.begin(); it != sessions_.end();) {
      if (it->second->last_access() < cutoff) {
        expired.push_back(std::move(it->second));
        it = sessions_.erase(it);
      } else {
        ++it;
      }
    }
  }
  // Background threads join as `expired` goes out of scope, outside the lock.
}

}  // namespace samba
