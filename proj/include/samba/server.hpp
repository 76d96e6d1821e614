#pragma once

#include <chrono>
#include <memory>
#include <string>

#include "samba/feature_stack.hpp"
#include "samba/smart_label.hpp"

namespace samba {

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8000;  // 0 binds any free port
  std::size_t max_sessions = 16;
  std::chrono::minutes session_ttl{60};
  FeatureConfig features;
  std::shared_ptr<const SmartLabelBackend> backend;  // null: taken from the environment
  int workers = 1;
  std::string static_dir;  // served under "/" when set
};

/// Reads SAMBA_SESSION_TTL_MIN (and the smart-label backend variables).
ServerOptions apply_environment(ServerOptions options);

/// HTTP front end over the session store.
///
///   POST /session                       image bytes -> {session_id, width, height, n_slices}
///   GET  /session/{id}/status           -> {embedding_status[], features_ready, model_trained}
///   POST /session/{id}/prompt           {x, y, slice, scale_index} -> {mask, scale_rank, quality}
///   POST /session/{id}/labels           {deltas: [...]} -> {labelled_pixel_count}
///   GET  /session/{id}/labels?slice=k   -> PNG of class ids
///   POST /session/{id}/train            {params?} -> {trained, train_accuracy}
///   GET  /session/{id}/segmentation?slice=k -> PNG of class ids
///   GET  /session/{id}/uncertainty?slice=k  -> PNG of round(255 u)
///   GET  /session/{id}/classifier       -> model document
///   POST /session/{id}/classifier       model document -> {applied}
class Server {
 public:
  explicit Server(ServerOptions options);
  ~Server();

  /// Binds the socket; returns the bound port.
  int bind();
  /// Blocks serving requests until stop().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace samba
