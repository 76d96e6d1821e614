#include "samba/server.hpp"

#include <cstdlib>
#include <functional>

#include <httplib.h>
#include <json.hpp>

#include "samba/forest.hpp"
#include "samba/rle.hpp"
#include "samba/session.hpp"

namespace samba {

using nlohmann::json;

ServerOptions apply_environment(ServerOptions options) {
  if (const char* ttl = std::getenv("SAMBA_SESSION_TTL_MIN"); ttl && *ttl) {
    options.session_ttl = std::chrono::minutes(std::max(1, std::atoi(ttl)));
  }
  if (!options.backend) options.backend = backend_from_environment();
  return options;
}

namespace {

json rle_to_json(const RleMask& rle) {
  json runs = json::array();
  for (const auto& [start, length] : rle.runs) runs.push_back({start, length});
  return {{"width", rle.width}, {"height", rle.height}, {"runs", std::move(runs)}};
}

RleMask rle_from_json(const json& j) {
  RleMask rle;
  rle.width = j.at("width").get<int>();
  rle.height = j.at("height").get<int>();
  for (const auto& r : j.at("runs")) {
    rle.runs.emplace_back(r.at(0).get<std::uint64_t>(), r.at(1).get<std::uint64_t>());
  }
  return rle;
}

std::vector<Point2> points_from_json(const json& j) {
  std::vector<Point2> out;
  for (const auto& p : j) out.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  return out;
}

DeltaSource source_from_string(const std::string& s) {
  if (s == "brush") return DeltaSource::Brush;
  if (s == "polygon") return DeltaSource::Polygon;
  if (s == "smart_mask") return DeltaSource::SmartMask;
  if (s == "eraser") return DeltaSource::Eraser;
  throw ApiError(400, "BadRequest", "unknown delta source '" + s + "'");
}

// A delta record names its `source` and carries exactly one geometry:
// `pixels` (explicit list), `points` + `radius` (brush/eraser stroke),
// `vertices` (polygon) or `mask` (RLE, smart-label accept).
std::pair<int, LabelDelta> delta_from_json(const json& j, int width, int height) {
  const DeltaSource source = source_from_string(j.at("source").get<std::string>());
  const int slice = j.value("slice", 0);
  int class_id = j.value("class_id", 0);
  if (source == DeltaSource::Eraser) class_id = 0;
  else if (class_id < 1 || class_id > 255) {
    throw ApiError(400, "BadRequest", "class_id must be in 1..255");
  }
  const auto cls = static_cast<std::uint8_t>(class_id);

  LabelDelta delta;
  if (j.contains("pixels")) {
    delta.source = source;
    delta.class_id = cls;
    for (const auto& p : j.at("pixels")) delta.pixels.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
    normalize_pixels(delta.pixels);
  } else if (j.contains("points")) {
    const auto path = points_from_json(j.at("points"));
    delta = rasterize_brush(path, j.value("radius", 0.0), cls, width, height, source);
  } else if (j.contains("vertices")) {
    const auto vertices = points_from_json(j.at("vertices"));
    delta = rasterize_polygon(vertices, cls, width, height);
    delta.source = source;
  } else if (j.contains("mask")) {
    const RleMask rle = rle_from_json(j.at("mask"));
    if (rle.width != width || rle.height != height) {
      throw ApiError(400, "OutOfBounds", "mask dimensions differ from the image");
    }
    MaskProposal proposal{decode_rle(rle), 0.0, 0};
    delta = accept_mask(proposal, cls);
    delta.source = source;
    delta.class_id = cls;
  } else {
    throw ApiError(400, "BadRequest", "delta has no pixels, points, vertices or mask");
  }
  return {slice, std::move(delta)};
}

ForestParams params_from_json(const json& j) {
  ForestParams p;
  if (j.is_null()) return p;
  if (j.contains("n_trees")) p.n_trees = j.at("n_trees").get<int>();
  if (j.contains("max_depth")) p.max_depth = j.at("max_depth").get<int>();
  if (j.contains("min_samples_split")) p.min_samples_split = j.at("min_samples_split").get<int>();
  if (j.contains("features_per_split") && !j.at("features_per_split").is_null()) {
    p.features_per_split = j.at("features_per_split").get<int>();
  }
  if (j.contains("seed")) p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

int slice_param(const httplib::Request& req) {
  if (!req.has_param("slice")) return 0;
  try {
    return std::stoi(req.get_param_value("slice"));
  } catch (const std::exception&) {
    throw ApiError(400, "BadRequest", "slice must be an integer");
  }
}

const SegmentationResult& slice_result(const std::vector<SegmentationResult>& results, int slice) {
  if (slice < 0 || static_cast<std::size_t>(slice) >= results.size()) {
    throw ApiError(400, "OutOfBounds", "slice index out of range");
  }
  return results[static_cast<std::size_t>(slice)];
}

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_png(httplib::Response& res, const std::vector<std::uint8_t>& png) {
  res.status = 200;
  res.set_content(reinterpret_cast<const char*>(png.data()), png.size(), "image/png");
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    throw ApiError(400, "BadRequest", std::string("invalid JSON body: ") + e.what());
  }
}

}  // namespace

struct Server::Impl {
  ServerOptions options;
  SessionStore store;
  httplib::Server http;
  int bound_port = -1;

  explicit Impl(ServerOptions opts)
      : options(apply_environment(std::move(opts))),
        store(options.max_sessions, options.session_ttl) {
    options.features.validate();
    routes();
  }

  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  // Every handler reports failures as {"error", "message"} with the mapped status.
  static httplib::Server::Handler guarded(Handler h) {
    return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
      try {
        h(req, res);
      } catch (const ApiError& e) {
        send_json(res, {{"error", e.code()}, {"message", e.what()}}, e.status());
      } catch (const Error& e) {
        const ApiError api = to_api_error(e);
        send_json(res, {{"error", api.code()}, {"message", api.what()}}, api.status());
      } catch (const json::exception& e) {
        send_json(res, {{"error", "BadRequest"}, {"message", e.what()}}, 400);
      } catch (const std::exception& e) {
        send_json(res, {{"error", "InternalError"}, {"message", e.what()}}, 500);
      }
    };
  }

  std::shared_ptr<Session> session(const httplib::Request& req) {
    return store.get(req.path_params.at("id"));
  }

  void routes() {
    http.Post("/session", guarded([this](const auto& req, auto& res) { create(req, res); }));
    http.Get("/session/:id/status", guarded([this](const auto& req, auto& res) {
      const auto st = session(req)->status();
      json statuses = json::array();
      for (auto s : st.embedding_status) statuses.push_back(to_string(s));
      send_json(res, {{"embedding_status", statuses},
                      {"features_ready", st.features_ready},
                      {"model_trained", st.model_trained}});
    }));
    http.Post("/session/:id/prompt", guarded([this](const auto& req, auto& res) {
      const auto s = session(req);
      const json body = parse_body(req);
      const PromptPoint point{body.at("x").template get<int>(), body.at("y").template get<int>(),
                              body.value("slice", 0)};
      const MaskProposal p = s->prompt(point, body.value("scale_index", 0));
      send_json(res, {{"mask", rle_to_json(encode_rle(p.mask))},
                      {"scale_rank", p.scale_rank},
                      {"quality", p.quality}});
    }));
    http.Post("/session/:id/labels", guarded([this](const auto& req, auto& res) {
      const auto s = session(req);
      const json body = parse_body(req);
      std::vector<std::pair<int, LabelDelta>> deltas;
      if (body.contains("deltas")) {
        for (const auto& d : body.at("deltas")) {
          deltas.push_back(delta_from_json(d, s->stack().width(), s->stack().height()));
        }
      }
      send_json(res, {{"labelled_pixel_count", s->apply_deltas(deltas)}});
    }));
    http.Get("/session/:id/labels", guarded([this](const auto& req, auto& res) {
      send_png(res, encode_png(session(req)->label_map(slice_param(req)).classes()));
    }));
    http.Post("/session/:id/train", guarded([this](const auto& req, auto& res) {
      const auto s = session(req);
      const json body = parse_body(req);
      const ForestParams params = params_from_json(body.value("params", json()));
      const TrainOutcome outcome = s->train(params);
      send_json(res, {{"trained", true}, {"train_accuracy", outcome.train_accuracy}});
    }));
    http.Get("/session/:id/segmentation", guarded([this](const auto& req, auto& res) {
      const auto seg = session(req)->segmentation();
      send_png(res, encode_png(slice_result(*seg, slice_param(req)).class_map));
    }));
    http.Get("/session/:id/uncertainty", guarded([this](const auto& req, auto& res) {
      const auto seg = session(req)->segmentation();
      send_png(res, encode_png(GrayImage(slice_result(*seg, slice_param(req)).uncertainty)));
    }));
    http.Get("/session/:id/classifier", guarded([this](const auto& req, auto& res) {
      res.set_content(serialize_model(*session(req)->model()), "application/json");
    }));
    http.Post("/session/:id/classifier", guarded([this](const auto& req, auto& res) {
      const auto s = session(req);
      s->install_model(deserialize_model(req.body));
      send_json(res, {{"applied", true}});
    }));
    if (!options.static_dir.empty()) http.set_mount_point("/", options.static_dir);
  }

  void create(const httplib::Request& req, httplib::Response& res) {
    std::string_view bytes = req.body;
    if (req.is_multipart_form_data()) {
      const auto it = req.files.count("image") ? req.files.find("image") : req.files.begin();
      if (it != req.files.end()) bytes = it->second.content;
    }
    const auto* data = reinterpret_cast<const std::uint8_t*>(bytes.data());
    ImageStack stack = decode_image(std::span<const std::uint8_t>(data, bytes.size()));
    const int width = stack.width(), height = stack.height();
    const auto n_slices = stack.size();
    const auto s = store.create(std::move(stack),
                                Session::Options{options.features, options.backend, options.workers});
    send_json(res, {{"session_id", s->id()},
                    {"width", width},
                    {"height", height},
                    {"n_slices", n_slices}});
  }
};

Server::Server(ServerOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

Server::~Server() { stop(); }

int Server::bind() {
  auto& impl = *impl_;
  if (impl.options.port == 0) {
    impl.bound_port = impl.http.bind_to_any_port(impl.options.host);
  } else if (impl.http.bind_to_port(impl.options.host, impl.options.port)) {
    impl.bound_port = impl.options.port;
  }
  if (impl.bound_port < 0) {
    throw std::runtime_error("cannot bind " + impl.options.host + ":" +
                             std::to_string(impl.options.port));
  }
  return impl.bound_port;
}

void Server::run() {
  if (impl_->bound_port < 0) bind();
  impl_->http.listen_after_bind();
}

void Server::stop() {
  if (impl_) impl_->http.stop();
}

}  // namespace samba
