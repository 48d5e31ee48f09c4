#include "vamix/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <cstdio>
#include <random>

#include "vamix/error.hpp"
#include "vamix/random.hpp"

namespace vamix {

Session::Session(std::string id, AudioClip mix, ComplexSpectrogram spec, std::shared_ptr<const MaskSet> masks)
    : id_(std::move(id)),
      mix_(std::move(mix)),
      spec_(std::move(spec)),
      masks_(std::move(masks)),
      created_at_(std::chrono::system_clock::now()),
      last_access_(std::chrono::steady_clock::now()) {}

std::optional<std::vector<double>> Session::last_gains() const {
  std::lock_guard lock(state_mutex_);
  return last_gains_;
}

void Session::set_last_gains(std::vector<double> gains) {
  std::lock_guard lock(state_mutex_);
  last_gains_ = std::move(gains);
  last_access_ = std::chrono::steady_clock::now();
}

std::chrono::steady_clock::time_point Session::last_access() const {
  std::lock_guard lock(state_mutex_);
  return last_access_;
}

void Session::touch() {
  std::lock_guard lock(state_mutex_);
  last_access_ = std::chrono::steady_clock::now();
}

SessionSummary Session::summary() const {
  return SessionSummary{id_, masks_->labels(), mix_.duration_seconds(), spec_.bins(), spec_.frames()};
}

SessionStore::SessionStore(ServiceConfig config) : config_(std::move(config)) {
  std::random_device rd;
  id_salt_ = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

std::string SessionStore::new_id() {
  std::uint64_t n;
  {
    std::lock_guard lock(id_mutex_);
    n = ++id_counter_;
  }
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(derive_seed(id_salt_, n)),
                static_cast<unsigned long long>(derive_seed(id_salt_ ^ 0x5bd1e995ULL, n)));
  return buf;
}

SessionSummary SessionStore::create(std::span<const std::uint8_t> mix_wav, const std::optional<UploadedFile>& masks,
                                    const std::vector<UploadedFile>& stems, const std::vector<std::string>& labels) {
  evict_idle();
  if (masks.has_value() == !stems.empty()) throw ServiceError(400, "provide either a masks file or stems, not both");

  AudioClip mix;
  try {
    mix = decode_wav(mix_wav);
  } catch (const Error& e) {
    throw ServiceError(400, std::string("mix: ") + e.what());
  }
  if (mix.sample_rate != config_.stft.sample_rate) {
    throw ServiceError(415, "mix sample rate " + std::to_string(mix.sample_rate) + " Hz, service expects " +
                                std::to_string(config_.stft.sample_rate) + " Hz");
  }
  if (mix.duration_seconds() > config_.max_seconds) {
    throw ServiceError(413, "mix is " + std::to_string(mix.duration_seconds()) + " s, limit is " +
                                std::to_string(config_.max_seconds) + " s");
  }
  if (mix.samples.empty()) throw ServiceError(400, "mix is empty");

  ComplexSpectrogram spec = stft(mix, config_.stft);
  MaskSet set;
  if (masks) {
    try {
      set = decode_mask_set(masks->bytes);
    } catch (const Error& e) {
      throw ServiceError(400, std::string("masks: ") + e.what());
    }
    if (set.bins() != spec.bins() || set.frames() != spec.frames()) {
      throw ServiceError(400, "DimensionMismatch: masks are " + std::to_string(set.bins()) + "x" +
                                  std::to_string(set.frames()) + ", mix STFT is " + std::to_string(spec.bins()) +
                                  "x" + std::to_string(spec.frames()));
    }
    if (set.stft_params.hop != config_.stft.hop || set.stft_params.window_size != config_.stft.window_size) {
      throw ServiceError(400, "DimensionMismatch: masks were computed with different STFT parameters");
    }
    set.stft_params = config_.stft;
    for (std::size_t i = 0; i < labels.size() && i < set.masks.size(); ++i) set.masks[i].source_label = labels[i];
  } else {
    if (stems.size() < 2) throw ServiceError(400, "need at least two stems");
    std::vector<MagnitudeSpectrogram> mags;
    std::vector<std::string> names;
    for (std::size_t i = 0; i < stems.size(); ++i) {
      AudioClip stem;
      try {
        stem = decode_wav(stems[i].bytes);
      } catch (const Error& e) {
        throw ServiceError(400, "stem " + std::to_string(i) + ": " + e.what());
      }
      if (stem.sample_rate != config_.stft.sample_rate) {
        throw ServiceError(415, "stem " + std::to_string(i) + " sample rate " + std::to_string(stem.sample_rate));
      }
      if (stem.samples.size() != mix.samples.size()) {
        throw ServiceError(400, "stem " + std::to_string(i) + " length differs from the mix");
      }
      mags.push_back(magnitude(stft(stem, config_.stft)));
      if (i < labels.size()) {
        names.push_back(labels[i]);
      } else if (!stems[i].filename.empty()) {
        const auto dot = stems[i].filename.find_last_of('.');
        names.push_back(stems[i].filename.substr(0, dot));
      } else {
        names.push_back("source" + std::to_string(i));
      }
    }
    set = ideal_binary_masks(mags, names);
  }

  if (config_.smoothing) {
    for (auto& m : set.masks) {
      if (m.kind == MaskKind::Binary || m.kind == MaskKind::External) m = smooth_zlbm(m, config_.alpha);
    }
  }

  auto session = std::make_shared<Session>(new_id(), std::move(mix), std::move(spec),
                                           std::make_shared<const MaskSet>(std::move(set)));
  SessionSummary summary = session->summary();
  std::unique_lock lock(mutex_);
  sessions_.emplace(session->id(), std::move(session));
  return summary;
}

std::shared_ptr<Session> SessionStore::find(const std::string& id) {
  std::shared_lock lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ServiceError(404, "unknown session " + id);
  it->second->touch();
  return it->second;
}

AudioClip SessionStore::render_clip(const std::string& id, const std::vector<double>& sliders, RenderMode mode) {
  auto session = find(id);
  if (sliders.size() != session->masks()->size()) {
    throw ServiceError(422, "expected " + std::to_string(session->masks()->size()) + " gains, got " +
                                std::to_string(sliders.size()));
  }
  RemixSpec spec;
  try {
    spec.gains = sliders_to_gains(sliders);
  } catch (const Error& e) {
    throw ServiceError(422, e.what());
  }
  spec.mask_set = session->masks();
  AudioClip out = mode == RenderMode::Remix ? remix_spectrogram(session->spectrogram(), spec).clip
                                            : separate_and_add(session->spectrogram(), spec);
  session->set_last_gains(sliders);
  return out;
}

std::vector<std::uint8_t> SessionStore::render(const std::string& id, const std::vector<double>& sliders,
                                               RenderMode mode) {
  return encode_wav(render_clip(id, sliders, mode), WavFormat::Float32);
}

nlohmann::ordered_json SessionStore::describe(const std::string& id) {
  auto session = find(id);
  const SessionSummary s = session->summary();
  nlohmann::ordered_json j;
  j["id"] = s.id;
  j["labels"] = s.labels;
  j["duration_s"] = s.duration_s;
  j["bins"] = s.bins;
  j["frames"] = s.frames;
  j["sample_rate"] = session->mix().sample_rate;
  const auto created = std::chrono::duration_cast<std::chrono::seconds>(session->created_at().time_since_epoch());
  j["created_at"] = created.count();
  const auto gains = session->last_gains();
  j["last_gains"] = gains ? nlohmann::ordered_json(*gains) : nlohmann::ordered_json();
  j["thumbnail"] = magnitude_thumbnail(session->spectrogram());
  return j;
}

void SessionStore::remove(const std::string& id) {
  std::unique_lock lock(mutex_);
  if (sessions_.erase(id) == 0) throw ServiceError(404, "unknown session " + id);
}

std::size_t SessionStore::evict_idle() {
  const auto now = std::chrono::steady_clock::now();
  std::unique_lock lock(mutex_);
  std::size_t n = 0;
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    if (now - it->second->last_access() > config_.idle_ttl) {
      it = sessions_.erase(it);
      ++n;
    } else {
      ++it;
    }
  }
  return n;
}

std::size_t SessionStore::size() const {
  std::shared_lock lock(mutex_);
  return sessions_.size();
}

std::vector<std::vector<double>> magnitude_thumbnail(const ComplexSpectrogram& spec, std::size_t max_dim) {
  const std::size_t bins = spec.bins();
  const std::size_t frames = spec.frames();
  const std::size_t rows = std::min(bins, max_dim);
  const std::size_t cols = std::min(frames, max_dim);
  std::vector<std::vector<double>> out(rows, std::vector<double>(cols, 0.0));
  for (std::size_t b = 0; b < bins; ++b) {
    const std::size_t r = b * rows / bins;
    for (std::size_t t = 0; t < frames; ++t) {
      const std::size_t c = t * cols / frames;
      const double m = std::abs(spec.data(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(t)));
      out[r][c] = std::max(out[r][c], m);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

struct RemixServer::Impl {
  SessionStore& store;
  ServerOptions options;
  httplib::Server server;

  Impl(SessionStore& s, ServerOptions o) : store(s), options(std::move(o)) {}

  void error_response(httplib::Response& res, int status, const std::string& message) {
    res.status = status;
    res.set_content(nlohmann::json{{"error", message}, {"status", status}}.dump(), "application/json");
  }

  template <typename Fn>
  void guarded(httplib::Response& res, Fn&& fn) {
    try {
      fn();
    } catch (const ServiceError& e) {
      error_response(res, e.status(), e.what());
    } catch (const Error& e) {
      error_response(res, e.code() == Errc::DimensionMismatch ? 400 : 500, e.what());
    } catch (const std::exception& e) {
      error_response(res, 500, e.what());
    }
  }

  void routes() {
    const std::string origin = store.config().cors_origin;
    server.set_default_headers({{"Access-Control-Allow-Origin", origin},
                                {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        if (!req.is_multipart_form_data()) throw ServiceError(400, "expected multipart/form-data");
        if (!req.has_file("mix")) throw ServiceError(400, "missing 'mix' part");
        const auto mix = req.get_file_value("mix");
        std::optional<UploadedFile> masks;
        if (req.has_file("masks")) {
          const auto m = req.get_file_value("masks");
          masks = UploadedFile{m.filename, std::vector<std::uint8_t>(m.content.begin(), m.content.end())};
        }
        std::vector<UploadedFile> stems;
        for (const auto& s : req.get_file_values("stems")) {
          stems.push_back(UploadedFile{s.filename, std::vector<std::uint8_t>(s.content.begin(), s.content.end())});
        }
        std::vector<std::string> labels;
        if (req.has_file("labels")) {
          const std::string text = req.get_file_value("labels").content;
          std::size_t start = 0;
          while (start <= text.size()) {
            const std::size_t comma = text.find(',', start);
            const std::string item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
            if (!item.empty()) labels.push_back(item);
            if (comma == std::string::npos) break;
            start = comma + 1;
          }
        }
        const std::span<const std::uint8_t> mix_bytes(reinterpret_cast<const std::uint8_t*>(mix.content.data()),
                                                      mix.content.size());
        const SessionSummary s = store.create(mix_bytes, masks, stems, labels);
        res.status = 201;
        res.set_content(nlohmann::ordered_json{{"id", s.id},
                                               {"labels", s.labels},
                                               {"duration_s", s.duration_s},
                                               {"bins", s.bins},
                                               {"frames", s.frames}}
                            .dump(),
                        "application/json");
      });
    });

    server.Get(R"(/sessions/([0-9a-f]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { res.set_content(store.describe(req.matches[1]).dump(), "application/json"); });
    });

    server.Delete(R"(/sessions/([0-9a-f]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        store.remove(req.matches[1]);
        res.status = 204;
      });
    });

    server.Post(R"(/sessions/([0-9a-f]+)/remix)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        nlohmann::json body;
        try {
          body = nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::exception& e) {
          throw ServiceError(400, std::string("invalid JSON: ") + e.what());
        }
        if (!body.is_object() || !body.contains("gains") || !body["gains"].is_array()) {
          throw ServiceError(422, "body must be {\"gains\": [...]}");
        }
        std::vector<double> gains;
        for (const auto& g : body["gains"]) {
          if (!g.is_number()) throw ServiceError(422, "gains must be numbers");
          gains.push_back(g.get<double>());
        }
        RenderMode mode = RenderMode::Remix;
        if (body.contains("mode")) {
          const std::string m = body["mode"].is_string() ? body["mode"].get<std::string>() : "";
          if (m == "separate_and_add") {
            mode = RenderMode::SeparateAndAdd;
          } else if (m != "remix") {
            throw ServiceError(422, "mode must be 'remix' or 'separate_and_add'");
          }
        }
        const auto wav = store.render(req.matches[1], gains, mode);
        res.set_content(std::string(wav.begin(), wav.end()), "audio/wav");
      });
    });

    if (!options.static_dir.empty()) server.set_mount_point("/", options.static_dir);
  }
};

RemixServer::RemixServer(SessionStore& store, ServerOptions options)
    : impl_(std::make_unique<Impl>(store, std::move(options))) {
  impl_->routes();
}

RemixServer::~RemixServer() { stop(); }

int RemixServer::bind() {
  if (impl_->options.port == 0) {
    const int port = impl_->server.bind_to_any_port(impl_->options.host);
    impl_->options.port = port;
    return port;
  }
  return impl_->server.bind_to_port(impl_->options.host, impl_->options.port) ? impl_->options.port : -1;
}

bool RemixServer::listen() { return impl_->server.listen_after_bind(); }

void RemixServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace vamix
