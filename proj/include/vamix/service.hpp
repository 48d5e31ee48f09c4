#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "vamix/remix.hpp"

namespace vamix {

/// A failure that maps directly onto an HTTP status code.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, const std::string& what) : std::runtime_error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

struct ServiceConfig {
  StftParams stft;
  double alpha = kDefaultSmoothingAlpha;
  bool smoothing = true;
  double max_seconds = 120.0;
  std::chrono::seconds idle_ttl{1800};
  std::string cors_origin = "*";
};

struct SessionSummary {
  std::string id;
  std::vector<std::string> labels;
  double duration_s = 0.0;
  std::size_t bins = 0;
  std::size_t frames = 0;
};

enum class RenderMode { Remix, SeparateAndAdd };

/// Analysed mixture and masks. Everything except the gain bookkeeping is
/// immutable after ingest, so renders may run concurrently.
class Session {
 public:
  Session(std::string id, AudioClip mix, ComplexSpectrogram spec, std::shared_ptr<const MaskSet> masks);

  const std::string& id() const noexcept { return id_; }
  const AudioClip& mix() const noexcept { return mix_; }
  const ComplexSpectrogram& spectrogram() const noexcept { return spec_; }
  const std::shared_ptr<const MaskSet>& masks() const noexcept { return masks_; }
  std::chrono::system_clock::time_point created_at() const noexcept { return created_at_; }

  std::optional<std::vector<double>> last_gains() const;
  void set_last_gains(std::vector<double> gains);
  std::chrono::steady_clock::time_point last_access() const;
  void touch();

  SessionSummary summary() const;

 private:
  std::string id_;
  AudioClip mix_;
  ComplexSpectrogram spec_;
  std::shared_ptr<const MaskSet> masks_;
  std::chrono::system_clock::time_point created_at_;
  mutable std::mutex state_mutex_;
  std::optional<std::vector<double>> last_gains_;
  std::chrono::steady_clock::time_point last_access_;
};

struct UploadedFile {
  std::string filename;
  std::vector<std::uint8_t> bytes;
};

/// Concurrent session map with the create/render/get/delete operations the
/// HTTP layer exposes.
class SessionStore {
 public:
  explicit SessionStore(ServiceConfig config = {});

  /// Exactly one of `masks` or `stems` must be supplied. With stems, ideal
  /// binary masks are computed; binary or external masks are smoothed when
  /// smoothing is enabled.
  SessionSummary create(std::span<const std::uint8_t> mix_wav, const std::optional<UploadedFile>& masks,
                        const std::vector<UploadedFile>& stems, const std::vector<std::string>& labels = {});

  /// Slider values v_i in [0, 1]; returns a float32 WAV image.
  std::vector<std::uint8_t> render(const std::string& id, const std::vector<double>& sliders,
                                   RenderMode mode = RenderMode::Remix);
  AudioClip render_clip(const std::string& id, const std::vector<double>& sliders, RenderMode mode = RenderMode::Remix);

  nlohmann::ordered_json describe(const std::string& id);
  void remove(const std::string& id);

  /// Drops sessions idle for longer than the configured TTL. Returns the count.
  std::size_t evict_idle();
  std::size_t size() const;
  const ServiceConfig& config() const noexcept { return config_; }

 private:
  std::shared_ptr<Session> find(const std::string& id);
  std::string new_id();

  ServiceConfig config_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, std::shared_ptr<Session>> sessions_;
  std::mutex id_mutex_;
  std::uint64_t id_counter_ = 0;
  std::uint64_t id_salt_ = 0;
};

/// Max-pooled magnitude (at most max_dim x max_dim), rows are bins.
std::vector<std::vector<double>> magnitude_thumbnail(const ComplexSpectrogram& spec, std::size_t max_dim = 128);

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;
};

/// HTTP front end for a SessionStore.
class RemixServer {
 public:
  RemixServer(SessionStore& store, ServerOptions options);
  ~RemixServer();
  RemixServer(const RemixServer&) = delete;
  RemixServer& operator=(const RemixServer&) = delete;

  /// Binds (port 0 picks a free port) and returns the bound port, or -1.
  int bind();
  /// Blocks serving requests until stop().
  bool listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace vamix
