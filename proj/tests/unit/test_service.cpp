#include <doctest.h>

#include <thread>

#include "test_support.hpp"
#include "vamix/service.hpp"

// after Eigen: resolv.h defines _res
#include <httplib.h>

using namespace vamix;
using namespace vamix::testing;

namespace {

int status_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ServiceError& e) {
    return e.status();
  }
  FAIL("expected ServiceError");
  return 0;
}

struct Material {
  AudioClip a, b, mix;
  std::vector<std::uint8_t> a_wav, b_wav, mix_wav, masks;

  explicit Material(std::size_t n = 30000) {
    a = sine_clip(n, 500.0, 0.3);
    b = noise_clip(n, 2, 0.2);
    mix = a;
    for (std::size_t i = 0; i < n; ++i) mix.samples[i] += b.samples[i];
    a_wav = encode_wav(a, WavFormat::Float32);
    b_wav = encode_wav(b, WavFormat::Float32);
    mix_wav = encode_wav(mix, WavFormat::Float32);
    std::vector<MagnitudeSpectrogram> mags{magnitude(stft(a)), magnitude(stft(b))};
    masks = encode_mask_set(ideal_binary_masks(mags, std::vector<std::string>{"tone", "noise"}));
  }
};

}  // namespace

TEST_CASE("session store create, render, describe, remove") {
  Material m;
  SessionStore store;
  auto s = store.create(m.mix_wav, UploadedFile{"m.tfmk", m.masks}, {});
  CHECK(s.labels == std::vector<std::string>{"tone", "noise"});
  CHECK(s.bins == 512);
  CHECK(store.size() == 1);

  auto unity = store.render_clip(s.id, {0.5, 0.5});
  CHECK(rel_l2(unity.samples, m.mix.samples) < 1e-6);
  auto wav = decode_wav(store.render(s.id, {0.5, 0.5}));
  CHECK(rel_l2(wav.samples, m.mix.samples) < 1e-6);

  auto d = store.describe(s.id);
  CHECK(d["last_gains"] == nlohmann::json{0.5, 0.5});
  CHECK(d["thumbnail"].size() == 128);

  store.remove(s.id);
  CHECK(store.size() == 0);
  CHECK(status_of([&] { store.describe(s.id); }) == 404);
}

TEST_CASE("stems ingest builds labelled binary masks") {
  Material m;
  SessionStore store;
  auto s = store.create(m.mix_wav, std::nullopt, {{"violin.wav", m.a_wav}, {"cello.wav", m.b_wav}});
  CHECK(s.labels == std::vector<std::string>{"violin", "cello"});
  auto x = store.create(m.mix_wav, std::nullopt, {{"", m.a_wav}, {"", m.b_wav}}, {"x", "y"});
  CHECK(x.labels == std::vector<std::string>{"x", "y"});
  CHECK(x.id != s.id);
}

TEST_CASE("ingest and render errors map to status codes") {
  Material m;
  ServiceConfig cfg;
  cfg.max_seconds = 0.5;
  SessionStore store(cfg);
  CHECK(status_of([&] { store.create(m.mix_wav, UploadedFile{"m", m.masks}, {}); }) == 413);

  SessionStore ok;
  CHECK(status_of([&] { ok.create(m.mix_wav, std::nullopt, {}); }) == 400);
  CHECK(status_of([&] { ok.create(m.mix_wav, UploadedFile{"m", m.masks}, {{"a", m.a_wav}}); }) == 400);
  std::vector<std::uint8_t> junk{1, 2, 3};
  CHECK(status_of([&] { ok.create(junk, UploadedFile{"m", m.masks}, {}); }) == 400);
  CHECK(status_of([&] { ok.create(m.mix_wav, UploadedFile{"m", junk}, {}); }) == 400);

  AudioClip other = m.mix;
  other.sample_rate = 48000;
  CHECK(status_of([&] { ok.create(encode_wav(other, WavFormat::Float32), UploadedFile{"m", m.masks}, {}); }) == 415);

  AudioClip shorter = m.mix;
  shorter.samples.resize(20000);
  CHECK(status_of([&] { ok.create(encode_wav(shorter, WavFormat::Float32), UploadedFile{"m", m.masks}, {}); }) == 400);

  auto s = ok.create(m.mix_wav, UploadedFile{"m", m.masks}, {});
  CHECK(status_of([&] { ok.render(s.id, {0.5}); }) == 422);
  CHECK(status_of([&] { ok.render(s.id, {0.5, 1.5}); }) == 422);
  CHECK(status_of([&] { ok.render("ffff", {0.5, 0.5}); }) == 404);
}

TEST_CASE("idle sessions are evicted") {
  Material m;
  ServiceConfig cfg;
  cfg.idle_ttl = std::chrono::seconds(0);
  SessionStore store(cfg);
  store.create(m.mix_wav, UploadedFile{"m", m.masks}, {});
  std::this_thread::sleep_for(std::chrono::milliseconds(5));
  CHECK(store.evict_idle() == 1);
  CHECK(store.size() == 0);
}

TEST_CASE("render reuses the stored spectrogram and stays fast on 10 s") {
  const std::size_t n = 441000;
  AudioClip a = sine_clip(n, 330.0, 0.3), b = noise_clip(n, 5, 0.2), mix = a;
  for (std::size_t i = 0; i < n; ++i) mix.samples[i] += b.samples[i];
  std::vector<MagnitudeSpectrogram> mags{magnitude(stft(a)), magnitude(stft(b))};
  SessionStore store;
  auto s = store.create(encode_wav(mix, WavFormat::Float32), UploadedFile{"m", encode_mask_set(ideal_binary_masks(mags))}, {});
  const auto before = stft_call_count();
  const auto t0 = std::chrono::steady_clock::now();
  auto wav = store.render(s.id, {0.2, 0.9});
  const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  CHECK(stft_call_count() == before);
  CHECK(ms < 500.0);
  CHECK(decode_wav(wav).samples.size() == n);
}

TEST_CASE("concurrent renders on one session agree") {
  Material m;
  SessionStore store;
  auto s = store.create(m.mix_wav, UploadedFile{"m", m.masks}, {});
  const auto expect = store.render(s.id, {0.3, 0.8});
  std::vector<std::vector<std::uint8_t>> got(8);
  std::vector<std::jthread> threads;
  for (std::size_t i = 0; i < got.size(); ++i) {
    threads.emplace_back([&, i] { got[i] = store.render(s.id, {0.3, 0.8}); });
  }
  threads.clear();
  for (const auto& g : got) CHECK(g == expect);
}

TEST_CASE("HTTP routes") {
  Material m;
  SessionStore store;
  RemixServer server(store, ServerOptions{"127.0.0.1", 0, ""});
  const int port = server.bind();
  REQUIRE(port > 0);
  std::thread loop([&] { server.listen(); });

  httplib::Client cli("127.0.0.1", port);
  httplib::MultipartFormDataItems items{
      {"mix", std::string(m.mix_wav.begin(), m.mix_wav.end()), "mix.wav", "audio/wav"},
      {"masks", std::string(m.masks.begin(), m.masks.end()), "m.tfmk", "application/octet-stream"},
      {"labels", "left,right", "", "text/plain"}};
  auto created = cli.Post("/sessions", items);
  REQUIRE(created);
  CHECK(created->status == 201);
  CHECK(created->get_header_value("Access-Control-Allow-Origin") == "*");
  auto body = nlohmann::json::parse(created->body);
  const std::string id = body["id"];
  CHECK(body["labels"] == nlohmann::json{"left", "right"});

  auto info = cli.Get("/sessions/" + id);
  REQUIRE(info);
  CHECK(info->status == 200);
  CHECK(nlohmann::json::parse(info->body)["frames"] == body["frames"]);

  auto rendered = cli.Post("/sessions/" + id + "/remix", R"({"gains":[0.5,0.5]})", "application/json");
  REQUIRE(rendered);
  CHECK(rendered->status == 200);
  CHECK(rendered->get_header_value("Content-Type") == "audio/wav");
  auto clip = decode_wav(std::span(reinterpret_cast<const std::uint8_t*>(rendered->body.data()), rendered->body.size()));
  CHECK(rel_l2(clip.samples, m.mix.samples) < 1e-6);

  auto baseline = cli.Post("/sessions/" + id + "/remix", R"({"gains":[0.5,0.5],"mode":"separate_and_add"})",
                           "application/json");
  REQUIRE(baseline);
  CHECK(baseline->status == 200);

  CHECK(cli.Post("/sessions/" + id + "/remix", R"({"gains":[0.5]})", "application/json")->status == 422);
  CHECK(cli.Post("/sessions/" + id + "/remix", "not json", "application/json")->status == 400);
  CHECK(cli.Post("/sessions/" + id + "/remix", R"({"gains":[0.5,0.5],"mode":"x"})", "application/json")->status == 422);
  CHECK(cli.Post("/sessions", "x", "text/plain")->status == 400);

  auto preflight = cli.Options("/sessions");
  REQUIRE(preflight);
  CHECK(preflight->status == 204);
  CHECK(preflight->get_header_value("Access-Control-Allow-Methods").find("POST") != std::string::npos);

  CHECK(cli.Delete("/sessions/" + id)->status == 204);
  CHECK(cli.Get("/sessions/" + id)->status == 404);
  CHECK(cli.Delete("/sessions/" + id)->status == 404);

  server.stop();
  loop.join();
}

TEST_CASE("identical uploads get distinct ids") {
  Material m;
  SessionStore store;
  auto a = store.create(m.mix_wav, UploadedFile{"m", m.masks}, {});
  auto b = store.create(m.mix_wav, UploadedFile{"m", m.masks}, {});
  CHECK(a.id != b.id);
  CHECK(store.size() == 2);
}

TEST_CASE("slider zero mutes a source") {
  Material m;
  ServiceConfig cfg;
  cfg.smoothing = false;
  SessionStore store(cfg);
  auto s = store.create(m.mix_wav, UploadedFile{"m", m.masks}, {});
  auto out = store.render_clip(s.id, {0.0, 0.5});
  auto set = decode_mask_set(m.masks);
  auto only_b = separate_source(decode_wav(m.mix_wav), set.masks[1]);  // float32 round-tripped mix
  CHECK(rel_l2(out.samples, only_b.samples) < 1e-9);
}

TEST_CASE("thumbnail of a silent mix is all zeros") {
  AudioClip silent;
  silent.samples.assign(44100, 0.0);
  auto thumb = magnitude_thumbnail(stft(silent));
  CHECK(thumb.size() == 128);
  CHECK(thumb.front().size() <= 128);
  for (const auto& row : thumb)
    for (double v : row) CHECK(v == 0.0);
}
