#include <doctest.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "test_support.hpp"
#include "vamix/cli.hpp"
#include "vamix/masking.hpp"

using namespace vamix;
using namespace vamix::testing;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

struct Workspace {
  TempDir dir;
  std::string a, b, mix;

  Workspace() {
    AudioClip sa = sine_clip(30000, 400.0, 0.3), sb = noise_clip(30000, 4, 0.2);
    AudioClip m = sa;
    for (std::size_t i = 0; i < m.samples.size(); ++i) m.samples[i] += sb.samples[i];
    a = (dir / "a.wav").string();
    b = (dir / "b.wav").string();
    mix = (dir / "mix.wav").string();
    write_wav(a, sa, WavFormat::Float32);
    write_wav(b, sb, WavFormat::Float32);
    write_wav(mix, m, WavFormat::Float32);
  }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(run({}).code == 1);
  CHECK(run({"frobnicate"}).code == 1);
  auto r = run({"remix", "--mix", "x.wav"});
  CHECK(r.code == 1);
  CHECK(r.err.find("--masks") != std::string::npos);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("processing errors exit with 2") {
  Workspace w;
  auto r = run({"remix", "--mix", w.path("missing.wav"), "--masks", w.path("m.tfmk"), "--gains", "0,0", "-o",
                w.path("o.wav")});
  CHECK(r.code == 2);
  CHECK(r.err.find("IoError") != std::string::npos);
}

TEST_CASE("masks, remix, separate and eval end to end") {
  Workspace w;
  REQUIRE(run({"masks", "ibm", "--stems", w.a, w.b, "--labels", "tone,noise", "-o", w.path("ibm.tfmk")}).code == 0);
  auto set = read_mask_set(w.path("ibm.tfmk"));
  CHECK(set.labels() == std::vector<std::string>{"tone", "noise"});

  REQUIRE(run({"remix", "--mix", w.mix, "--masks", w.path("ibm.tfmk"), "--gains", "0,0", "--no-smooth", "-o",
               w.path("same.wav")})
              .code == 0);
  auto same = read_wav(w.path("same.wav"));
  CHECK(rel_l2(same.samples, read_wav(w.mix).samples) < 1e-6);

  REQUIRE(run({"remix", "--mix", w.mix, "--masks", w.path("ibm.tfmk"), "--volumes", "0.5,0", "--format", "pcm16",
               "-o", w.path("tone.wav")})
              .code == 0);
  CHECK(read_wav(w.path("tone.wav")).samples.size() == 30000);

  REQUIRE(run({"separate", "--mix", w.mix, "--masks", w.path("ibm.tfmk"), "-o", w.path("parts")}).code == 0);
  CHECK(std::filesystem::exists(w.dir / "parts" / "tone.wav"));
  CHECK(std::filesystem::exists(w.dir / "parts" / "noise.wav"));
  REQUIRE(run({"separate", "--mix", w.mix, "--masks", w.path("ibm.tfmk"), "--source", "1", "-o", w.path("n.wav")})
              .code == 0);
  CHECK(run({"separate", "--mix", w.mix, "--masks", w.path("ibm.tfmk"), "--source", "drums", "-o",
             w.path("d.wav")})
            .code == 1);

  auto e = run({"eval", "--mix", w.mix, "--masks", w.path("ibm.tfmk"), "--refs", w.a, w.b, "--filter-len", "32"});
  REQUIRE(e.code == 0);
  std::istringstream lines(e.out);
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    auto j = nlohmann::json::parse(line);
    CHECK(j["sdr"].is_number());
    CHECK(j["config"]["filter_len"] == 32);
    ++n;
  }
  CHECK(n == 2);
}

TEST_CASE("mask subcommands: irm, rbm, smooth") {
  Workspace w;
  REQUIRE(run({"masks", "irm", "--stems", w.a, w.b, "-o", w.path("irm.tfmk")}).code == 0);
  CHECK(read_mask_set(w.path("irm.tfmk")).masks[0].kind == MaskKind::Ratio);
  REQUIRE(run({"masks", "rbm", "--mix", w.mix, "--sources", "3", "--seed", "7", "-o", w.path("rbm.tfmk")}).code == 0);
  CHECK(read_mask_set(w.path("rbm.tfmk")).size() == 3);
  REQUIRE(run({"masks", "smooth", "--in", w.path("rbm.tfmk"), "--method", "zlbm", "--alpha", "0.4", "-o",
               w.path("z.tfmk")})
              .code == 0);
  CHECK(read_mask_set(w.path("z.tfmk")).masks[0].kind == MaskKind::Smoothed);
  REQUIRE(run({"masks", "smooth", "--in", w.path("rbm.tfmk"), "--method", "cbm", "--cutoff", "20", "-o",
               w.path("c.tfmk")})
              .code == 0);
  // ratio masks cannot be smoothed
  CHECK(run({"masks", "smooth", "--in", w.path("irm.tfmk"), "-o", w.path("x.tfmk")}).code == 2);
}

TEST_CASE("mask grid must match the mixture") {
  Workspace w;
  AudioClip short_mix = noise_clip(10000, 1);
  write_wav(w.path("short.wav"), short_mix, WavFormat::Float32);
  REQUIRE(run({"masks", "ibm", "--stems", w.a, w.b, "-o", w.path("ibm.tfmk")}).code == 0);
  auto r = run({"remix", "--mix", w.path("short.wav"), "--masks", w.path("ibm.tfmk"), "--gains", "0,0", "-o",
                w.path("o.wav")});
  CHECK(r.code == 2);
  CHECK(r.err.find("DimensionMismatch") != std::string::npos);
}

TEST_CASE("config file supplies defaults that flags override") {
  Workspace w;
  {
    std::ofstream c(w.path("cfg.json"));
    c << R"({"grid":[0.0,0.5],"rho":0.1,"no-smooth":true,"seed":3})";
  }
  auto expanded = expand_config({"sweep", "--config", w.path("cfg.json"), "--seed", "9"});
  CHECK(std::count(expanded.begin(), expanded.end(), "--seed") == 1);
  CHECK(std::find(expanded.begin(), expanded.end(), "9") != expanded.end());
  CHECK(std::find(expanded.begin(), expanded.end(), "--no-smooth") != expanded.end());
  CHECK(std::find(expanded.begin(), expanded.end(), "0.5") != expanded.end());

  auto r = run({"sweep", "--synthetic", "1", "--segment", "30000", "--config", w.path("cfg.json")});
  REQUIRE(r.code == 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 5);
}

TEST_CASE("experiment commands write reports") {
  Workspace w;
  auto b = run({"bounds", "--stems", w.a, w.b, "--filter-len", "16", "--json", w.path("b.json")});
  REQUIRE(b.code == 0);
  CHECK(b.out.rfind("metric,IBM,RBM", 0) == 0);
  CHECK(std::filesystem::exists(w.path("b.json")));
  auto t = run({"tune", "--stems", w.a, w.b, "--grid", "0,0.5", "-o", w.path("t.json")});
  REQUIRE(t.code == 0);
  std::ifstream in(w.path("t.json"));
  auto j = nlohmann::json::parse(in);
  CHECK(j["points"].size() == 2);
  CHECK(run({"tune", "--stems", w.a, w.b, "--synthetic", "2"}).code == 1);
}
