#include "vamix/cli.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>

#include "vamix/error.hpp"
#include "vamix/harness.hpp"
#include "vamix/remix.hpp"
#include "vamix/service.hpp"

namespace vamix {
namespace {

namespace fs = std::filesystem;

WavFormat parse_format(const std::string& s) { return s == "pcm16" ? WavFormat::Pcm16 : WavFormat::Float32; }

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::string> stem_labels(const std::vector<std::string>& files, const std::vector<std::string>& labels) {
  if (!labels.empty()) {
    if (labels.size() != files.size()) throw Error(Errc::InvalidParams, "--labels count must match the stems");
    return labels;
  }
  std::vector<std::string> out;
  for (const auto& f : files) out.push_back(fs::path(f).stem().string());
  return out;
}

MaskSet maybe_smooth(MaskSet set, bool smooth, double alpha) {
  if (!smooth) return set;
  for (auto& m : set.masks) {
    if (m.kind == MaskKind::Binary || m.kind == MaskKind::External) m = smooth_zlbm(m, alpha);
  }
  return set;
}

MaskSet load_masks_for(const std::string& path, const ComplexSpectrogram& X) {
  MaskSet set = read_mask_set(path);
  if (set.stft_params.window_size != X.params.window_size || set.stft_params.hop != X.params.hop ||
      set.stft_params.sample_rate != X.params.sample_rate) {
    throw Error(Errc::DimensionMismatch, "mask file STFT parameters differ from the analysis parameters");
  }
  set.expect_shape(X.bins(), X.frames());
  return set;
}

struct PairSource {
  std::vector<std::string> stems;
  std::vector<std::string> labels;
  std::string manifest;
  std::size_t synthetic = 0;
  std::size_t pairs = 0;
  std::size_t segment = kSegmentLength;

  void add_options(CLI::App* app) {
    app->add_option("--stems", stems, "Stem WAV files");
    app->add_option("--labels", labels, "Labels for --stems")->delimiter(',');
    app->add_option("--manifest", manifest, "Dataset manifest JSON");
    app->add_option("--synthetic", synthetic, "Use N synthetic stem pairs");
    app->add_option("--pairs", pairs, "Number of pairs drawn from --manifest or --stems");
    app->add_option("--segment", segment, "Segment length in samples for drawn pairs");
  }

  std::vector<StemPair> load(std::uint64_t seed) const {
    const int given = (!stems.empty()) + (!manifest.empty()) + (synthetic > 0);
    if (given != 1) throw CLI::ValidationError("exactly one of --stems, --manifest, --synthetic is required");
    if (synthetic > 0) return synthetic_pairs(synthetic, seed, segment);
    if (!manifest.empty()) return pairs_from_manifest(load_manifest(manifest), pairs == 0 ? 1 : pairs, seed, segment);
    if (stems.size() < 2) throw CLI::ValidationError("--stems needs at least two files");
    const auto names = stem_labels(stems, labels);
    if (stems.size() == 2 && pairs == 0) {
      return {pair_from_stems(read_wav(stems[0]), read_wav(stems[1]), names[0], names[1])};
    }
    std::vector<ManifestEntry> entries;
    for (std::size_t i = 0; i < stems.size(); ++i) entries.push_back({stems[i], names[i], ""});
    return pairs_from_manifest(entries, pairs == 0 ? 1 : pairs, seed, segment);
  }
};

std::string json_text(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

}  // namespace

std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  auto it = std::find(args.begin(), args.end(), "--config");
  if (it == args.end() || std::next(it) == args.end()) return args;
  const std::string path = *std::next(it);
  std::vector<std::string> out(args.begin(), it);
  out.insert(out.end(), std::next(it, 2), args.end());

  std::ifstream in(path);
  if (!in) throw CLI::ValidationError("--config", "cannot open " + path);
  nlohmann::json cfg;
  try {
    in >> cfg;
  } catch (const nlohmann::json::exception& e) {
    throw CLI::ValidationError("--config", std::string("invalid JSON: ") + e.what());
  }
  if (!cfg.is_object()) throw CLI::ValidationError("--config", "top level must be an object");
  auto scalar = [](const nlohmann::json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
  for (const auto& [key, value] : cfg.items()) {
    const std::string flag = "--" + key;
    const bool explicit_flag = std::any_of(out.begin(), out.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
    if (explicit_flag) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) out.push_back(flag);
    } else if (value.is_array()) {
      out.push_back(flag);
      for (const auto& v : value) out.push_back(scalar(v));
    } else if (!value.is_null()) {
      out.push_back(flag);
      out.push_back(scalar(value));
    }
  }
  return out;
}

int run_cli(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"vamix: time-frequency mask remixing engine"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");
  std::string config_path;
  app.add_option("--config", config_path, "JSON file with option defaults");

  // remix ------------------------------------------------------------------
  auto* remix_cmd = app.add_subcommand("remix", "Re-weight sources of a mixture through their masks");
  std::string mix_path, masks_path, output, format = "f32";
  std::vector<double> gains, volumes;
  double alpha = kDefaultSmoothingAlpha;
  bool no_smooth = false, baseline = false;
  remix_cmd->add_option("--mix", mix_path, "Mixture WAV")->required();
  remix_cmd->add_option("--masks", masks_path, "Mask set (.tfmk)")->required();
  auto* gains_opt = remix_cmd->add_option("--gains,--raw-gains", gains, "Raw gains s_i (0 = unchanged, -1 = mute)")
                        ->delimiter(',');
  auto* vol_opt = remix_cmd->add_option("--volumes", volumes, "Slider values v_i in [0,1], s = 2v - 1")->delimiter(',');
  gains_opt->excludes(vol_opt);
  remix_cmd->add_option("-o,--output", output, "Output WAV")->required();
  remix_cmd->add_option("--format", format, "Output sample format")->check(CLI::IsMember({"f32", "pcm16"}));
  remix_cmd->add_option("--alpha", alpha, "Smoothing pole for binary/external masks")->check(CLI::Range(0.0, 0.999999));
  remix_cmd->add_flag("--no-smooth", no_smooth, "Use masks as stored");
  remix_cmd->add_flag("--separate-and-add", baseline, "Render with the separate-and-add baseline instead");

  // separate ---------------------------------------------------------------
  auto* sep_cmd = app.add_subcommand("separate", "Masked reconstruction of one or all sources");
  std::string source_sel;
  std::optional<double> sep_alpha;
  sep_cmd->add_option("--mix", mix_path, "Mixture WAV")->required();
  sep_cmd->add_option("--masks", masks_path, "Mask set (.tfmk)")->required();
  sep_cmd->add_option("--source", source_sel, "Source label or index; all sources when omitted");
  sep_cmd->add_option("-o,--output", output, "Output WAV (with --source) or directory")->required();
  sep_cmd->add_option("--format", format, "Output sample format")->check(CLI::IsMember({"f32", "pcm16"}));
  sep_cmd->add_option("--alpha", sep_alpha, "Smooth binary/external masks first")->check(CLI::Range(0.0, 0.999999));

  // masks ------------------------------------------------------------------
  auto* masks_cmd = app.add_subcommand("masks", "Build or transform mask sets");
  masks_cmd->require_subcommand(1);
  std::vector<std::string> stems, labels;
  auto* ibm_cmd = masks_cmd->add_subcommand("ibm", "Ideal binary masks from stems");
  auto* irm_cmd = masks_cmd->add_subcommand("irm", "Ideal ratio masks from stems");
  for (auto* c : {ibm_cmd, irm_cmd}) {
    c->add_option("--stems", stems, "Stem WAV files")->required();
    c->add_option("--labels", labels, "Source labels")->delimiter(',');
    c->add_option("-o,--output", output, "Output mask set")->required();
  }
  auto* rbm_cmd = masks_cmd->add_subcommand("rbm", "Random binary masks");
  std::size_t n_sources = 2;
  std::uint64_t seed = 0;
  double density = 0.5;
  rbm_cmd->add_option("--mix", mix_path, "Mixture WAV (sets the grid)")->required();
  rbm_cmd->add_option("--sources", n_sources, "Number of masks")->check(CLI::PositiveNumber);
  rbm_cmd->add_option("--seed", seed, "Generator seed");
  rbm_cmd->add_option("--density", density, "Probability of a one")->check(CLI::Range(0.0, 1.0));
  rbm_cmd->add_option("--labels", labels, "Source labels")->delimiter(',');
  rbm_cmd->add_option("-o,--output", output, "Output mask set")->required();
  auto* smooth_cmd = masks_cmd->add_subcommand("smooth", "Smooth binary masks");
  std::string in_path, method = "zlbm";
  std::size_t cutoff = 20;
  double floor_db = -80.0;
  smooth_cmd->add_option("--in", in_path, "Input mask set")->required();
  smooth_cmd->add_option("--method", method, "zlbm or cbm")->check(CLI::IsMember({"zlbm", "cbm"}));
  smooth_cmd->add_option("--alpha", alpha, "ZLBM pole")->check(CLI::Range(0.0, 0.999999));
  smooth_cmd->add_option("--cutoff", cutoff, "CBM lifter cutoff (quefrency index)");
  smooth_cmd->add_option("--floor-db", floor_db, "CBM log floor in dB");
  smooth_cmd->add_option("-o,--output", output, "Output mask set")->required();

  // eval -------------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "Separate with a mask set and score against references");
  std::vector<std::string> refs;
  std::size_t filter_len = kDefaultFilterLen;
  eval_cmd->add_option("--mix", mix_path, "Mixture WAV")->required();
  eval_cmd->add_option("--masks", masks_path, "Mask set (.tfmk)")->required();
  eval_cmd->add_option("--refs", refs, "Reference stems in mask order")->required();
  eval_cmd->add_option("--filter-len", filter_len, "Distortion filter taps")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--alpha", sep_alpha, "Smooth binary/external masks first")->check(CLI::Range(0.0, 0.999999));
  eval_cmd->add_option("-o,--output", output, "JSON lines report (stdout when omitted)");

  // tune -------------------------------------------------------------------
  auto* tune_cmd = app.add_subcommand("tune", "Smoothing hyperparameter search on corrupted ideal masks");
  PairSource tune_src;
  tune_src.add_options(tune_cmd);
  std::vector<double> grid;
  double rho = kDefaultCorruption;
  tune_cmd->add_option("--method", method, "zlbm or cbm")->check(CLI::IsMember({"zlbm", "cbm"}));
  tune_cmd->add_option("--grid", grid, "Parameter values")->delimiter(',');
  tune_cmd->add_option("--rho", rho, "Fraction of bins flipped")->check(CLI::Range(0.0, 1.0));
  tune_cmd->add_option("--seed", seed, "Seed");
  tune_cmd->add_option("--floor-db", floor_db, "CBM log floor in dB");
  tune_cmd->add_option("-o,--output", output, "JSON report (stdout when omitted)");

  // sweep ------------------------------------------------------------------
  auto* sweep_cmd = app.add_subcommand("sweep", "Remix vs separate-and-add over a gain grid");
  PairSource sweep_src;
  sweep_src.add_options(sweep_cmd);
  std::string json_out;
  sweep_cmd->add_option("--alpha", alpha, "ZLBM pole")->check(CLI::Range(0.0, 0.999999));
  sweep_cmd->add_option("--grid", grid, "Gain values per source in [-1,1]")->delimiter(',');
  sweep_cmd->add_option("--rho", rho, "Fraction of bins flipped")->check(CLI::Range(0.0, 1.0));
  sweep_cmd->add_option("--seed", seed, "Seed");
  sweep_cmd->add_flag("--no-smooth", no_smooth, "Skip mask smoothing");
  sweep_cmd->add_option("-o,--output", output, "CSV grid (stdout when omitted)");
  sweep_cmd->add_option("--json", json_out, "Also write a JSON report");

  // bounds -----------------------------------------------------------------
  auto* bounds_cmd = app.add_subcommand("bounds", "IBM/RBM separation bounds table");
  PairSource bounds_src;
  bounds_src.add_options(bounds_cmd);
  bounds_cmd->add_option("--seed", seed, "Seed");
  bounds_cmd->add_option("--filter-len", filter_len, "Distortion filter taps")->check(CLI::PositiveNumber);
  bounds_cmd->add_option("-o,--output", output, "CSV table (stdout when omitted)");
  bounds_cmd->add_option("--json", json_out, "Also write a JSON report");

  // serve ------------------------------------------------------------------
  auto* serve_cmd = app.add_subcommand("serve", "HTTP remix service");
  ServerOptions server_opts;
  ServiceConfig service_cfg;
  double ttl_s = 1800.0;
  serve_cmd->add_option("--host", server_opts.host, "Bind address");
  serve_cmd->add_option("--port", server_opts.port, "Port (0 picks a free one)");
  serve_cmd->add_option("--static", server_opts.static_dir, "Directory of console assets served at /");
  serve_cmd->add_option("--alpha", alpha, "ZLBM pole applied at ingest")->check(CLI::Range(0.0, 0.999999));
  serve_cmd->add_flag("--no-smooth", no_smooth, "Keep masks unsmoothed");
  serve_cmd->add_option("--max-seconds", service_cfg.max_seconds, "Longest accepted mix");
  serve_cmd->add_option("--ttl", ttl_s, "Idle session lifetime in seconds");
  serve_cmd->add_option("--cors-origin", service_cfg.cors_origin, "Access-Control-Allow-Origin value");

  std::vector<std::string> args;
  try {
    args = expand_config(raw_args);
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "error: " << e.what() << "\n";
    CLI::App* failing = &app;
    for (CLI::App* sub = &app; sub;) {
      auto subs = sub->get_subcommands();
      if (subs.empty()) break;
      failing = subs.front();
      sub = failing;
    }
    err << failing->help();
    return 1;
  }

  const StftParams params;
  try {
    if (*remix_cmd) {
      if (gains.empty() && volumes.empty()) throw CLI::ValidationError("remix needs --gains or --volumes");
      const AudioClip mix = read_wav(mix_path);
      const ComplexSpectrogram X = stft(mix, params);
      MaskSet set = maybe_smooth(load_masks_for(masks_path, X), !no_smooth, alpha);
      RemixSpec spec = make_remix_spec(std::move(set), gains.empty() ? sliders_to_gains(volumes) : gains);
      AudioClip result;
      if (baseline) {
        result = separate_and_add(X, spec);
      } else {
        RemixResult r = remix_spectrogram(X, spec);
        if (r.clamped_bins > 0) err << "remix: clamped " << r.clamped_bins << " negative gain-field bins\n";
        result = std::move(r.clip);
      }
      write_wav(output, result, parse_format(format));
    } else if (*sep_cmd) {
      const AudioClip mix = read_wav(mix_path);
      const ComplexSpectrogram X = stft(mix, params);
      const MaskSet set = maybe_smooth(load_masks_for(masks_path, X), sep_alpha.has_value(), sep_alpha.value_or(0.0));
      if (!source_sel.empty()) {
        std::size_t idx = set.size();
        for (std::size_t i = 0; i < set.size(); ++i) {
          if (set.masks[i].source_label == source_sel) idx = i;
        }
        if (idx == set.size() && std::all_of(source_sel.begin(), source_sel.end(), ::isdigit)) idx = std::stoul(source_sel);
        if (idx >= set.size()) throw CLI::ValidationError("--source", "no source named " + source_sel);
        write_wav(output, separate_source(X, set.masks[idx]), parse_format(format));
      } else {
        fs::create_directories(output);
        for (std::size_t i = 0; i < set.size(); ++i) {
          const std::string name = set.masks[i].source_label.empty() ? "source" + std::to_string(i) : set.masks[i].source_label;
          write_wav(fs::path(output) / (name + ".wav"), separate_source(X, set.masks[i]), parse_format(format));
        }
      }
    } else if (*masks_cmd) {
      if (*ibm_cmd || *irm_cmd) {
        const auto names = stem_labels(stems, labels);
        std::vector<MagnitudeSpectrogram> mags;
        for (const auto& s : stems) mags.push_back(magnitude(stft(read_wav(s), params)));
        write_mask_set(output, *ibm_cmd ? ideal_binary_masks(mags, names) : ideal_ratio_masks(mags, names));
      } else if (*rbm_cmd) {
        const ComplexSpectrogram X = stft(read_wav(mix_path), params);
        MaskSet set{{}, params};
        for (std::size_t i = 0; i < n_sources; ++i) {
          Mask m = random_binary_mask(X.bins(), X.frames(), seed + i, density);
          m.source_label = i < labels.size() ? labels[i] : "source" + std::to_string(i);
          set.masks.push_back(std::move(m));
        }
        write_mask_set(output, set);
      } else if (*smooth_cmd) {
        MaskSet set = read_mask_set(in_path);
        write_mask_set(output, method == "zlbm" ? smooth_zlbm(set, alpha) : smooth_cbm(set, cutoff, floor_db));
      }
    } else if (*eval_cmd) {
      const AudioClip mix = read_wav(mix_path);
      const ComplexSpectrogram X = stft(mix, params);
      const MaskSet set = maybe_smooth(load_masks_for(masks_path, X), sep_alpha.has_value(), sep_alpha.value_or(0.0));
      if (refs.size() != set.size()) throw CLI::ValidationError("--refs", "need one reference per mask");
      std::vector<AudioClip> references, estimates;
      for (const auto& r : refs) references.push_back(read_wav(r));
      for (const auto& m : set.masks) estimates.push_back(separate_source(X, m));
      const auto names = set.labels();
      const EvalReport report = bss_eval(estimates, references, filter_len, &mix, names);
      nlohmann::json config{{"mix", mix_path}, {"masks", masks_path}, {"refs", refs}, {"filter_len", filter_len},
                            {"alpha", sep_alpha ? nlohmann::json(*sep_alpha) : nlohmann::json()}};
      write_text(output, eval_report_jsonl(report, fs::path(mix_path).filename().string(), config), out);
    } else if (*tune_cmd) {
      const auto pairs = tune_src.load(seed);
      const SmoothingMethod m = method == "cbm" ? SmoothingMethod::Cbm : SmoothingMethod::Zlbm;
      if (grid.empty()) {
        grid = m == SmoothingMethod::Zlbm ? std::vector<double>{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}
                                          : std::vector<double>{5, 10, 20, 40, 80, 160, 320};
      }
      TuneConfig cfg;
      cfg.rho = rho;
      cfg.seed = seed;
      cfg.cbm_floor_db = floor_db;
      write_text(output, json_text(tune_report_json(tune_smoothing(pairs, m, grid, cfg))), out);
    } else if (*sweep_cmd) {
      const auto pairs = sweep_src.load(seed);
      if (grid.empty()) grid = {-1.0, -0.5, 0.0, 0.5, 1.0};
      SweepConfig cfg;
      cfg.alpha = alpha;
      cfg.smoothing = !no_smooth;
      cfg.rho = rho;
      cfg.seed = seed;
      const SweepReport report = sweep_gains(pairs.front(), grid, cfg);
      write_text(output, sweep_csv(report), out);
      if (!json_out.empty()) write_text(json_out, json_text(sweep_report_json(report)), out);
    } else if (*bounds_cmd) {
      const auto pairs = bounds_src.load(seed);
      BenchConfig cfg;
      cfg.seed = seed;
      cfg.filter_len = filter_len;
      const BoundsReport report = bounds_benchmark(pairs, cfg);
      write_text(output, bounds_table_csv(report), out);
      if (!json_out.empty()) write_text(json_out, json_text(bounds_report_json(report)), out);
    } else if (*serve_cmd) {
      service_cfg.alpha = alpha;
      service_cfg.smoothing = !no_smooth;
      service_cfg.idle_ttl = std::chrono::seconds(static_cast<long long>(ttl_s));
      SessionStore store(service_cfg);
      RemixServer server(store, server_opts);
      const int port = server.bind();
      if (port < 0) throw Error(Errc::IoError, "cannot bind " + server_opts.host + ":" + std::to_string(server_opts.port));
      err << "vamix: serving on http://" << server_opts.host << ":" << port << "\n";
      if (!server.listen()) throw Error(Errc::IoError, "server stopped unexpectedly");
    }
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << "\n";
    for (CLI::App* sub : app.get_subcommands()) err << sub->help();
    return 1;
  } catch (const std::exception& e) {
    err << "vamix: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace vamix
