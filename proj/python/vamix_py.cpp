#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "vamix/audio_io.hpp"
#include "vamix/error.hpp"
#include "vamix/eval.hpp"
#include "vamix/harness.hpp"
#include "vamix/masking.hpp"
#include "vamix/remix.hpp"
#include "vamix/spectral.hpp"

namespace py = pybind11;
using namespace vamix;

namespace {

using Samples = py::array_t<double, py::array::c_style | py::array::forcecast>;

AudioClip to_clip(const Samples& x, int sample_rate) {
  if (x.ndim() != 1) throw py::value_error("expected a 1-D sample array");
  AudioClip c;
  c.samples.assign(x.data(), x.data() + x.size());
  c.sample_rate = sample_rate;
  return c;
}

py::array_t<double> to_array(const AudioClip& c) { return py::array_t<double>(c.samples.size(), c.samples.data()); }

std::vector<AudioClip> to_clips(const std::vector<Samples>& xs, int sample_rate) {
  std::vector<AudioClip> out;
  for (const auto& x : xs) out.push_back(to_clip(x, sample_rate));
  return out;
}

std::vector<MagnitudeSpectrogram> stem_mags(const std::vector<Samples>& stems, const StftParams& params) {
  std::vector<MagnitudeSpectrogram> mags;
  for (const auto& s : stems) mags.push_back(magnitude(stft(to_clip(s, params.sample_rate), params)));
  return mags;
}

WavFormat parse_format(const std::string& f) {
  if (f == "f32") return WavFormat::Float32;
  if (f == "pcm16") return WavFormat::Pcm16;
  throw py::value_error("format must be 'f32' or 'pcm16'");
}

py::dict metrics_dict(const SourceMetrics& m) {
  auto opt = [](const std::optional<double>& v) -> py::object { return v ? py::object(py::float_(*v)) : py::object(py::none()); };
  py::dict d;
  d["label"] = m.label;
  d["sdr"] = opt(m.sdr);
  d["sir"] = opt(m.sir);
  d["sar"] = opt(m.sar);
  d["nsdr"] = opt(m.nsdr);
  return d;
}

}  // namespace

PYBIND11_MODULE(_vamix, m) {
  m.doc() = "Time-frequency mask remixing engine";

  py::register_exception<Error>(m, "VamixError", PyExc_ValueError);

  m.attr("DEFAULT_ALPHA") = kDefaultSmoothingAlpha;
  m.attr("SAMPLE_RATE") = kEngineSampleRate;

  py::class_<StftParams>(m, "StftParams")
      .def(py::init<>())
      .def_readwrite("window_size", &StftParams::window_size)
      .def_readwrite("hop", &StftParams::hop)
      .def_readwrite("fft_size", &StftParams::fft_size)
      .def_readwrite("sample_rate", &StftParams::sample_rate)
      .def_readwrite("center_pad", &StftParams::center_pad)
      .def_property_readonly("bins", &StftParams::bins)
      .def("frames_for", &StftParams::frames_for)
      .def("__eq__", [](const StftParams& a, const StftParams& b) { return a == b; });

  py::enum_<MaskKind>(m, "MaskKind")
      .value("BINARY", MaskKind::Binary)
      .value("RATIO", MaskKind::Ratio)
      .value("SMOOTHED", MaskKind::Smoothed)
      .value("EXTERNAL", MaskKind::External);

  py::class_<Mask>(m, "Mask")
      .def(py::init([](RealMatrix data, MaskKind kind, std::string label) {
             Mask mask{std::move(data), kind, std::move(label)};
             validate_mask(mask);
             return mask;
           }),
           py::arg("data"), py::arg("kind") = MaskKind::External, py::arg("label") = "")
      .def_readwrite("data", &Mask::data)
      .def_readwrite("kind", &Mask::kind)
      .def_readwrite("label", &Mask::source_label)
      .def_property_readonly("shape", [](const Mask& k) { return py::make_tuple(k.bins(), k.frames()); });

  py::class_<MaskSet>(m, "MaskSet")
      .def(py::init([](std::vector<Mask> masks, const StftParams& params) {
             MaskSet set{std::move(masks), params};
             set.validate();
             return set;
           }),
           py::arg("masks"), py::arg("params") = StftParams{})
      .def_readwrite("masks", &MaskSet::masks)
      .def_readwrite("params", &MaskSet::stft_params)
      .def("labels", &MaskSet::labels)
      .def("__len__", &MaskSet::size)
      .def("__getitem__", [](const MaskSet& s, std::size_t i) {
        if (i >= s.size()) throw py::index_error();
        return s.masks[i];
      });

  // audio
  m.def(
      "read_wav",
      [](const std::filesystem::path& path) {
        const AudioClip c = read_wav(path);
        return py::make_tuple(to_array(c), c.sample_rate);
      },
      py::arg("path"), "Returns (mono samples, sample_rate).");
  m.def(
      "write_wav",
      [](const std::filesystem::path& path, const Samples& x, int sample_rate, const std::string& format) {
        write_wav(path, to_clip(x, sample_rate), parse_format(format));
      },
      py::arg("path"), py::arg("samples"), py::arg("sample_rate") = kEngineSampleRate, py::arg("format") = "f32");

  // spectral
  m.def(
      "stft", [](const Samples& x, const StftParams& p) { return stft(to_clip(x, p.sample_rate), p).data; },
      py::arg("samples"), py::arg("params") = StftParams{}, "Complex spectrogram, bins x frames.");
  m.def(
      "istft",
      [](const ComplexMatrix& data, std::size_t length, const StftParams& p) {
        ComplexSpectrogram spec;
        spec.data = data;
        spec.params = p;
        spec.original_length = length;
        return to_array(istft(spec, length));
      },
      py::arg("spec"), py::arg("length"), py::arg("params") = StftParams{});

  // masks
  m.def(
      "ideal_binary_masks",
      [](const std::vector<Samples>& stems, const std::vector<std::string>& labels, const StftParams& p) {
        return ideal_binary_masks(stem_mags(stems, p), labels);
      },
      py::arg("stems"), py::arg("labels") = std::vector<std::string>{}, py::arg("params") = StftParams{});
  m.def(
      "ideal_ratio_masks",
      [](const std::vector<Samples>& stems, const std::vector<std::string>& labels, const StftParams& p) {
        return ideal_ratio_masks(stem_mags(stems, p), labels);
      },
      py::arg("stems"), py::arg("labels") = std::vector<std::string>{}, py::arg("params") = StftParams{});
  m.def("random_binary_mask", &random_binary_mask, py::arg("bins"), py::arg("frames"), py::arg("seed"),
        py::arg("density") = 0.5);
  m.def("corrupt_binary_mask", &corrupt_binary_mask, py::arg("mask"), py::arg("rho"), py::arg("seed"));
  m.def("smooth_zlbm", py::overload_cast<const Mask&, double>(&smooth_zlbm), py::arg("mask"),
        py::arg("alpha") = kDefaultSmoothingAlpha);
  m.def("smooth_zlbm", py::overload_cast<const MaskSet&, double>(&smooth_zlbm), py::arg("masks"),
        py::arg("alpha") = kDefaultSmoothingAlpha);
  m.def("smooth_cbm", py::overload_cast<const Mask&, std::size_t, double>(&smooth_cbm), py::arg("mask"),
        py::arg("cutoff"), py::arg("floor_db") = -80.0);
  m.def("smooth_cbm", py::overload_cast<const MaskSet&, std::size_t, double>(&smooth_cbm), py::arg("masks"),
        py::arg("cutoff"), py::arg("floor_db") = -80.0);
  m.def("read_mask_set", &read_mask_set, py::arg("path"));
  m.def("write_mask_set", &write_mask_set, py::arg("path"), py::arg("masks"));

  // remix
  m.def("slider_to_gain", &slider_to_gain, py::arg("v"));
  m.def(
      "remix",
      [](const Samples& mix, const MaskSet& masks, std::vector<double> gains) {
        const AudioClip clip = to_clip(mix, masks.stft_params.sample_rate);
        return to_array(remix(clip, make_remix_spec(masks, std::move(gains)), masks.stft_params));
      },
      py::arg("mix"), py::arg("masks"), py::arg("gains"), "Gains are raw s values in [-1, 1].");
  m.def(
      "separate_and_add",
      [](const Samples& mix, const MaskSet& masks, std::vector<double> gains) {
        const AudioClip clip = to_clip(mix, masks.stft_params.sample_rate);
        return to_array(separate_and_add(clip, make_remix_spec(masks, std::move(gains)), masks.stft_params));
      },
      py::arg("mix"), py::arg("masks"), py::arg("gains"));
  m.def(
      "separate_source",
      [](const Samples& mix, const Mask& mask, const StftParams& p) {
        return to_array(separate_source(to_clip(mix, p.sample_rate), mask, p));
      },
      py::arg("mix"), py::arg("mask"), py::arg("params") = StftParams{});

  // evaluation
  m.def(
      "bss_eval",
      [](const std::vector<Samples>& estimates, const std::vector<Samples>& references, std::size_t filter_len,
         std::optional<Samples> mixture) {
        const auto est = to_clips(estimates, kEngineSampleRate);
        const auto ref = to_clips(references, kEngineSampleRate);
        std::optional<AudioClip> mix;
        if (mixture) mix = to_clip(*mixture, kEngineSampleRate);
        const EvalReport r = bss_eval(est, ref, filter_len, mix ? &*mix : nullptr);
        py::list out;
        for (const auto& s : r.sources) out.append(metrics_dict(s));
        return out;
      },
      py::arg("estimates"), py::arg("references"), py::arg("filter_len") = kDefaultFilterLen,
      py::arg("mixture") = py::none());
  m.def(
      "sdr",
      [](const Samples& est, const Samples& ref, std::size_t filter_len) {
        return sdr_single(to_clip(est, kEngineSampleRate), to_clip(ref, kEngineSampleRate), filter_len);
      },
      py::arg("estimate"), py::arg("reference"), py::arg("filter_len") = kDefaultFilterLen);
  m.def(
      "smoothing_gain",
      [](const Samples& ref, const Samples& bin, const Samples& smooth) {
        return smoothing_gain(to_clip(ref, kEngineSampleRate), to_clip(bin, kEngineSampleRate),
                              to_clip(smooth, kEngineSampleRate));
      },
      py::arg("reference"), py::arg("binary_recon"), py::arg("smoothed_recon"));
  m.def(
      "snr_to_reference",
      [](const Samples& test, const Samples& ref) {
        return snr_to_reference(to_clip(test, kEngineSampleRate), to_clip(ref, kEngineSampleRate));
      },
      py::arg("test"), py::arg("reference"));

  // synthetic material
  m.def(
      "synthetic_pair",
      [](std::size_t length, std::uint64_t seed) {
        const StemPair p = synthetic_pairs(1, seed, length).front();
        return py::make_tuple(to_array(p.stem_a), to_array(p.stem_b), to_array(p.mixture));
      },
      py::arg("length") = kSegmentLength, py::arg("seed") = 0, "Returns (stem_a, stem_b, mixture).");
}
