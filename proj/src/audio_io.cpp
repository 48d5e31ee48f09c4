#include "vamix/audio_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "vamix/error.hpp"

namespace vamix {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t position() const { return pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) throw Error(Errc::MalformedFile, std::string("truncated ") + what);
  }
  std::uint16_t u16() {
    need(2, "u16");
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4, "u32");
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | bytes_[pos_ + i];
    pos_ += 4;
    return v;
  }
  std::string tag() {
    need(4, "chunk id");
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), 4);
    pos_ += 4;
    return s;
  }
  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  void skip(std::size_t n) { pos_ += std::min(n, remaining()); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

struct FmtChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t block_align = 0;
  std::uint16_t bits = 0;
};

FmtChunk parse_fmt(std::span<const std::uint8_t> body) {
  ByteReader r(body);
  FmtChunk f;
  f.format = r.u16();
  f.channels = r.u16();
  f.sample_rate = r.u32();
  r.u32();  // byte rate
  f.block_align = r.u16();
  f.bits = r.u16();
  if (f.format == kFormatExtensible) {
    if (r.remaining() < 2 + 22) throw Error(Errc::MalformedFile, "short extensible fmt chunk");
    r.u16();  // cbSize
    r.u16();  // valid bits
    r.u32();  // channel mask
    f.format = r.u16();  // first two bytes of the subformat GUID
  }
  return f;
}

double decode_sample(const std::uint8_t* p, const FmtChunk& fmt) {
  if (fmt.format == kFormatFloat) {
    if (fmt.bits == 32) {
      std::uint32_t raw = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                          (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
      return static_cast<double>(std::bit_cast<float>(raw));
    }
    std::uint64_t raw = 0;
    for (int i = 7; i >= 0; --i) raw = (raw << 8) | p[i];
    return std::bit_cast<double>(raw);
  }
  switch (fmt.bits) {
    case 16: {
      auto v = static_cast<std::int16_t>(p[0] | (p[1] << 8));
      return v / 32768.0;
    }
    case 24: {
      std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
      if (v & 0x800000) v -= 0x1000000;
      return v / 8388608.0;
    }
    case 32: {
      auto v = static_cast<std::int32_t>(static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                                         (static_cast<std::uint32_t>(p[2]) << 16) |
                                         (static_cast<std::uint32_t>(p[3]) << 24));
      return v / 2147483648.0;
    }
  }
  return 0.0;
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

}  // namespace

void validate_clip(const AudioClip& clip) {
  if (clip.sample_rate <= 0) throw Error(Errc::InvalidClip, "sample rate must be positive");
  for (std::size_t i = 0; i < clip.samples.size(); ++i) {
    if (!std::isfinite(clip.samples[i])) {
      throw Error(Errc::InvalidClip, "non-finite sample at index " + std::to_string(i));
    }
  }
}

AudioClip decode_wav(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.remaining() < 12) throw Error(Errc::MalformedFile, "file shorter than RIFF header");
  if (r.tag() != "RIFF") throw Error(Errc::MalformedFile, "missing RIFF magic");
  r.u32();
  if (r.tag() != "WAVE") throw Error(Errc::MalformedFile, "missing WAVE form type");

  std::optional<FmtChunk> fmt;
  std::optional<std::span<const std::uint8_t>> data;
  while (r.remaining() >= 8) {
    std::string id = r.tag();
    std::uint32_t size = r.u32();
    if (id == "fmt ") {
      fmt = parse_fmt(r.take(size, "fmt chunk"));
    } else if (id == "data") {
      data = r.take(size, "data chunk");
    } else {
      r.skip(size);
    }
    if (size % 2 == 1) r.skip(1);
  }
  if (!fmt) throw Error(Errc::MalformedFile, "no fmt chunk");
  if (!data) throw Error(Errc::MalformedFile, "no data chunk");

  const bool pcm_ok = fmt->format == kFormatPcm && (fmt->bits == 16 || fmt->bits == 24 || fmt->bits == 32);
  const bool float_ok = fmt->format == kFormatFloat && (fmt->bits == 32 || fmt->bits == 64);
  if (!pcm_ok && !float_ok) {
    throw Error(Errc::UnsupportedFormat, "format code " + std::to_string(fmt->format) + " with " +
                                             std::to_string(fmt->bits) + " bits");
  }
  if (fmt->channels == 0) throw Error(Errc::MalformedFile, "zero channels");
  if (fmt->sample_rate == 0) throw Error(Errc::MalformedFile, "zero sample rate");
  const std::size_t bytes_per_sample = fmt->bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * fmt->channels;
  if (data->size() % frame_bytes != 0) throw Error(Errc::MalformedFile, "data chunk is not a whole number of frames");

  const std::size_t frames = data->size() / frame_bytes;
  AudioClip clip;
  clip.sample_rate = static_cast<int>(fmt->sample_rate);
  clip.samples.resize(frames);
  const std::uint8_t* p = data->data();
  for (std::size_t i = 0; i < frames; ++i) {
    double sum = 0.0;
    for (std::uint16_t c = 0; c < fmt->channels; ++c) {
      sum += decode_sample(p, *fmt);
      p += bytes_per_sample;
    }
    clip.samples[i] = fmt->channels == 1 ? sum : sum / fmt->channels;
  }
  for (double s : clip.samples) {
    if (!std::isfinite(s)) throw Error(Errc::MalformedFile, "non-finite float sample");
  }
  return clip;
}

std::vector<std::uint8_t> encode_wav(const AudioClip& clip, WavFormat format) {
  validate_clip(clip);
  const std::uint16_t bits = format == WavFormat::Pcm16 ? 16 : 32;
  const std::uint16_t code = format == WavFormat::Pcm16 ? kFormatPcm : kFormatFloat;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(clip.samples.size() * (bits / 8));

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, code);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * (bits / 8));
  put_u16(out, bits / 8);
  put_u16(out, bits);
  put_tag(out, "data");
  put_u32(out, data_bytes);

  for (double s : clip.samples) {
    if (format == WavFormat::Pcm16) {
      double scaled = std::nearbyint(s * 32768.0);
      auto v = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
      put_u16(out, static_cast<std::uint16_t>(v));
    } else {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(s)));
    }
  }
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

AudioClip read_wav(const std::filesystem::path& path) {
  auto bytes = read_file_bytes(path);
  AudioClip clip = decode_wav(bytes);
  clip.source_path = path.string();
  return clip;
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip, WavFormat format) {
  write_file_bytes(path, encode_wav(clip, format));
}

}  // namespace vamix
