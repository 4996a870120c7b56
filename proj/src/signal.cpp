#include "mea/signal.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

#include "mea/seed.hpp"

namespace mea {

namespace {

int template_length(double duration_s, double sample_rate_hz) {
  return std::max(3, static_cast<int>(std::lround(duration_s * sample_rate_hz)));
}

}  // namespace

int SpikeTemplate::peak_index(double sample_rate_hz) const {
  return static_cast<int>(std::lround(0.25 * template_length(duration_s, sample_rate_hz)));
}

std::vector<float> SpikeTemplate::waveform(double sample_rate_hz) const {
  const int n = template_length(duration_s, sample_rate_hz);
  const int p = peak_index(sample_rate_hz);
  const double dt = 1.0 / sample_rate_hz;
  const double t_trough = p * dt;
  const double w_trough = duration_s / 15.0;
  const double t_rebound = 0.55 * duration_s;
  const double w_rebound = duration_s / 6.0;

  std::vector<double> raw(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double t = k * dt;
    const double a = (t - t_trough) / w_trough;
    const double b = (t - t_rebound) / w_rebound;
    raw[k] = -std::exp(-0.5 * a * a) + rebound_ratio * std::exp(-0.5 * b * b);
  }
  const double norm = amplitude_uv / std::abs(raw[p]);
  std::vector<float> out(raw.size());
  std::transform(raw.begin(), raw.end(), out.begin(),
                 [norm](double v) { return static_cast<float>(v * norm); });
  return out;
}

SynthesizedTrace synthesize_trace(const SpikeTrain& spikes, double noise_sd_uv,
                                  const SpikeTemplate& spike_template, std::uint64_t seed) {
  if (!(noise_sd_uv >= 0.0)) throw std::invalid_argument("noise standard deviation must be >= 0");
  const double fs = spikes.sample_rate_hz();
  const auto wave = spike_template.waveform(fs);
  const int peak = spike_template.peak_index(fs);
  const auto n_samples = spikes.n_samples();
  if (static_cast<std::int64_t>(wave.size()) >= n_samples)
    throw std::invalid_argument("spike waveform is not shorter than the recording");

  SynthesizedTrace out;
  auto& rec = out.recording;
  rec.samples = RawRecording::Samples::Zero(spikes.n_channels(), n_samples);
  rec.sample_rate_hz = fs;
  rec.t0_offset_s = spikes.t0_offset_s();
  out.truth.spike_template = spike_template;
  out.truth.spikes.resize(static_cast<std::size_t>(spikes.n_channels()));

  const auto len = static_cast<std::int64_t>(wave.size());
  for (int c = 0; c < spikes.n_channels(); ++c) {
    auto row = rec.samples.row(c);
    if (noise_sd_uv > 0.0) {
      std::mt19937_64 rng(derive_seed(seed, {kTagTrace, static_cast<std::uint64_t>(c)}));
      std::normal_distribution<float> noise(0.0f, static_cast<float>(noise_sd_uv));
      for (std::int64_t k = 0; k < n_samples; ++k) row(k) = noise(rng);
    }
    const auto times = spikes.channel(c);
    for (std::size_t m = 0; m < times.size(); ++m) {
      const auto start = times[m] - peak;
      if (m > 0 && times[m] - times[m - 1] < len) ++out.truth.overlapping_spikes;
      for (std::int64_t k = std::max<std::int64_t>(0, -start);
           k < len && start + k < n_samples; ++k)
        row(start + k) += wave[static_cast<std::size_t>(k)];
    }
    out.truth.spikes[c].assign(times.begin(), times.end());
  }
  return out;
}

// ---- MEAR ----------------------------------------------------------------------------------

namespace {

constexpr std::array<char, 4> kMagic{'M', 'E', 'A', 'R'};
constexpr std::uint16_t kVersion = 1;

template <typename T>
void put_le(std::ostream& os, T value) {
  using U = std::make_unsigned_t<T>;
  U bits;
  std::memcpy(&bits, &value, sizeof(T));
  std::array<char, sizeof(T)> buf{};
  for (std::size_t k = 0; k < sizeof(T); ++k) buf[k] = static_cast<char>((bits >> (8 * k)) & 0xff);
  os.write(buf.data(), buf.size());
}

template <typename T>
T get_le(std::istream& is) {
  using U = std::make_unsigned_t<T>;
  std::array<unsigned char, sizeof(T)> buf{};
  if (!is.read(reinterpret_cast<char*>(buf.data()), buf.size()))
    throw std::runtime_error("truncated MEAR file");
  U bits = 0;
  for (std::size_t k = 0; k < sizeof(T); ++k) bits |= static_cast<U>(buf[k]) << (8 * k);
  T value;
  std::memcpy(&value, &bits, sizeof(T));
  return value;
}

void put_f32(std::ostream& os, float v) { put_le(os, std::bit_cast<std::uint32_t>(v)); }
float get_f32(std::istream& is) { return std::bit_cast<float>(get_le<std::uint32_t>(is)); }

}  // namespace

float mear_scale_for(const RawRecording& rec) {
  if (rec.quant_scale_uv > 0.0f) return rec.quant_scale_uv;
  const float peak = rec.samples.size() ? rec.samples.cwiseAbs().maxCoeff() : 0.0f;
  return peak > 0.0f ? peak / 32767.0f : 1.0f;
}

void write_mear(const RawRecording& rec, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const float scale = mear_scale_for(rec);
  os.write(kMagic.data(), kMagic.size());
  put_le<std::uint16_t>(os, kVersion);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(rec.n_channels()));
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(std::lround(rec.sample_rate_hz)));
  put_le<std::uint64_t>(os, static_cast<std::uint64_t>(rec.n_samples()));
  put_le<std::int64_t>(os, std::llround(rec.t0_offset_s * 1e6));
  put_f32(os, scale);

  std::vector<char> buf(static_cast<std::size_t>(rec.n_samples()) * 2);
  for (int c = 0; c < rec.n_channels(); ++c) {
    const auto ch = rec.channel(c);
    for (std::size_t k = 0; k < ch.size(); ++k) {
      const float q = std::clamp(std::nearbyint(ch[k] / scale), -32767.0f, 32767.0f);
      const auto v = static_cast<std::uint16_t>(static_cast<std::int16_t>(q));
      buf[2 * k] = static_cast<char>(v & 0xff);
      buf[2 * k + 1] = static_cast<char>(v >> 8);
    }
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

RawRecording read_mear(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic)
    throw std::runtime_error(path.string() + " is not a MEAR recording");
  if (const auto version = get_le<std::uint16_t>(is); version != kVersion)
    throw std::runtime_error("unsupported MEAR version " + std::to_string(version));

  RawRecording rec;
  const auto n_channels = get_le<std::uint32_t>(is);
  const auto rate = get_le<std::uint32_t>(is);
  const auto n_samples = get_le<std::uint64_t>(is);
  const auto t0_us = get_le<std::int64_t>(is);
  rec.quant_scale_uv = get_f32(is);
  if (rate == 0) throw std::runtime_error("MEAR sample rate is zero");
  if (!(rec.quant_scale_uv > 0.0f)) throw std::runtime_error("MEAR scale must be positive");
  rec.sample_rate_hz = rate;
  rec.t0_offset_s = static_cast<double>(t0_us) * 1e-6;
  rec.samples.resize(n_channels, static_cast<Eigen::Index>(n_samples));

  std::vector<unsigned char> buf(n_samples * 2);
  for (std::uint32_t c = 0; c < n_channels; ++c) {
    if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
      throw std::runtime_error("truncated MEAR sample block");
    for (std::uint64_t k = 0; k < n_samples; ++k) {
      const auto v = static_cast<std::int16_t>(static_cast<std::uint16_t>(buf[2 * k]) |
                                               (static_cast<std::uint16_t>(buf[2 * k + 1]) << 8));
      rec.samples(c, static_cast<Eigen::Index>(k)) = static_cast<float>(v) * rec.quant_scale_uv;
    }
  }
  return rec;
}

}  // namespace mea
