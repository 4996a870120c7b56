#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mea/grid.hpp"
#include "mea/spike_train.hpp"

namespace mea {

/// Multi-channel extracellular voltage trace in microvolts, one row per channel.
/// Treated as immutable once built; safe to share between threads.
struct RawRecording {
  using Samples = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Samples samples;
  double sample_rate_hz = kDefaultSampleRateHz;
  double t0_offset_s = 0.0;
  // Microvolts per stored integer unit when the trace came from (or is bound for) a MEAR file.
  // Zero means "choose from the data on write".
  float quant_scale_uv = 0.0f;

  [[nodiscard]] int n_channels() const noexcept { return static_cast<int>(samples.rows()); }
  [[nodiscard]] std::int64_t n_samples() const noexcept { return samples.cols(); }
  [[nodiscard]] std::span<const float> channel(int c) const {
    return {samples.row(c).data(), static_cast<std::size_t>(samples.cols())};
  }
};

/// Canonical biphasic extracellular spike: a sharp negative trough followed by a
/// slower, smaller positive rebound. `amplitude_uv` is the trough depth.
struct SpikeTemplate {
  double amplitude_uv = 80.0;
  double duration_s = 1.5e-3;
  double rebound_ratio = 0.35;

  /// Samples of the waveform at the given rate, plus the index of the trough.
  [[nodiscard]] std::vector<float> waveform(double sample_rate_hz) const;
  [[nodiscard]] int peak_index(double sample_rate_hz) const;
};

struct GroundTruthAnnotation {
  std::vector<std::vector<std::int64_t>> spikes;  // per channel, trough sample index
  SpikeTemplate spike_template;
  std::int64_t overlapping_spikes = 0;  // spikes whose waveform overlaps the previous one
};

struct SynthesizedTrace {
  RawRecording recording;
  GroundTruthAnnotation truth;
};

/// Superimpose `spike_template` at every spike (trough aligned to the spike time) and add
/// independent Gaussian noise of standard deviation `noise_sd_uv` to every sample.
/// Noise on channel c is drawn from a stream derived from (seed, c).
SynthesizedTrace synthesize_trace(const SpikeTrain& spikes, double noise_sd_uv,
                                  const SpikeTemplate& spike_template, std::uint64_t seed);

/// MEAR binary recording: "MEAR", u16 version, u32 channels, u32 rate, u64 samples,
/// i64 t0 (us), f32 scale (uV per unit), channel-major i16 samples. Little-endian.
void write_mear(const RawRecording& rec, const std::filesystem::path& path);
RawRecording read_mear(const std::filesystem::path& path);

/// Scale used when writing `rec`: its stored scale, or max|x| / 32767.
float mear_scale_for(const RawRecording& rec);

}  // namespace mea
