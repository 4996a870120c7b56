#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mea/readout.hpp"
#include "mea/spike_train.hpp"
#include "mea/stimulus.hpp"

namespace mea {

/// RFC-4180 helpers: quote a field only when it needs it; parse one record per line.
std::string csv_field(std::string_view s);
std::vector<std::string> parse_csv_line(std::string_view line);

/// Reads a whole CSV file into records, checking the header against `expected_header`
/// (pass an empty string to skip the check).
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path,
                                               std::string_view expected_header);

/// `channel,i,j,sample_index,time_s`, sorted by (channel, sample_index).
void write_spike_csv(const SpikeTrain& train, const std::filesystem::path& path);
SpikeTrain read_spike_csv(const std::filesystem::path& path, double sample_rate_hz, double t0_offset_s,
                          std::int64_t n_samples);

/// Many trials in one file: `trial,channel,sample_index`.
void write_trial_spikes_csv(const std::vector<SpikeTrain>& trials, const std::filesystem::path& path);
std::vector<SpikeTrain> read_trial_spikes_csv(const std::filesystem::path& path, std::size_t n_trials,
                                              double sample_rate_hz, double t0_offset_s, std::int64_t n_samples);

/// `label,session,trial,c0..c4095`.
void write_feature_csv(const std::vector<FeatureVector>& vectors, const std::filesystem::path& path);
std::vector<FeatureVector> read_feature_csv(const std::filesystem::path& path);

/// `trial,label,onset_s`.
void write_schedule_csv(const StimulationSchedule& schedule, std::span<const StimulusPattern> patterns,
                        const std::filesystem::path& path);

/// Shortest round-trip decimal for reals; integers print without a fraction.
std::string format_number(double v);

}  // namespace mea
