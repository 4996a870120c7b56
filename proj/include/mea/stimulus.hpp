#pragma once

#include <array>
#include <bitset>
#include <cstdint>
#include <span>
#include <vector>

#include "mea/grid.hpp"

namespace mea {

inline constexpr int kDigits = 10;

/// Seven-segment display segments, A at the top, clockwise to F, G in the middle.
enum class Segment : std::uint8_t { A, B, C, D, E, F, G };
inline constexpr int kSegments = 7;

using SegmentSet = std::bitset<kSegments>;

inline SegmentSet segment_set(std::initializer_list<Segment> segments) {
  SegmentSet s;
  for (auto seg : segments) s.set(static_cast<std::size_t>(seg));
  return s;
}

SegmentSet digit_to_segments(int label);

/// Rectangular biphasic pulse; amplitude is per electrode pair.
struct PulseParams {
  double amplitude_ua = 4.0;
  double phase_pos_us = 200.0;
  double phase_neg_us = 200.0;

  void validate() const;
  /// Charge per phase in picocoulombs (uA * us).
  [[nodiscard]] double positive_charge_pc() const noexcept { return amplitude_ua * phase_pos_us; }
  [[nodiscard]] double negative_charge_pc() const noexcept { return amplitude_ua * phase_neg_us; }
  [[nodiscard]] double net_charge_pc() const noexcept {
    return positive_charge_pc() - negative_charge_pc();
  }
};

struct ElectrodePair {
  int positive = 0;
  int negative = 0;

  friend bool operator==(const ElectrodePair&, const ElectrodePair&) = default;
  friend auto operator<=>(const ElectrodePair&, const ElectrodePair&) = default;
};

/// Placement of the digit glyph on the array. Every segment is two electrodes thick and
/// carries `pairs_per_segment` pairs oriented across the segment:
///
///        cols 0-1  2..k+1  k+2..k+3
///   rows 0-1        A
///   2..k+1     F              B
///   k+2..k+3        G
///   k+4..2k+3  E              C
///   2k+4..2k+5      D
struct GlyphLayout {
  GridCoord origin{20, 28};
  int pairs_per_segment = 3;

  [[nodiscard]] int height() const noexcept { return 2 * pairs_per_segment + 6; }
  [[nodiscard]] int width() const noexcept { return pairs_per_segment + 4; }
  void validate() const;
};

std::vector<ElectrodePair> segments_to_pairs(SegmentSet segments, const GlyphLayout& layout);

struct StimulusPattern {
  int label = 0;
  std::vector<ElectrodePair> pairs;
  PulseParams pulse;

  /// All electrodes in the pattern, sorted.
  [[nodiscard]] std::vector<int> electrodes() const;
};

StimulusPattern make_digit_pattern(int label, const GlyphLayout& layout, const PulseParams& pulse);
std::array<StimulusPattern, kDigits> make_digit_patterns(const GlyphLayout& layout,
                                                         const PulseParams& pulse);

struct ScheduledTrial {
  int pattern = 0;  // index into the pattern set (the digit label for digit sets)
  double onset_s = 0.0;
};

struct StimulationSchedule {
  std::vector<ScheduledTrial> trials;
  double inter_stimulus_s = 10.0;
  int repetitions = 20;
  std::uint64_t seed = 0;
};

/// N copies of every pattern in a seeded Fisher-Yates order; trial m starts at m * T.
StimulationSchedule build_schedule(std::span<const StimulusPattern> patterns, int repetitions,
                                   double inter_stimulus_s, std::uint64_t seed);

}  // namespace mea
