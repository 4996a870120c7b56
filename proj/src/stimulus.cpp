#include "mea/stimulus.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace mea {

SegmentSet digit_to_segments(int label) {
  using S = Segment;
  switch (label) {
    case 0: return segment_set({S::A, S::B, S::C, S::D, S::E, S::F});
    case 1: return segment_set({S::B, S::C});
    case 2: return segment_set({S::A, S::B, S::D, S::E, S::G});
    case 3: return segment_set({S::A, S::B, S::C, S::D, S::G});
    case 4: return segment_set({S::B, S::C, S::F, S::G});
    case 5: return segment_set({S::A, S::C, S::D, S::F, S::G});
    case 6: return segment_set({S::A, S::C, S::D, S::E, S::F, S::G});
    case 7: return segment_set({S::A, S::B, S::C});
    case 8: return segment_set({S::A, S::B, S::C, S::D, S::E, S::F, S::G});
    case 9: return segment_set({S::A, S::B, S::C, S::D, S::F, S::G});
    default: throw std::out_of_range("digit label " + std::to_string(label) + " outside 0..9");
  }
}

void PulseParams::validate() const {
  if (!(amplitude_ua > 0)) throw std::invalid_argument("pulse amplitude must be positive");
  if (!(phase_pos_us > 0) || !(phase_neg_us > 0))
    throw std::invalid_argument("pulse phase durations must be positive");
}

void GlyphLayout::validate() const {
  if (pairs_per_segment < 1) throw std::invalid_argument("pairs_per_segment must be >= 1");
  if (origin.row < 0 || origin.col < 0 || origin.row + height() > kGridSide ||
      origin.col + width() > kGridSide)
    throw std::out_of_range("glyph layout does not fit inside the 64x64 grid");
}

std::vector<ElectrodePair> segments_to_pairs(SegmentSet segments, const GlyphLayout& layout) {
  layout.validate();
  const int k = layout.pairs_per_segment;
  std::vector<ElectrodePair> pairs;

  auto at = [&](int r, int c) { return grid_to_channel({layout.origin.row + r, layout.origin.col + c}); };
  // Horizontal segment: pairs stacked vertically in rows r0, r0 + 1.
  auto horizontal = [&](int r0) {
    for (int m = 0; m < k; ++m) {
      const int top = at(r0, 2 + m), bottom = at(r0 + 1, 2 + m);
      pairs.push_back(m % 2 == 0 ? ElectrodePair{top, bottom} : ElectrodePair{bottom, top});
    }
  };
  // Vertical segment: pairs side by side in columns c0, c0 + 1.
  auto vertical = [&](int r0, int c0) {
    for (int m = 0; m < k; ++m) {
      const int left = at(r0 + m, c0), right = at(r0 + m, c0 + 1);
      pairs.push_back(m % 2 == 0 ? ElectrodePair{left, right} : ElectrodePair{right, left});
    }
  };

  using S = Segment;
  auto has = [&](S s) { return segments.test(static_cast<std::size_t>(s)); };
  if (has(S::A)) horizontal(0);
  if (has(S::B)) vertical(2, k + 2);
  if (has(S::C)) vertical(k + 4, k + 2);
  if (has(S::D)) horizontal(2 * k + 4);
  if (has(S::E)) vertical(k + 4, 0);
  if (has(S::F)) vertical(2, 0);
  if (has(S::G)) horizontal(k + 2);
  return pairs;
}

std::vector<int> StimulusPattern::electrodes() const {
  std::vector<int> e;
  e.reserve(pairs.size() * 2);
  for (const auto& p : pairs) {
    e.push_back(p.positive);
    e.push_back(p.negative);
  }
  std::sort(e.begin(), e.end());
  return e;
}

StimulusPattern make_digit_pattern(int label, const GlyphLayout& layout, const PulseParams& pulse) {
  pulse.validate();
  return {label, segments_to_pairs(digit_to_segments(label), layout), pulse};
}

std::array<StimulusPattern, kDigits> make_digit_patterns(const GlyphLayout& layout,
                                                         const PulseParams& pulse) {
  std::array<StimulusPattern, kDigits> out;
  for (int d = 0; d < kDigits; ++d) out[d] = make_digit_pattern(d, layout, pulse);
  return out;
}

StimulationSchedule build_schedule(std::span<const StimulusPattern> patterns, int repetitions,
                                   double inter_stimulus_s, std::uint64_t seed) {
  if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
  if (!(inter_stimulus_s > 0)) throw std::invalid_argument("inter-stimulus interval must be positive");
  if (patterns.empty()) throw std::invalid_argument("schedule needs at least one pattern");

  std::vector<int> order;
  order.reserve(patterns.size() * static_cast<std::size_t>(repetitions));
  for (std::size_t p = 0; p < patterns.size(); ++p)
    for (int r = 0; r < repetitions; ++r) order.push_back(static_cast<int>(p));

  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(order[i], order[pick(rng)]);
  }

  StimulationSchedule schedule;
  schedule.inter_stimulus_s = inter_stimulus_s;
  schedule.repetitions = repetitions;
  schedule.seed = seed;
  schedule.trials.reserve(order.size());
  for (std::size_t m = 0; m < order.size(); ++m)
    schedule.trials.push_back({order[m], static_cast<double>(m) * inter_stimulus_s});
  return schedule;
}

}  // namespace mea
