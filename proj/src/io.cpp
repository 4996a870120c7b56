#include "mea/io.hpp"

#include <fmt/format.h>
#include <fmt/os.h>

#include <charconv>
#include <fstream>
#include <stdexcept>

namespace mea {

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

std::vector<std::string> parse_csv_line(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char ch = line[k];
    if (quoted) {
      if (ch == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        fields.back() += '"';
        ++k;
      } else if (ch == '"') {
        quoted = false;
      } else {
        fields.back() += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.emplace_back();
    } else if (ch != '\r') {
      fields.back() += ch;
    }
  }
  if (quoted) throw std::runtime_error("unterminated quoted CSV field");
  return fields;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path, std::string_view expected_header) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error(path.string() + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (!expected_header.empty() && line != expected_header)
    throw std::runtime_error(path.string() + ": unexpected header '" + line.substr(0, 80) + "'");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    rows.push_back(parse_csv_line(line));
  }
  return rows;
}

namespace {

template <typename T>
T parse_number(const std::string& s, const char* what) {
  T v{};
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw std::runtime_error(std::string("invalid ") + what + " '" + s + "'");
  return v;
}

}  // namespace

std::string format_number(double v) { return fmt::format("{}", v); }

void write_spike_csv(const SpikeTrain& train, const std::filesystem::path& path) {
  auto out = fmt::output_file(path.string());
  out.print("channel,i,j,sample_index,time_s\n");
  for (int c = 0; c < train.n_channels(); ++c) {
    const auto g = channel_to_grid(c);
    for (auto s : train.channel(c)) out.print("{},{},{},{},{:.6f}\n", c, g.row, g.col, s, train.time_of(s));
  }
}

SpikeTrain read_spike_csv(const std::filesystem::path& path, double sample_rate_hz, double t0_offset_s,
                          std::int64_t n_samples) {
  std::vector<std::pair<int, std::int64_t>> events;
  for (const auto& row : read_csv(path, "channel,i,j,sample_index,time_s")) {
    if (row.size() != 5) throw std::runtime_error(path.string() + ": spike rows need 5 fields");
    events.emplace_back(parse_number<int>(row[0], "channel"), parse_number<std::int64_t>(row[3], "sample index"));
  }
  return SpikeTrain::from_events(kChannels, sample_rate_hz, t0_offset_s, n_samples, std::move(events));
}

void write_trial_spikes_csv(const std::vector<SpikeTrain>& trials, const std::filesystem::path& path) {
  auto out = fmt::output_file(path.string());
  out.print("trial,channel,sample_index\n");
  for (std::size_t t = 0; t < trials.size(); ++t)
    for (int c = 0; c < trials[t].n_channels(); ++c)
      for (auto s : trials[t].channel(c)) out.print("{},{},{}\n", t, c, s);
}

std::vector<SpikeTrain> read_trial_spikes_csv(const std::filesystem::path& path, std::size_t n_trials,
                                              double sample_rate_hz, double t0_offset_s, std::int64_t n_samples) {
  std::vector<std::vector<std::pair<int, std::int64_t>>> events(n_trials);
  for (const auto& row : read_csv(path, "trial,channel,sample_index")) {
    if (row.size() != 3) throw std::runtime_error(path.string() + ": trial spike rows need 3 fields");
    const auto t = parse_number<std::size_t>(row[0], "trial");
    if (t >= n_trials) throw std::runtime_error(path.string() + ": trial index out of range");
    events[t].emplace_back(parse_number<int>(row[1], "channel"), parse_number<std::int64_t>(row[2], "sample index"));
  }
  std::vector<SpikeTrain> trials;
  trials.reserve(n_trials);
  for (auto& e : events)
    trials.push_back(SpikeTrain::from_events(kChannels, sample_rate_hz, t0_offset_s, n_samples, std::move(e)));
  return trials;
}

void write_feature_csv(const std::vector<FeatureVector>& vectors, const std::filesystem::path& path) {
  auto out = fmt::output_file(path.string());
  const Eigen::Index dim = vectors.empty() ? kChannels : vectors.front().values.size();
  out.print("label,session,trial");
  for (Eigen::Index c = 0; c < dim; ++c) out.print(",c{}", c);
  out.print("\n");
  std::string line;
  for (const auto& fv : vectors) {
    line = fmt::format("{},{},{}", fv.label, csv_field(fv.session), fv.trial);
    for (Eigen::Index c = 0; c < fv.values.size(); ++c) {
      line += ',';
      line += fv.values[c] == 0.0 ? std::string("0") : format_number(fv.values[c]);
    }
    line += '\n';
    out.print("{}", line);
  }
}

std::vector<FeatureVector> read_feature_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error(path.string() + " is empty");
  const auto header = parse_csv_line(line);
  if (header.size() < 4 || header[0] != "label" || header[1] != "session" || header[2] != "trial")
    throw std::runtime_error(path.string() + ": not a feature CSV");
  const auto dim = static_cast<Eigen::Index>(header.size() - 3);
  for (Eigen::Index c = 0; c < dim; ++c)
    if (header[static_cast<std::size_t>(c) + 3] != "c" + std::to_string(c))
      throw std::runtime_error(path.string() + ": feature columns must be c0..c" + std::to_string(dim - 1));

  std::vector<FeatureVector> out;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    const auto row = parse_csv_line(line);
    if (static_cast<Eigen::Index>(row.size()) != dim + 3)
      throw std::runtime_error(path.string() + ": row width does not match the header");
    FeatureVector fv;
    fv.values = Eigen::VectorXd::Zero(dim);
    fv.masked.assign(static_cast<std::size_t>(dim), 0);
    fv.label = parse_number<int>(row[0], "label");
    fv.session = row[1];
    fv.trial = parse_number<int>(row[2], "trial");
    for (Eigen::Index c = 0; c < dim; ++c)
      fv.values[c] = parse_number<double>(row[static_cast<std::size_t>(c) + 3], "feature value");
    out.push_back(std::move(fv));
  }
  return out;
}

void write_schedule_csv(const StimulationSchedule& schedule, std::span<const StimulusPattern> patterns,
                        const std::filesystem::path& path) {
  auto out = fmt::output_file(path.string());
  out.print("trial,label,onset_s\n");
  for (std::size_t m = 0; m < schedule.trials.size(); ++m) {
    const auto& t = schedule.trials[m];
    out.print("{},{},{}\n", m, patterns[static_cast<std::size_t>(t.pattern)].label, format_number(t.onset_s));
  }
}

}  // namespace mea
