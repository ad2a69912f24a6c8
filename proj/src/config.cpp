#include "biphoton/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <string_view>
#include <system_error>
#include <vector>

#include "biphoton/density_matrix.hpp"

namespace biphoton {
namespace {

// One key = value occurrence with its position in the source text.
struct RawItem {
  std::string section;
  std::string key;
  std::string value;
  int line = 0;
  int column = 0;
};

[[noreturn]] void bad_value(const RawItem& item, const char* expected) {
  throw ConfigError("value '" + item.value + "' for key '" + item.key +
                        "' is not " + expected,
                    item.line, item.column);
}

double parse_double(const RawItem& item) {
  double out = 0.0;
  const char* begin = item.value.data();
  const char* end = begin + item.value.size();
  const auto result = std::from_chars(begin, end, out);
  if (result.ec != std::errc() || result.ptr != end || !std::isfinite(out))
    bad_value(item, "a finite number");
  return out;
}

int parse_int(const RawItem& item) {
  int out = 0;
  const char* begin = item.value.data();
  const char* end = begin + item.value.size();
  const auto result = std::from_chars(begin, end, out);
  if (result.ec != std::errc() || result.ptr != end)
    bad_value(item, "an integer");
  return out;
}

std::uint64_t parse_u64(const RawItem& item) {
  std::uint64_t out = 0;
  const char* begin = item.value.data();
  const char* end = begin + item.value.size();
  const auto result = std::from_chars(begin, end, out);
  if (result.ec != std::errc() || result.ptr != end)
    bad_value(item, "an unsigned 64-bit integer");
  return out;
}

std::string format_double(double value) {
  char buffer[32];
  const auto result =
      std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

template <typename Int>
std::string format_int(Int value) {
  char buffer[24];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

// --- field registry --------------------------------------------------

struct Field {
  std::string_view section;
  std::string_view key;
  std::function<void(RunConfig&, const RawItem&)> set;
  std::function<std::string(const RunConfig&)> format;
};

Field field(std::string_view section, std::string_view key,
            double RunConfig::*member) {
  return {section, key,
          [member](RunConfig& c, const RawItem& i) { c.*member = parse_double(i); },
          [member](const RunConfig& c) { return format_double(c.*member); }};
}

Field field(std::string_view section, std::string_view key,
            int RunConfig::*member) {
  return {section, key,
          [member](RunConfig& c, const RawItem& i) { c.*member = parse_int(i); },
          [member](const RunConfig& c) { return format_int(c.*member); }};
}

Field field(std::string_view section, std::string_view key,
            std::string RunConfig::*member) {
  return {section, key,
          [member](RunConfig& c, const RawItem& i) { c.*member = i.value; },
          [member](const RunConfig& c) { return c.*member; }};
}

const std::vector<Field>& registry() {
  static const std::vector<Field> fields = {
      {"run", "experiment",
       [](RunConfig& c, const RawItem& i) {
         try {
           c.experiment = experiment_kind_from_string(i.value);
         } catch (const std::invalid_argument&) {
           bad_value(i, "a known experiment kind");
         }
       },
       [](const RunConfig& c) { return to_string(c.experiment); }},
      {"run", "seed",
       [](RunConfig& c, const RawItem& i) { c.seed = parse_u64(i); },
       [](const RunConfig& c) { return format_int(c.seed); }},
      field("run", "output_dir", &RunConfig::output_dir),
      field("run", "threads", &RunConfig::threads),

      field("crystal", "length_mm", &RunConfig::crystal_length_mm),
      field("crystal", "width_mm", &RunConfig::crystal_width_mm),
      field("crystal", "height_mm", &RunConfig::crystal_height_mm),
      field("crystal", "grating_850_period_um",
            &RunConfig::grating_850_period_um),
      field("crystal", "grating_854_period_um",
            &RunConfig::grating_854_period_um),
      field("crystal", "grating", &RunConfig::grating),
      field("crystal", "temperature_c", &RunConfig::temperature_c),
      field("crystal", "focusing_xi", &RunConfig::focusing_xi),

      field("filter", "short_cavity_length_um",
            &RunConfig::short_cavity_length_um),
      field("filter", "short_cavity_finesse",
            &RunConfig::short_cavity_finesse),
      field("filter", "long_cavity_length_mm",
            &RunConfig::long_cavity_length_mm),
      field("filter", "long_cavity_finesse", &RunConfig::long_cavity_finesse),
      field("filter", "peak_transmission",
            &RunConfig::cavity_peak_transmission),

      field("source", "pump_power_mw", &RunConfig::pump_power_mw),
      field("source", "pair_rate_per_mw", &RunConfig::pair_rate_per_mw),
      field("source", "detuning_span_mhz", &RunConfig::detuning_span_mhz),
      field("source", "pump_jitter_khz", &RunConfig::pump_jitter_khz),
      field("source", "chunk_seconds", &RunConfig::chunk_seconds),
      field("source", "splitter", &RunConfig::splitter),
      field("source", "polarization_state", &RunConfig::polarization_state),
      field("source", "werner_p", &RunConfig::werner_p),
      field("source", "calibrated_v_hv", &RunConfig::calibrated_v_hv),
      field("source", "calibrated_v_diag", &RunConfig::calibrated_v_diag),
      field("source", "duration_s", &RunConfig::duration_s),

      field("detector", "efficiency", &RunConfig::detector_efficiency),
      field("detector", "dark_rate_hz", &RunConfig::dark_rate_hz),
      field("detector", "jitter_ns", &RunConfig::jitter_ns),
      field("detector", "fiber_coupling", &RunConfig::fiber_coupling),
      field("detector", "electronic_delay_ns",
            &RunConfig::electronic_delay_ns),

      field("correlator", "bin_ns", &RunConfig::bin_ns),
      field("correlator", "window_min_ns", &RunConfig::window_min_ns),
      field("correlator", "window_max_ns", &RunConfig::window_max_ns),

      field("tomography", "counts_per_setting",
            &RunConfig::counts_per_setting),
      field("tomography", "accidental_mean", &RunConfig::accidental_mean),
      field("tomography", "bootstrap_resamples",
            &RunConfig::bootstrap_resamples),
  };
  return fields;
}

const Field* find_field(const std::string& section, const std::string& key) {
  for (const Field& f : registry())
    if (f.section == section && f.key == key) return &f;
  return nullptr;
}

bool known_section(const std::string& section) {
  for (const Field& f : registry())
    if (f.section == section) return true;
  return false;
}

// --- tokenizer --------------------------------------------------------

std::string_view trim(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front())))
    text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back())))
    text.remove_suffix(1);
  return text;
}

bool valid_name(std::string_view name) {
  if (name.empty()) return false;
  for (char c : name)
    if (!(std::islower(static_cast<unsigned char>(c)) ||
          std::isdigit(static_cast<unsigned char>(c)) || c == '_' || c == '-'))
      return false;
  return true;
}

std::vector<RawItem> tokenize(const std::string& text) {
  std::vector<RawItem> items;
  std::string section;
  std::istringstream stream(text);
  std::string raw_line;
  int line_number = 0;
  while (std::getline(stream, raw_line)) {
    ++line_number;
    // A comment runs from the first '#' or ';' to the end of the line.
    const std::size_t comment = raw_line.find_first_of("#;");
    std::string_view line(raw_line);
    if (comment != std::string::npos) line = line.substr(0, comment);
    const std::string_view body = trim(line);
    if (body.empty()) continue;
    const int column =
        static_cast<int>(raw_line.find(body.front()) + 1);  // 1-based

    if (body.front() == '[') {
      if (body.back() != ']')
        throw ConfigError("section header missing ']'", line_number, column);
      const std::string_view name = trim(body.substr(1, body.size() - 2));
      if (!valid_name(name))
        throw ConfigError("invalid section name '" + std::string(name) + "'",
                          line_number, column);
      section = std::string(name);
      continue;
    }

    const std::size_t equals = body.find('=');
    if (equals == std::string_view::npos)
      throw ConfigError("expected 'key = value' or '[section]'", line_number,
                        column);
    const std::string_view key = trim(body.substr(0, equals));
    const std::string_view value = trim(body.substr(equals + 1));
    if (!valid_name(key))
      throw ConfigError("invalid key name '" + std::string(key) + "'",
                        line_number, column);
    if (value.empty())
      throw ConfigError("empty value for key '" + std::string(key) + "'",
                        line_number, column);
    if (section.empty())
      throw ConfigError("key '" + std::string(key) + "' appears before any "
                        "[section] header",
                        line_number, column);
    items.push_back({section, std::string(key), std::string(value),
                     line_number, column});
  }
  return items;
}

[[noreturn]] void invalid(const std::string& key, const std::string& what) {
  throw ConfigError(key + " " + what);
}

void check(bool ok, const std::string& key, const std::string& what) {
  if (!ok) invalid(key, what);
}

// The correlator requires the window to contain a whole number of bins once
// quantized to integer picoseconds; reject that here so a bad window fails
// at load time, not mid-run.
void check_window(double bin_ns, double min_ns, double max_ns) {
  const auto ps = [](double ns) {
    return static_cast<std::int64_t>(std::llround(ns * 1000.0));
  };
  check(ps(bin_ns) >= 1, "correlator.bin_ns",
        "must be at least one picosecond");
  check(min_ns < max_ns, "correlator.window_min_ns",
        "must be below window_max_ns");
  check((ps(max_ns) - ps(min_ns)) % ps(bin_ns) == 0,
        "correlator.window_max_ns",
        "span must be an integer number of bins");
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::PhaseMatch: return "phasematch";
    case ExperimentKind::Spectrum: return "spectrum";
    case ExperimentKind::Simulate: return "simulate";
    case ExperimentKind::Correlate: return "correlate";
    case ExperimentKind::Tomography: return "tomography";
    case ExperimentKind::FullPipeline: return "full-pipeline";
  }
  throw std::invalid_argument("unhandled experiment kind");
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
  if (name == "phasematch") return ExperimentKind::PhaseMatch;
  if (name == "spectrum") return ExperimentKind::Spectrum;
  if (name == "simulate") return ExperimentKind::Simulate;
  if (name == "correlate") return ExperimentKind::Correlate;
  if (name == "tomography") return ExperimentKind::Tomography;
  if (name == "full-pipeline") return ExperimentKind::FullPipeline;
  throw std::invalid_argument("unknown experiment kind '" + name + "'");
}

void RunConfig::validate() const {
  check(threads >= 0, "run.threads", "must be >= 0");

  check(crystal_length_mm > 0.0, "crystal.length_mm", "must be > 0");
  check(crystal_width_mm > 0.0, "crystal.width_mm", "must be > 0");
  check(crystal_height_mm > 0.0, "crystal.height_mm", "must be > 0");
  check(grating_850_period_um > 0.0, "crystal.grating_850_period_um",
        "must be > 0");
  check(grating_854_period_um > 0.0, "crystal.grating_854_period_um",
        "must be > 0");
  check(grating == 850 || grating == 854, "crystal.grating",
        "must be 850 or 854");
  check(temperature_c >= -20.0 && temperature_c <= 200.0,
        "crystal.temperature_c", "must lie in [-20, 200]");
  check(focusing_xi > 0.0, "crystal.focusing_xi", "must be > 0");

  check(short_cavity_length_um > 0.0, "filter.short_cavity_length_um",
        "must be > 0");
  check(short_cavity_finesse > 1.0, "filter.short_cavity_finesse",
        "must be > 1");
  check(long_cavity_length_mm > 0.0, "filter.long_cavity_length_mm",
        "must be > 0");
  check(long_cavity_finesse > 1.0, "filter.long_cavity_finesse",
        "must be > 1");
  check(cavity_peak_transmission > 0.0 && cavity_peak_transmission <= 1.0,
        "filter.peak_transmission", "must lie in (0, 1]");

  check(pump_power_mw >= 0.0, "source.pump_power_mw", "must be >= 0");
  check(pair_rate_per_mw >= 0.0, "source.pair_rate_per_mw", "must be >= 0");
  check(detuning_span_mhz > 0.0, "source.detuning_span_mhz", "must be > 0");
  check(pump_jitter_khz >= 0.0, "source.pump_jitter_khz", "must be >= 0");
  check(chunk_seconds > 0.0, "source.chunk_seconds", "must be > 0");
  check(splitter == "pbs" || splitter == "bs50", "source.splitter",
        "must be 'pbs' or 'bs50'");
  check(polarization_state == "singlet" || polarization_state == "calibrated" ||
            polarization_state == "werner",
        "source.polarization_state",
        "must be 'singlet', 'calibrated' or 'werner'");
  check(werner_p >= 0.0 && werner_p <= 1.0, "source.werner_p",
        "must lie in [0, 1]");
  check(calibrated_v_hv >= 0.0 && calibrated_v_hv <= 1.0,
        "source.calibrated_v_hv", "must lie in [0, 1]");
  check(calibrated_v_diag >= 0.0 && calibrated_v_diag <= calibrated_v_hv,
        "source.calibrated_v_diag", "must lie in [0, calibrated_v_hv]");
  check(duration_s >= 0.0, "source.duration_s", "must be >= 0");

  check(detector_efficiency >= 0.0 && detector_efficiency <= 1.0,
        "detector.efficiency", "must lie in [0, 1]");
  check(dark_rate_hz >= 0.0, "detector.dark_rate_hz", "must be >= 0");
  check(jitter_ns >= 0.0, "detector.jitter_ns", "must be >= 0");
  check(fiber_coupling >= 0.0 && fiber_coupling <= 1.0,
        "detector.fiber_coupling", "must lie in [0, 1]");
  check(electronic_delay_ns >= 0.0, "detector.electronic_delay_ns",
        "must be >= 0");

  check_window(bin_ns, window_min_ns, window_max_ns);

  check(counts_per_setting > 0.0, "tomography.counts_per_setting",
        "must be > 0");
  check(accidental_mean >= 0.0, "tomography.accidental_mean", "must be >= 0");
  check(bootstrap_resamples >= 0, "tomography.bootstrap_resamples",
        "must be >= 0");
}

CrystalSpec RunConfig::crystal_spec() const {
  CrystalSpec spec;
  spec.length = crystal_length_mm * 1e-3;
  spec.width = crystal_width_mm * 1e-3;
  spec.height = crystal_height_mm * 1e-3;
  spec.gratings = {grating_850_period_um * 1e-6, grating_854_period_um * 1e-6};
  spec.temperature = temperature_c;
  return spec;
}

FilterChain RunConfig::filter_chain(double lock_frequency) const {
  FilterChain chain;
  chain.cavities = {
      {short_cavity_length_um * 1e-6, short_cavity_finesse,
       cavity_peak_transmission, 0.0},
      {long_cavity_length_mm * 1e-3, long_cavity_finesse,
       cavity_peak_transmission, 0.0}};
  chain.lock_frequency = lock_frequency;
  return chain;
}

DetectorSpec RunConfig::detector_spec() const {
  DetectorSpec spec;
  spec.efficiency = detector_efficiency;
  spec.dark_rate = dark_rate_hz;
  spec.jitter_rms = jitter_ns * 1e-9;
  spec.arm_coupling = fiber_coupling;
  return spec;
}

DensityMatrix RunConfig::source_state() const {
  if (polarization_state == "singlet") return singlet_state();
  if (polarization_state == "werner") return werner_state(werner_p);
  if (polarization_state == "calibrated")
    return calibrated_source_state(calibrated_v_hv, calibrated_v_diag);
  invalid("source.polarization_state", "must be 'singlet', 'calibrated' or "
          "'werner'");
}

RunConfig parse_config(const std::string& text) {
  RunConfig config;
  for (const RawItem& item : tokenize(text)) {
    const Field* f = find_field(item.section, item.key);
    if (!f) {
      if (!known_section(item.section))
        throw ConfigError("unknown section [" + item.section + "]", item.line,
                          item.column);
      throw ConfigError("unknown key '" + item.key + "' in section [" +
                            item.section + "]",
                        item.line, item.column);
    }
    f->set(config, item);
  }
  config.validate();
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream stream(path, std::ios::binary);
  if (!stream) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buffer;
  buffer << stream.rdbuf();
  return parse_config(buffer.str());
}

std::string dump_config(const RunConfig& config) {
  std::string out;
  std::string_view open_section;
  for (const Field& f : registry()) {
    if (f.section != open_section) {
      if (!out.empty()) out += '\n';
      out += '[';
      out += f.section;
      out += "]\n";
      open_section = f.section;
    }
    out += f.key;
    out += " = ";
    out += f.format(config);
    out += '\n';
  }
  return out;
}

}  // namespace biphoton
