#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "kmax/harness.hpp"

namespace kmax {

namespace {

// Shortest text that parses back to the identical double; keeps emitted
// files byte-stable across runs and worker-pool sizes.
void append_double(std::string& out, double value) {
  char buf[48];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  out.append(buf, res.ptr);
}

double parse_double(std::string_view text) {
  double value = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
    throw std::runtime_error("csv: malformed number '" + std::string(text) + "'");
  return value;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

struct MeanStd {
  double mean = 0.0;
  double std_dev = 0.0;
};

MeanStd mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() == 1) return {mean, 0.0};
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / static_cast<double>(xs.size() - 1))};
}

}  // namespace

std::string fnv1a_digest(const std::string& text) {
  std::uint64_t hash = 14695981039346656037ull;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return std::string(buf);
}

std::optional<double> fit_growth_exponent(const RegretTrace& trace, double burn_in_fraction) {
  if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0))
    throw std::invalid_argument("fit_growth_exponent: burn-in fraction must be in [0,1)");
  const std::int64_t horizon = static_cast<std::int64_t>(trace.rounds.size());
  if (horizon == 0) return std::nullopt;
  std::int64_t first =
      static_cast<std::int64_t>(std::floor(burn_in_fraction * static_cast<double>(horizon))) + 1;

  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::int64_t count = 0;
  for (const RoundRecord& record : trace.rounds) {
    if (record.t < first) continue;
    if (!(record.cum_regret > 0.0)) return std::nullopt;  // exponent undefined
    double x = std::log(static_cast<double>(record.t));
    double y = std::log(record.cum_regret);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++count;
  }
  if (count < 2) return std::nullopt;
  double denom = count * sxx - sx * sx;
  if (denom <= 0.0) return std::nullopt;
  return (count * sxy - sx * sy) / denom;
}

std::string emit_csv_string(const std::vector<RegretTrace>& traces) {
  if (traces.empty()) throw std::invalid_argument("emit: no traces");
  const std::vector<std::string>& diag = traces.front().diagnostic_names;
  for (const RegretTrace& trace : traces)
    if (trace.diagnostic_names != diag)
      throw std::invalid_argument("emit: traces disagree on diagnostic columns");

  std::string out = "t,seed,action,inst_regret,cum_regret";
  for (const std::string& name : diag) {
    out += ',';
    out += name;
  }
  out += '\n';
  for (const RegretTrace& trace : traces) {
    const std::string seed_text = std::to_string(trace.seed);
    for (const RoundRecord& record : trace.rounds) {
      out += std::to_string(record.t);
      out += ',';
      out += seed_text;
      out += ',';
      for (std::size_t i = 0; i < record.action.size(); ++i) {
        if (i > 0) out += ';';
        out += std::to_string(record.action[i]);
      }
      out += ',';
      append_double(out, record.inst_regret);
      out += ',';
      append_double(out, record.cum_regret);
      for (double value : record.diagnostics) {
        out += ',';
        append_double(out, value);
      }
      out += '\n';
    }
  }
  return out;
}

nlohmann::json summary_json(const std::vector<RegretTrace>& traces) {
  if (traces.empty()) throw std::invalid_argument("summary: no traces");
  nlohmann::json seeds = nlohmann::json::array();
  std::vector<double> finals;
  std::vector<double> exponents;
  for (const RegretTrace& trace : traces) {
    double final_regret = trace.rounds.empty() ? 0.0 : trace.rounds.back().cum_regret;
    finals.push_back(final_regret);
    std::optional<double> exponent = fit_growth_exponent(trace);
    nlohmann::json row{{"seed", trace.seed}, {"final_regret", final_regret}};
    if (exponent) {
      row["exponent"] = *exponent;
      exponents.push_back(*exponent);
    } else {
      row["exponent"] = nullptr;
    }
    seeds.push_back(std::move(row));
  }
  MeanStd final_stats = mean_std(finals);
  nlohmann::json summary{
      {"config_digest", traces.front().config_digest},
      {"seeds", std::move(seeds)},
      {"final_regret", {{"mean", final_stats.mean}, {"std", final_stats.std_dev}}},
  };
  if (!exponents.empty()) {
    MeanStd exp_stats = mean_std(exponents);
    summary["exponent"] = {{"mean", exp_stats.mean}, {"std", exp_stats.std_dev}};
  } else {
    summary["exponent"] = nullptr;
  }
  return summary;
}

void emit(const std::vector<RegretTrace>& traces, EmitFormat format, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("emit: cannot open '" + path + "' for writing");
  if (format == EmitFormat::csv) {
    out << emit_csv_string(traces);
  } else {
    out << summary_json(traces).dump(2) << "\n";
  }
  if (!out) throw std::runtime_error("emit: write failed for '" + path + "'");
}

std::vector<RegretTrace> load_traces_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_traces_csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_traces_csv: empty file");
  auto header = split(line, ',');
  if (header.size() < 5 || header[0] != "t" || header[1] != "seed" || header[2] != "action" ||
      header[3] != "inst_regret" || header[4] != "cum_regret")
    throw std::runtime_error("load_traces_csv: unexpected header");
  std::vector<std::string> diag_names(header.begin() + 5, header.end());

  std::vector<RegretTrace> traces;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split(line, ',');
    if (fields.size() != header.size())
      throw std::runtime_error("load_traces_csv: ragged row");
    std::uint64_t seed = std::stoull(std::string(fields[1]));
    if (traces.empty() || traces.back().seed != seed) {
      RegretTrace trace;
      trace.seed = seed;
      trace.diagnostic_names = diag_names;
      traces.push_back(std::move(trace));
    }
    RoundRecord record;
    record.t = std::stoll(std::string(fields[0]));
    for (std::string_view part : split(fields[2], ';'))
      if (!part.empty()) record.action.push_back(std::stoi(std::string(part)));
    record.inst_regret = parse_double(fields[3]);
    record.cum_regret = parse_double(fields[4]);
    for (std::size_t i = 5; i < fields.size(); ++i)
      record.diagnostics.push_back(parse_double(fields[i]));
    traces.back().rounds.push_back(std::move(record));
  }
  return traces;
}

}  // namespace kmax
