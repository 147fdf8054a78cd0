#pragma once

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bnpsurv/data.hpp"
#include "bnpsurv/samplers.hpp"
#include "bnpsurv/simgen.hpp"

namespace bnpsurv {

// ---------------------------------------------------------------------------
// Small text utilities
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt_g17(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

inline double parse_double(std::string_view s, const std::string& what) {
  const std::string tmp(trim(s));
  if (tmp.empty()) throw std::invalid_argument(what + ": empty number");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(tmp.c_str(), &end);
  if (errno != 0 || end != tmp.c_str() + tmp.size())
    throw std::invalid_argument(what + ": bad number '" + tmp + "'");
  return v;
}

inline long parse_long(std::string_view s, const std::string& what) {
  const std::string tmp(trim(s));
  if (tmp.empty()) throw std::invalid_argument(what + ": empty integer");
  char* end = nullptr;
  errno = 0;
  const long v = std::strtol(tmp.c_str(), &end, 10);
  if (errno != 0 || end != tmp.c_str() + tmp.size())
    throw std::invalid_argument(what + ": bad integer '" + tmp + "'");
  return v;
}

// Pull consecutive lines out of a string without copying.
struct LineReader {
  std::string_view text;
  std::size_t pos = 0;
  int line_no = 0;

  std::optional<std::string_view> next() {
    if (pos >= text.size()) return std::nullopt;
    const std::size_t nl = text.find('\n', pos);
    std::string_view line;
    if (nl == std::string_view::npos) {
      line = text.substr(pos);
      pos = text.size();
    } else {
      line = text.substr(pos, nl - pos);
      pos = nl + 1;
    }
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
  }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline std::optional<std::string> read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) return std::nullopt;
  return buf.str();
}

// Write through a sibling temp file and rename, so readers never observe a
// half-written file.
inline bool atomic_write_text(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) return false;
    out << content;
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      return false;
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Dataset CSV: header `group,time,status`; status 1 = event, 0 = censored.
// Group labels are arbitrary strings, re-indexed densely in first-appearance
// order with the original labels kept for output.
// ---------------------------------------------------------------------------

struct ParsedDataset {
  Dataset dataset;
  std::vector<std::string> group_labels;  // dense index -> original label

  friend bool operator==(const ParsedDataset&, const ParsedDataset&) = default;
};

inline constexpr std::string_view kDatasetHeader = "group,time,status";

inline ParsedDataset parse_dataset(const std::string& text) {
  detail::LineReader reader{text};
  const auto header = reader.next();
  if (!header || detail::trim(*header) != kDatasetHeader)
    throw std::invalid_argument("dataset: missing header 'group,time,status'");
  ParsedDataset out;
  std::map<std::string, int, std::less<>> index;
  std::vector<Observation> obs;
  while (const auto line = reader.next()) {
    if (detail::trim(*line).empty()) continue;
    const auto fields = detail::split(*line, ',');
    const std::string where = "dataset row " + std::to_string(reader.line_no);
    if (fields.size() != 3) throw std::invalid_argument(where + ": expected 3 columns");
    const std::string label(detail::trim(fields[0]));
    if (label.empty()) throw std::invalid_argument(where + ": empty group label");
    const double time = detail::parse_double(fields[1], where);
    if (!(time > 0.0) || !std::isfinite(time))
      throw std::invalid_argument(where + ": time must be positive and finite");
    const auto status = detail::trim(fields[2]);
    if (status != "0" && status != "1")
      throw std::invalid_argument(where + ": status must be 0 or 1");
    auto [it, inserted] = index.try_emplace(label, static_cast<int>(out.group_labels.size()));
    if (inserted) out.group_labels.push_back(label);
    obs.push_back({time, status == "1", it->second});
  }
  if (obs.empty()) throw std::invalid_argument("dataset: no data rows");
  out.dataset = validate(dataset_from(std::move(obs)));
  return out;
}

inline std::string serialize_dataset(const Dataset& data,
                                     const std::vector<std::string>& group_labels) {
  if (group_labels.size() != static_cast<std::size_t>(data.group_count))
    throw std::invalid_argument("serialize_dataset: one label per group required");
  std::string out(kDatasetHeader);
  out += '\n';
  for (const Observation& obs : data.observations) {
    out += group_labels[static_cast<std::size_t>(obs.group)];
    out += ',';
    out += detail::fmt_g17(obs.time);
    out += obs.event ? ",1\n" : ",0\n";
  }
  return out;
}

inline std::vector<std::string> numeric_labels(int group_count) {
  std::vector<std::string> labels;
  labels.reserve(static_cast<std::size_t>(group_count));
  for (int j = 0; j < group_count; ++j) labels.push_back(std::to_string(j));
  return labels;
}

// ---------------------------------------------------------------------------
// Truth sidecar: per-group generating mixture index and frailty.
// ---------------------------------------------------------------------------

struct TruthSidecar {
  std::vector<std::string> group_labels;
  std::vector<int> mixture;
  std::vector<double> frailty;

  friend bool operator==(const TruthSidecar&, const TruthSidecar&) = default;
};

inline constexpr std::string_view kTruthHeader = "group,mixture,frailty";

inline std::string serialize_truth(const SimulatedDataset& sim,
                                   const std::vector<std::string>& group_labels) {
  std::string out(kTruthHeader);
  out += '\n';
  for (std::size_t j = 0; j < sim.true_mixture_per_group.size(); ++j) {
    out += group_labels[j];
    out += ',';
    out += std::to_string(sim.true_mixture_per_group[j]);
    out += ',';
    out += detail::fmt_g17(sim.true_frailty_per_group[j]);
    out += '\n';
  }
  return out;
}

inline TruthSidecar parse_truth(const std::string& text) {
  detail::LineReader reader{text};
  const auto header = reader.next();
  if (!header || detail::trim(*header) != kTruthHeader)
    throw std::invalid_argument("truth: missing header 'group,mixture,frailty'");
  TruthSidecar out;
  while (const auto line = reader.next()) {
    if (detail::trim(*line).empty()) continue;
    const auto fields = detail::split(*line, ',');
    const std::string where = "truth row " + std::to_string(reader.line_no);
    if (fields.size() != 3) throw std::invalid_argument(where + ": expected 3 columns");
    out.group_labels.emplace_back(detail::trim(fields[0]));
    const long m = detail::parse_long(fields[1], where);
    if (m < 0) throw std::invalid_argument(where + ": negative mixture index");
    out.mixture.push_back(static_cast<int>(m));
    const double u = detail::parse_double(fields[2], where);
    if (!(u > 0.0)) throw std::invalid_argument(where + ": frailty must be positive");
    out.frailty.push_back(u);
  }
  if (out.group_labels.empty()) throw std::invalid_argument("truth: no data rows");
  return out;
}

// Reorder sidecar rows to the dataset's dense group order, matching labels.
inline TruthSidecar align_truth(const TruthSidecar& truth,
                                const std::vector<std::string>& group_labels) {
  TruthSidecar out;
  out.group_labels = group_labels;
  for (const std::string& label : group_labels) {
    std::size_t found = truth.group_labels.size();
    for (std::size_t i = 0; i < truth.group_labels.size(); ++i) {
      if (truth.group_labels[i] == label) {
        found = i;
        break;
      }
    }
    if (found == truth.group_labels.size())
      throw std::invalid_argument("truth: no row for group '" + label + "'");
    out.mixture.push_back(truth.mixture[found]);
    out.frailty.push_back(truth.frailty[found]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trace files: line-oriented text, one state summary per retained draw.
// The summary carries exactly what downstream scoring needs — the mixture
// each group sees under the draw — not the per-observation assignments.
// ---------------------------------------------------------------------------

namespace detail {

inline void append_doubles(std::string& out, std::span<const double> xs) {
  for (double x : xs) {
    out += ' ';
    out += fmt_g17(x);
  }
  out += '\n';
}

inline void append_atoms(std::string& out, std::span<const KernelParams> atoms) {
  for (const KernelParams& atom : atoms) {
    const auto& ln = std::get<LogNormalParams>(atom);  // fits always use the log-normal kernel
    out += ' ';
    out += fmt_g17(ln.mu);
    out += ' ';
    out += fmt_g17(ln.sigma);
  }
  out += '\n';
}

inline std::vector<double> read_doubles(std::string_view rest, std::size_t expect,
                                        const std::string& where) {
  const auto fields = split(trim(rest), ' ');
  std::vector<double> out;
  for (const auto f : fields) {
    if (trim(f).empty()) continue;
    out.push_back(parse_double(f, where));
  }
  if (out.size() != expect)
    throw std::invalid_argument(where + ": expected " + std::to_string(expect) + " values");
  return out;
}

inline std::vector<KernelParams> doubles_to_atoms(std::span<const double> xs,
                                                  const std::string& where) {
  if (xs.size() % 2 != 0) throw std::invalid_argument(where + ": odd atom value count");
  std::vector<KernelParams> atoms;
  atoms.reserve(xs.size() / 2);
  for (std::size_t i = 0; i < xs.size(); i += 2) {
    if (!(xs[i + 1] > 0.0)) throw std::invalid_argument(where + ": nonpositive sigma");
    atoms.push_back(LogNormalParams{xs[i], xs[i + 1]});
  }
  return atoms;
}

inline std::string_view expect_key(std::string_view line, std::string_view key,
                                   const std::string& where) {
  const auto t = trim(line);
  if (t.substr(0, key.size()) != key)
    throw std::invalid_argument(where + ": expected '" + std::string(key) + "' line");
  return t.substr(key.size());
}

}  // namespace detail

inline constexpr std::string_view kTraceMagic = "trace v1";

inline std::string serialize_trace(const AnyTrace& trace, int group_count) {
  std::string out(kTraceMagic);
  out += '\n';
  const McmcConfig& c = std::visit([](const auto& t) -> const McmcConfig& { return t.config; }, trace);
  const std::size_t draws = std::visit([](const auto& t) { return t.states.size(); }, trace);
  const ModelKind model = std::holds_alternative<Trace<DpState>>(trace)  ? ModelKind::dp
                          : std::holds_alternative<Trace<HdpState>>(trace) ? ModelKind::hdp
                                                                           : ModelKind::ndp;
  out += "model " + to_string(model) + '\n';
  out += "groups " + std::to_string(group_count) + '\n';
  out += "truncation_l " + std::to_string(c.truncation_l) + '\n';
  out += "truncation_k " + std::to_string(c.truncation_k) + '\n';
  out += "iterations " + std::to_string(c.iterations) + '\n';
  out += "burn_in " + std::to_string(c.burn_in) + '\n';
  out += "thin " + std::to_string(c.thin) + '\n';
  out += "seed " + std::to_string(c.seed) + '\n';
  out += "draws " + std::to_string(draws) + '\n';

  if (const auto* dp = std::get_if<Trace<DpState>>(&trace)) {
    for (std::size_t d = 0; d < dp->states.size(); ++d) {
      const DpState& s = dp->states[d];
      out += "state " + std::to_string(d) + '\n';
      out += "weights";
      detail::append_doubles(out, s.sticks.w);
      out += "atoms";
      detail::append_atoms(out, s.atoms);
    }
  } else if (const auto* hdp = std::get_if<Trace<HdpState>>(&trace)) {
    for (std::size_t d = 0; d < hdp->states.size(); ++d) {
      const HdpState& s = hdp->states[d];
      out += "state " + std::to_string(d) + '\n';
      out += "atoms";
      detail::append_atoms(out, s.atoms);
      for (std::size_t j = 0; j < s.group_weights.size(); ++j) {
        out += "gweights " + std::to_string(j);
        detail::append_doubles(out, s.group_weights[j]);
      }
    }
  } else {
    const auto& ndp = std::get<Trace<NdpState>>(trace);
    for (std::size_t d = 0; d < ndp.states.size(); ++d) {
      const NdpState& s = ndp.states[d];
      out += "state " + std::to_string(d) + '\n';
      out += "zeta";
      for (int z : s.group_assign) out += ' ' + std::to_string(z);
      out += '\n';
      for (std::size_t k = 0; k < s.cluster_sticks.size(); ++k) {
        out += "cweights " + std::to_string(k);
        detail::append_doubles(out, s.cluster_sticks[k].w);
        out += "catoms " + std::to_string(k);
        detail::append_atoms(out, s.cluster_atoms[k]);
      }
    }
  }
  return out;
}

// Reads a trace back into states that carry the group-level mixtures only;
// per-observation fields stay empty.
inline AnyTrace parse_trace(const std::string& text) {
  detail::LineReader reader{text};
  const auto magic = reader.next();
  if (!magic || detail::trim(*magic) != kTraceMagic)
    throw std::invalid_argument("trace: bad or missing magic line");

  std::map<std::string, std::string> header;
  for (const std::string_view key :
       {"model", "groups", "truncation_l", "truncation_k", "iterations", "burn_in", "thin",
        "seed", "draws"}) {
    const auto line = reader.next();
    if (!line) throw std::invalid_argument("trace: truncated header");
    const auto t = detail::trim(*line);
    const std::size_t sp = t.find(' ');
    if (sp == std::string_view::npos || t.substr(0, sp) != key)
      throw std::invalid_argument("trace: expected header key '" + std::string(key) + "'");
    header[std::string(key)] = std::string(detail::trim(t.substr(sp + 1)));
  }
  const auto model = parse_model(header["model"]);
  if (!model) throw std::invalid_argument("trace: unknown model '" + header["model"] + "'");
  const int groups = static_cast<int>(detail::parse_long(header["groups"], "trace groups"));
  const int L = static_cast<int>(detail::parse_long(header["truncation_l"], "trace L"));
  const int K = static_cast<int>(detail::parse_long(header["truncation_k"], "trace K"));
  const std::size_t draws =
      static_cast<std::size_t>(detail::parse_long(header["draws"], "trace draws"));
  if (groups < 1 || L < 1 || K < 1) throw std::invalid_argument("trace: bad dimensions");

  McmcConfig config;
  config.iterations = static_cast<int>(detail::parse_long(header["iterations"], "trace"));
  config.burn_in = static_cast<int>(detail::parse_long(header["burn_in"], "trace"));
  config.thin = static_cast<int>(detail::parse_long(header["thin"], "trace"));
  config.seed = static_cast<std::uint64_t>(detail::parse_long(header["seed"], "trace"));
  config.truncation_l = L;
  config.truncation_k = K;

  const auto next_line = [&]() -> std::string_view {
    const auto line = reader.next();
    if (!line) throw std::invalid_argument("trace: truncated at line " +
                                           std::to_string(reader.line_no));
    return *line;
  };
  const auto expect_state = [&](std::size_t d) {
    const std::string where = "trace state " + std::to_string(d);
    const auto rest = detail::expect_key(next_line(), "state", where);
    if (static_cast<std::size_t>(detail::parse_long(rest, where)) != d)
      throw std::invalid_argument(where + ": out-of-order state index");
  };

  if (*model == ModelKind::dp) {
    Trace<DpState> trace;
    trace.config = config;
    for (std::size_t d = 0; d < draws; ++d) {
      expect_state(d);
      const std::string where = "trace state " + std::to_string(d);
      DpState s;
      s.sticks.w = detail::read_doubles(detail::expect_key(next_line(), "weights", where),
                                        static_cast<std::size_t>(L), where);
      s.atoms = detail::doubles_to_atoms(
          detail::read_doubles(detail::expect_key(next_line(), "atoms", where),
                               2 * static_cast<std::size_t>(L), where),
          where);
      trace.states.push_back(std::move(s));
    }
    return trace;
  }
  if (*model == ModelKind::hdp) {
    Trace<HdpState> trace;
    trace.config = config;
    for (std::size_t d = 0; d < draws; ++d) {
      expect_state(d);
      const std::string where = "trace state " + std::to_string(d);
      HdpState s;
      s.atoms = detail::doubles_to_atoms(
          detail::read_doubles(detail::expect_key(next_line(), "atoms", where),
                               2 * static_cast<std::size_t>(L), where),
          where);
      for (int j = 0; j < groups; ++j) {
        auto rest = detail::expect_key(next_line(), "gweights", where);
        const auto t = detail::trim(rest);
        const std::size_t sp = t.find(' ');
        if (sp == std::string_view::npos || detail::parse_long(t.substr(0, sp), where) != j)
          throw std::invalid_argument(where + ": out-of-order group weights");
        s.group_weights.push_back(
            detail::read_doubles(t.substr(sp), static_cast<std::size_t>(L), where));
      }
      trace.states.push_back(std::move(s));
    }
    return trace;
  }
  Trace<NdpState> trace;
  trace.config = config;
  for (std::size_t d = 0; d < draws; ++d) {
    expect_state(d);
    const std::string where = "trace state " + std::to_string(d);
    NdpState s;
    {
      const auto zeta = detail::read_doubles(detail::expect_key(next_line(), "zeta", where),
                                             static_cast<std::size_t>(groups), where);
      for (double z : zeta) {
        const int zi = static_cast<int>(z);
        if (zi < 0 || zi >= K) throw std::invalid_argument(where + ": cluster index range");
        s.group_assign.push_back(zi);
      }
    }
    for (int k = 0; k < K; ++k) {
      auto wrest = detail::trim(detail::expect_key(next_line(), "cweights", where));
      std::size_t sp = wrest.find(' ');
      if (sp == std::string_view::npos || detail::parse_long(wrest.substr(0, sp), where) != k)
        throw std::invalid_argument(where + ": out-of-order cluster weights");
      Sticks st;
      st.w = detail::read_doubles(wrest.substr(sp), static_cast<std::size_t>(L), where);
      s.cluster_sticks.push_back(std::move(st));
      auto arest = detail::trim(detail::expect_key(next_line(), "catoms", where));
      sp = arest.find(' ');
      if (sp == std::string_view::npos || detail::parse_long(arest.substr(0, sp), where) != k)
        throw std::invalid_argument(where + ": out-of-order cluster atoms");
      s.cluster_atoms.push_back(detail::doubles_to_atoms(
          detail::read_doubles(arest.substr(sp), 2 * static_cast<std::size_t>(L), where), where));
    }
    trace.states.push_back(std::move(s));
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Curves and metrics CSV
// ---------------------------------------------------------------------------

inline constexpr std::string_view kCurvesHeader = "group,t,mean,lower,upper";
inline constexpr std::string_view kMetricsHeader =
    "model,scenario,replicate,mean_lppd,mean_width,coverage";

struct MetricsRow {
  std::string model;
  std::string scenario;
  int replicate = 0;
  double mean_lppd = 0.0;
  double mean_width = 0.0;
  double coverage = 0.0;  // NaN when no truth is available

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

inline std::string serialize_metrics(std::span<const MetricsRow> rows) {
  std::string out(kMetricsHeader);
  out += '\n';
  for (const MetricsRow& r : rows) {
    out += r.model + ',' + r.scenario + ',' + std::to_string(r.replicate) + ',' +
           detail::fmt_g17(r.mean_lppd) + ',' + detail::fmt_g17(r.mean_width) + ',' +
           detail::fmt_g17(r.coverage) + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Flat key-value config files: `key = value` lines with optional [section]
// headers; keys are reported as "section.key".
// ---------------------------------------------------------------------------

inline std::map<std::string, std::string> parse_config_text(const std::string& text) {
  detail::LineReader reader{text};
  std::map<std::string, std::string> out;
  std::string section;
  while (const auto raw = reader.next()) {
    const auto line = detail::trim(*raw);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::invalid_argument("config line " + std::to_string(reader.line_no) +
                                    ": unterminated section");
      section = std::string(detail::trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      throw std::invalid_argument("config line " + std::to_string(reader.line_no) +
                                  ": expected key = value");
    std::string key(detail::trim(line.substr(0, eq)));
    const std::string value(detail::trim(line.substr(eq + 1)));
    if (key.empty())
      throw std::invalid_argument("config line " + std::to_string(reader.line_no) + ": empty key");
    if (!section.empty()) key = section + "." + key;
    out[key] = value;
  }
  return out;
}

}  // namespace bnpsurv
