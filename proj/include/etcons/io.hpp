#pragma once

#include "etcons/certificates.hpp"
#include "etcons/engine.hpp"
#include "etcons/errors.hpp"
#include "etcons/scenario.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace etcons::io {

using json = nlohmann::json;

// Times use 9 decimals; state values round-trip exactly.
inline std::string format_time(double t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9f", t);
  return buf;
}

// Shortest decimal form that parses back to the same double.
inline std::string format_value(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

template <typename T>
json optional_or_null(const std::optional<T>& v) {
  return v ? finite_or_null(*v) : json(nullptr);
}

// ---------------------------------------------------------------- scenario

namespace detail {

inline double number(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number()) throw ScenarioError(std::string("\"") + key + "\" must be a number");
  return v.get<double>();
}

inline std::uint64_t unsigned_integer(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number_unsigned()) throw ScenarioError(std::string("\"") + key + "\" must be a nonnegative integer");
  return v.get<std::uint64_t>();
}

}  // namespace detail

// Parses and validates a scenario object. Unknown keys are rejected.
inline Scenario scenario_from_json(const json& j) {
  static const std::set<std::string> allowed = {
      "adjacency", "x0",       "beta",     "lambda", "delta_bar", "gamma_d", "rho",      "drop_prob",    "delay_min",
      "delay_max", "mode",     "consistency", "t_final", "tau_s",  "seed",    "per_agent", "clock_offsets"};
  static const std::vector<std::string> required = {"adjacency", "x0",      "delta_bar", "gamma_d",
                                                    "rho",       "t_final", "tau_s"};
  if (!j.is_object()) throw ScenarioError("scenario must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) throw ScenarioError("unknown scenario key \"" + key + "\"");
  for (const auto& key : required)
    if (!j.contains(key)) throw ScenarioError("missing scenario key \"" + key + "\"");

  Scenario s;
  const auto& adj = j.at("adjacency");
  if (!adj.is_array()) throw ScenarioError("\"adjacency\" must be an array of arrays");
  std::vector<std::vector<int>> rows;
  for (const auto& row : adj) {
    if (!row.is_array()) throw ScenarioError("\"adjacency\" must be an array of arrays");
    std::vector<int> r;
    for (const auto& v : row) {
      if (!v.is_number_integer()) throw ScenarioError("adjacency entries must be 0 or 1");
      r.push_back(v.get<int>());
    }
    rows.push_back(std::move(r));
  }
  try {
    s.graph = build_graph(rows);
  } catch (const InvalidGraph& e) {
    throw ScenarioError(std::string("invalid adjacency: ") + e.what());
  }

  const auto& x0 = j.at("x0");
  if (!x0.is_array() || x0.size() != s.graph.size())
    throw ScenarioError("\"x0\" must hold one state per agent");
  std::size_t dim = 0;
  for (const auto& row : x0) {
    if (!row.is_array() || row.empty()) throw ScenarioError("each x0 entry must be a nonempty array");
    if (dim == 0) dim = row.size();
    if (row.size() != dim) throw ScenarioError("x0 rows must share one dimension");
  }
  s.x0.resize(static_cast<Eigen::Index>(s.graph.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < x0.size(); ++i)
    for (std::size_t c = 0; c < dim; ++c) {
      const auto& v = x0[i][c];
      if (!v.is_number()) throw ScenarioError("x0 entries must be numbers");
      s.x0(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = v.get<double>();
    }

  auto& p = s.trigger;
  const bool has_per_agent = j.contains("per_agent");
  if (has_per_agent) {
    if (j.contains("beta") || j.contains("lambda"))
      throw ScenarioError("give either beta/lambda or per_agent, not both");
    if (!j.at("per_agent").is_array()) throw ScenarioError("\"per_agent\" must be an array");
    for (const auto& a : j.at("per_agent")) {
      if (!a.is_object() || a.size() != 2 || !a.contains("beta") || !a.contains("lambda"))
        throw ScenarioError("per_agent entries must be {\"beta\": .., \"lambda\": ..}");
      p.per_agent.push_back({detail::number(a, "beta"), detail::number(a, "lambda")});
    }
    p.beta = p.effective_beta();
    p.lambda = p.effective_lambda();
  } else {
    if (!j.contains("beta") || !j.contains("lambda"))
      throw ScenarioError("missing scenario key \"beta\"/\"lambda\"");
    p.beta = detail::number(j, "beta");
    p.lambda = detail::number(j, "lambda");
  }
  p.delta_bar = detail::number(j, "delta_bar");
  p.gamma_d = detail::number(j, "gamma_d");
  if (j.contains("clock_offsets")) {
    if (!j.at("clock_offsets").is_array()) throw ScenarioError("\"clock_offsets\" must be an array");
    for (const auto& v : j.at("clock_offsets")) {
      if (!v.is_number()) throw ScenarioError("clock offsets must be numbers");
      p.clock_offsets.push_back(v.get<double>());
    }
  }

  const auto& rho = j.at("rho");
  if (!rho.is_number_integer()) throw ScenarioError("\"rho\" must be an integer");
  s.dropout.rho = rho.get<int>();
  s.dropout.drop_prob = j.contains("drop_prob") ? detail::number(j, "drop_prob") : 0.0;
  s.delay_min = j.contains("delay_min") ? detail::number(j, "delay_min") : 0.0;
  s.delay_max = j.contains("delay_max") ? detail::number(j, "delay_max") : s.delay_min;

  const std::string mode = j.value("mode", std::string("theorem"));
  if (mode == "theorem") s.mode = ConsensusMode::theorem;
  else if (mode == "average") s.mode = ConsensusMode::average;
  else throw ScenarioError("\"mode\" must be \"theorem\" or \"average\"");
  const std::string cons = j.value("consistency", std::string("non-consistent"));
  if (cons == "non-consistent") s.consistency = Consistency::non_consistent;
  else if (cons == "consistent") s.consistency = Consistency::consistent;
  else throw ScenarioError("\"consistency\" must be \"non-consistent\" or \"consistent\"");

  s.t_final = detail::number(j, "t_final");
  s.tau_s = detail::number(j, "tau_s");
  s.seed = j.contains("seed") ? detail::unsigned_integer(j, "seed") : 1;

  // Structural checks that are file errors rather than broken hypotheses.
  if (static_cast<std::size_t>(s.x0.rows()) != s.agents()) throw ScenarioError("x0 size mismatch");
  if (!p.per_agent.empty() && p.per_agent.size() != s.agents())
    throw ScenarioError("per_agent must list one entry per agent");
  if (!p.clock_offsets.empty() && p.clock_offsets.size() != s.agents())
    throw ScenarioError("clock_offsets must list one entry per agent");
  return s;
}

inline json scenario_to_json(const Scenario& s) {
  json j;
  j["adjacency"] = s.graph.adjacency_rows();
  json x0 = json::array();
  for (Eigen::Index i = 0; i < s.x0.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index c = 0; c < s.x0.cols(); ++c) row.push_back(s.x0(i, c));
    x0.push_back(row);
  }
  j["x0"] = x0;
  if (s.trigger.per_agent.empty()) {
    j["beta"] = s.trigger.beta;
    j["lambda"] = s.trigger.lambda;
  } else {
    json pa = json::array();
    for (const auto& a : s.trigger.per_agent) pa.push_back({{"beta", a.beta}, {"lambda", a.lambda}});
    j["per_agent"] = pa;
  }
  if (!s.trigger.clock_offsets.empty()) j["clock_offsets"] = s.trigger.clock_offsets;
  j["delta_bar"] = s.trigger.delta_bar;
  j["gamma_d"] = s.trigger.gamma_d;
  j["rho"] = s.dropout.rho;
  j["drop_prob"] = s.dropout.drop_prob;
  j["delay_min"] = s.delay_min;
  j["delay_max"] = s.delay_max;
  j["mode"] = std::string(to_string(s.mode));
  j["consistency"] = std::string(to_string(s.consistency));
  j["t_final"] = s.t_final;
  j["tau_s"] = s.tau_s;
  j["seed"] = s.seed;
  return j;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ScenarioError("malformed JSON in " + path.string() + ": " + e.what());
  }
  return scenario_from_json(j);
}

// ----------------------------------------------------------------- reports

inline json to_json(const BoundsReport& r) {
  json per_agent = json::array();
  for (double t : r.tau_per_agent) per_agent.push_back(finite_or_null(t));
  return json{
      {"root", r.root + 1},
      {"beta", r.beta},
      {"lambda", r.lambda},
      {"beta_hat", r.beta_hat},
      {"lambda_hat", r.lambda_hat},
      {"decay_residual", r.decay_residual},
      {"gamma_l", r.gamma_l},
      {"gamma", r.gamma},
      {"big_gamma", r.big_gamma},
      {"h1", r.h1},
      {"h2", r.h2},
      {"tau", r.tau},
      {"d_max", r.d_max},
      {"tau_at_zero", r.tau_at_zero},
      {"tau_stationary", r.tau_stationary},
      {"d_at_zero", r.d_at_zero},
      {"d_stationary", r.d_stationary},
      {"tau_per_agent", per_agent},
      {"eta0", r.eta0},
      {"l_norm", r.l_norm},
      {"max_in_degree", r.max_in_degree},
      {"inequality_violations", r.inequality_violations},
      {"lprime_norm", optional_or_null(r.lprime_norm)},
      {"k1", optional_or_null(r.k1)},
      {"k2", optional_or_null(r.k2)},
      {"tau_avg", optional_or_null(r.tau_avg)},
      {"d_avg", optional_or_null(r.d_avg)},
  };
}

inline json to_json(const VerificationReport& v) {
  json checks = json::array();
  for (const auto& c : v.checks) {
    checks.push_back({{"name", c.name},
                      {"pass", c.pass},
                      {"exempt", c.exempt},
                      {"worst_margin", finite_or_null(c.worst_margin)},
                      {"first_violation", optional_or_null(c.first_violation)},
                      {"samples", c.samples},
                      {"violations", c.violations},
                      {"note", c.note}});
  }
  return json{{"pass", v.passed()}, {"slack", v.slack}, {"checks", checks}};
}

inline json to_json(const RunMetrics& m) {
  json links = json::array();
  for (const auto& l : m.links)
    links.push_back({{"sender", l.sender + 1},
                     {"receiver", l.receiver + 1},
                     {"sent", l.stats.sent},
                     {"dropped", l.stats.dropped},
                     {"delivered", l.stats.delivered},
                     {"max_consecutive_drops", l.stats.max_consecutive_drops}});
  return json{{"final_spread", m.final_spread},
              {"min_inter_event", finite_or_null(m.min_inter_event)},
              {"max_inter_event", m.max_inter_event},
              {"events_per_agent", m.events_per_agent},
              {"threshold_events", m.threshold_events},
              {"timeout_events", m.timeout_events},
              {"transmissions", m.transmissions},
              {"delivered", m.delivered},
              {"dropped", m.dropped},
              {"max_consecutive_drops", m.max_consecutive_drops},
              {"links", links}};
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// -------------------------------------------------------------------- CSV

inline std::string states_header(std::size_t agents, std::size_t dim) {
  std::string h = "t";
  for (std::size_t i = 1; i <= agents; ++i)
    for (std::size_t c = 1; c <= dim; ++c)
      h += dim == 1 ? ",x" + std::to_string(i) : ",x" + std::to_string(i) + "_" + std::to_string(c);
  return h;
}

inline void write_states_csv(std::ostream& out, const TraceLog& trace) {
  out << states_header(trace.agents(), trace.dim()) << '\n';
  for (std::size_t k = 0; k < trace.steps(); ++k) {
    out << format_time(trace.times[k]);
    for (AgentId i = 0; i < trace.agents(); ++i)
      for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(trace.dim()); ++c)
        out << ',' << format_value(trace.state(k, i)(c));
    out << '\n';
  }
}

inline void write_events_csv(std::ostream& out, const TraceLog& trace) {
  out << "agent,t_k,cause\n";
  for (const auto& e : trace.events) out << e.agent + 1 << ',' << format_time(e.time) << ',' << to_string(e.cause) << '\n';
}

inline void write_deliveries_csv(std::ostream& out, const TraceLog& trace) {
  out << "sender,receiver,sent_at,arrived_at,dropped\n";
  for (const auto& d : trace.deliveries) {
    out << d.sender + 1 << ',' << d.receiver + 1 << ',' << format_time(d.sent_at) << ','
        << (d.arrived_at ? format_time(*d.arrived_at) : std::string()) << ',' << (d.dropped ? 1 : 0) << '\n';
  }
}

inline void write_channel_csv(std::ostream& out, const TraceLog& trace) {
  out << "sender,receiver,sent,dropped,delivered,max_consecutive_drops\n";
  for (const auto& l : trace.links)
    out << l.sender + 1 << ',' << l.receiver + 1 << ',' << l.stats.sent << ',' << l.stats.dropped << ','
        << l.stats.delivered << ',' << l.stats.max_consecutive_drops << '\n';
}

inline void write_delay_histogram_csv(std::ostream& out, const TraceLog& trace, double lo, double hi,
                                      std::size_t bins = 20) {
  out << "bin_lo,bin_hi,count\n";
  if (hi <= lo) {
    out << format_time(lo) << ',' << format_time(hi) << ',' << trace.realized_delays.size() << '\n';
    return;
  }
  std::vector<std::size_t> counts(bins, 0);
  for (double d : trace.realized_delays) {
    auto b = static_cast<std::size_t>((d - lo) / (hi - lo) * static_cast<double>(bins));
    ++counts[std::min(b, bins - 1)];
  }
  for (std::size_t b = 0; b < bins; ++b)
    out << format_time(lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins)) << ','
        << format_time(lo + (hi - lo) * static_cast<double>(b + 1) / static_cast<double>(bins)) << ',' << counts[b]
        << '\n';
}

inline void write_trace(const std::filesystem::path& dir, const TraceLog& trace, const Scenario& s) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name);
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("states.csv");
    write_states_csv(f, trace);
  }
  {
    auto f = open("events.csv");
    write_events_csv(f, trace);
  }
  {
    auto f = open("deliveries.csv");
    write_deliveries_csv(f, trace);
  }
  {
    auto f = open("channel.csv");
    write_channel_csv(f, trace);
  }
  {
    auto f = open("delay_histogram.csv");
    write_delay_histogram_csv(f, trace, s.delay_min, s.delay_max);
  }
}

namespace detail {

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(split(line));
  return rows;
}

}  // namespace detail

// Rebuilds a trace from states/events/deliveries CSVs written by write_trace.
// Inputs are replayed from the event and delivery logs.
inline TraceLog read_trace(const std::filesystem::path& dir, const Scenario& s) {
  const std::size_t n = s.agents();
  const std::size_t dim = s.state_dim();
  TraceLog trace(n, dim, s.tau_s, resolve_root(s));
  auto step_of = [&](const std::string& t) {
    return static_cast<std::size_t>(std::llround(std::stod(t) / s.tau_s));
  };

  const auto state_rows = detail::read_csv(dir / "states.csv");
  std::vector<Eigen::MatrixXd> xs;
  for (const auto& row : state_rows) {
    if (row.size() != 1 + n * dim) throw std::runtime_error("states.csv: wrong column count");
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < dim; ++c)
        x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = std::stod(row[1 + i * dim + c]);
    xs.push_back(std::move(x));
  }
  if (xs.empty()) throw std::runtime_error("states.csv is empty");
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(xs.front().rows(), xs.front().cols());
  for (std::size_t k = 0; k < xs.size(); ++k) trace.push_sample(static_cast<double>(k) * s.tau_s, xs[k], zero);

  for (const auto& row : detail::read_csv(dir / "events.csv")) {
    if (row.size() != 3) throw std::runtime_error("events.csv: wrong column count");
    EventRecord e;
    e.agent = std::stoul(row[0]) - 1;
    e.step = step_of(row[1]);
    e.time = static_cast<double>(e.step) * s.tau_s;
    e.cause = row[2] == "initial" ? TriggerCause::initial
              : row[2] == "timeout" ? TriggerCause::timeout
                                    : TriggerCause::threshold;
    trace.events.push_back(e);
  }
  for (const auto& row : detail::read_csv(dir / "deliveries.csv")) {
    if (row.size() != 5) throw std::runtime_error("deliveries.csv: wrong column count");
    DeliveryRecord d;
    d.sender = std::stoul(row[0]) - 1;
    d.receiver = std::stoul(row[1]) - 1;
    d.sent_step = step_of(row[2]);
    d.sent_at = static_cast<double>(d.sent_step) * s.tau_s;
    if (!row[3].empty()) {
      d.arrived_step = step_of(row[3]);
      d.arrived_at = static_cast<double>(*d.arrived_step) * s.tau_s;
    }
    d.dropped = row[4] == "1";
    trace.deliveries.push_back(d);
  }
  trace.inputs = replay_inputs(trace, s.graph, s.mode);
  return trace;
}

}  // namespace etcons::io
