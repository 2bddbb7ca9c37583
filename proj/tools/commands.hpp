#pragma once

// Command implementations behind the etcons CLI. Each returns the process
// exit code: 0 ok, 1 usage/IO, 2 assumption violation, 3 verification failure.

#include "etcons/etcons.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace etcons::cli {

namespace fs = std::filesystem;

enum ExitCode : int { ok = 0, usage_error = 1, assumption_violation = 2, verification_failure = 3 };

struct CommonOptions {
  std::string scenario;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool strict = false;
};

namespace detail {

// Maps library exceptions onto exit codes, printing the message.
template <typename F>
int guarded(F&& body, std::ostream& err) {
  try {
    return body();
  } catch (const AssumptionViolated& e) {
    err << "assumption violated: " << e.what() << '\n';
    return assumption_violation;
  } catch (const NotARoot& e) {
    err << "assumption violated: " << e.what() << '\n';
    return assumption_violation;
  } catch (const InvalidSpectralGap& e) {
    err << "assumption violated: " << e.what() << '\n';
    return assumption_violation;
  } catch (const NotHurwitz& e) {
    err << "assumption violated: " << e.what() << '\n';
    return assumption_violation;
  } catch (const DegenerateBound& e) {
    err << "assumption violated: " << e.what() << '\n';
    return assumption_violation;
  } catch (const InvariantBreach& e) {
    err << "invariant breach: " << e.what() << '\n';
    return verification_failure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return usage_error;
  }
}

inline Scenario load(const CommonOptions& o) {
  Scenario s = io::load_scenario(o.scenario);
  if (o.seed) s.seed = *o.seed;
  return s;
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create output directory " + dir.string());
  const fs::path probe = dir / ".etcons_write_probe";
  {
    std::ofstream f(probe);
    if (!f) throw std::runtime_error("output directory " + dir.string() + " is not writable");
  }
  fs::remove(probe, ec);
}

inline void warn_sampling(const Scenario& s, const BoundsReport& b, std::ostream& err) {
  const double tau = b.inter_event_bound(s.mode);
  if (s.tau_s >= tau)
    err << "warning: sampling step tau_s = " << s.tau_s << " is not below the certified inter-event bound "
        << tau << '\n';
}

inline void print_verification(const VerificationReport& v, std::ostream& out) {
  for (const auto& c : v.checks) {
    out << (c.exempt ? "EXEMPT" : c.pass ? "PASS  " : "FAIL  ") << ' ' << c.name;
    if (!c.exempt) out << "  worst_margin=" << c.worst_margin << "  violations=" << c.violations;
    if (!c.note.empty()) out << "  (" << c.note << ')';
    out << '\n';
  }
}

struct Outputs {
  TraceLog trace;
  RunMetrics metrics;
};

inline Outputs simulate_into(const Scenario& s, const fs::path& dir, bool strict) {
  ensure_dir(dir);
  Outputs o{run(s, RunOptions{strict}), {}};
  o.metrics = summarize(o.trace);
  io::write_trace(dir, o.trace, s);
  io::write_json(dir / "metrics.json", io::to_json(o.metrics));
  return o;
}

}  // namespace detail

inline int cmd_certify(const CommonOptions& o, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return detail::guarded(
      [&] {
        const Scenario s = detail::load(o);
        const BoundsReport b = certify(s);
        const std::string text = io::to_json(b).dump(2);
        if (o.out.empty()) {
          out << text << '\n';
        } else {
          std::ofstream f(o.out);
          if (!f) throw std::runtime_error("cannot write " + o.out);
          f << text << '\n';
        }
        detail::warn_sampling(s, b, err);
        return static_cast<int>(ok);
      },
      err);
}

inline int cmd_simulate(const CommonOptions& o, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return detail::guarded(
      [&] {
        const Scenario s = detail::load(o);
        if (o.out.empty()) throw std::runtime_error("--out is required");
        try {
          detail::warn_sampling(s, certify(s), err);
        } catch (const AssumptionViolated& e) {
          err << "warning: scenario is outside the certified regime: " << e.what() << '\n';
        } catch (const DegenerateBound& e) {
          err << "warning: " << e.what() << '\n';
        }
        const auto res = detail::simulate_into(s, o.out, o.strict);
        out << "final spread " << res.metrics.final_spread << ", events " << res.trace.events.size()
            << ", delivered " << res.metrics.delivered << "/" << res.metrics.transmissions << '\n';
        return static_cast<int>(ok);
      },
      err);
}

// Runs (or, with `trace_dir`, reloads) a trace and checks it against the
// certificate.
inline int cmd_verify(const CommonOptions& o, const std::string& trace_dir = {}, std::ostream& out = std::cout,
                      std::ostream& err = std::cerr) {
  return detail::guarded(
      [&] {
        const Scenario s = detail::load(o);
        if (o.out.empty()) throw std::runtime_error("--out is required");
        const BoundsReport b = certify(s);
        detail::ensure_dir(o.out);
        TraceLog trace = trace_dir.empty() ? detail::simulate_into(s, o.out, o.strict).trace : io::read_trace(trace_dir, s);
        const VerificationReport v = verify(trace, b, s);
        io::write_json(fs::path(o.out) / "bounds.json", io::to_json(b));
        io::write_json(fs::path(o.out) / "verification.json", io::to_json(v));
        detail::print_verification(v, out);
        return static_cast<int>(v.passed() ? ok : verification_failure);
      },
      err);
}

inline int cmd_demo(const CommonOptions& o, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return detail::guarded(
      [&] {
        Scenario s = demo_scenario();
        if (o.seed) s.seed = *o.seed;
        const fs::path dir = o.out.empty() ? fs::path("demo-paper-out") : fs::path(o.out);
        detail::ensure_dir(dir);
        io::write_json(dir / "scenario.json", io::scenario_to_json(s));
        const BoundsReport b = certify(s);
        io::write_json(dir / "bounds.json", io::to_json(b));
        detail::warn_sampling(s, b, err);
        const auto res = detail::simulate_into(s, dir, o.strict);
        const VerificationReport v = verify(res.trace, b, s);
        io::write_json(dir / "verification.json", io::to_json(v));
        out << "tau = " << b.tau << ", d = " << b.d_max << ", final spread = " << res.metrics.final_spread << '\n';
        detail::print_verification(v, out);
        return static_cast<int>(v.passed() ? ok : verification_failure);
      },
      err);
}

inline const std::vector<std::string>& sweep_params() {
  static const std::vector<std::string> p = {"drop_prob", "delay_max", "beta", "lambda", "rho", "seed"};
  return p;
}

inline std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument("bad sweep value \"" + cell + "\"");
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("no sweep values given");
  return out;
}

inline Scenario apply_param(Scenario s, const std::string& param, double v) {
  auto integral = [&](double x) {
    if (x != std::floor(x) || x < 0) throw std::invalid_argument(param + " needs nonnegative integer values");
    return x;
  };
  if (param == "drop_prob") {
    s.dropout.drop_prob = v;
  } else if (param == "delay_max") {
    s.delay_max = v;
    s.delay_min = std::min(s.delay_min, v);
  } else if (param == "beta" || param == "lambda") {
    if (!s.trigger.per_agent.empty()) throw std::invalid_argument("cannot sweep " + param + " with per_agent thresholds");
    (param == "beta" ? s.trigger.beta : s.trigger.lambda) = v;
  } else if (param == "rho") {
    s.dropout.rho = static_cast<int>(integral(v));
  } else if (param == "seed") {
    s.seed = static_cast<std::uint64_t>(integral(v));
  } else {
    throw std::invalid_argument("unknown sweep parameter " + param);
  }
  return s;
}

struct SweepRow {
  double value = 0.0;
  std::uint64_t seed = 0;
  std::string status = "ok";
  std::optional<BoundsReport> bounds;
  double gamma_l = 0.0;
  RunMetrics metrics;
  std::optional<bool> verified;
};

inline SweepRow sweep_row(const Scenario& s, double value) {
  SweepRow row;
  row.value = value;
  row.seed = s.seed;
  row.gamma_l = gamma_loss(s.trigger.effective_beta(), s.trigger.effective_lambda(), s.dropout.rho,
                           s.trigger.delta_bar, 0.0);
  try {
    row.bounds = certify(s);
  } catch (const Error& e) {
    row.status = "uncertified";
  }
  const TraceLog trace = run(s);
  row.metrics = summarize(trace);
  if (row.bounds) row.verified = verify(trace, *row.bounds, s).passed();
  return row;
}

inline int cmd_sweep(const CommonOptions& o, const std::string& param, const std::string& values, unsigned jobs = 0,
                     std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return detail::guarded(
      [&] {
        if (std::find(sweep_params().begin(), sweep_params().end(), param) == sweep_params().end())
          throw std::invalid_argument("unknown sweep parameter \"" + param + "\"");
        const Scenario base = detail::load(o);
        if (o.out.empty()) throw std::runtime_error("--out is required");
        const auto vals = parse_values(values);
        std::vector<Scenario> rows;
        for (std::size_t k = 0; k < vals.size(); ++k) {
          Scenario s = apply_param(base, param, vals[k]);
          if (param != "seed") s.seed = mix_seed(base.seed, k);
          validate_scenario(s);
          rows.push_back(std::move(s));
        }
        detail::ensure_dir(o.out);

        const unsigned workers = std::max(1u, jobs ? jobs : std::thread::hardware_concurrency());
        std::vector<SweepRow> results(rows.size());
        for (std::size_t start = 0; start < rows.size(); start += workers) {
          std::vector<std::future<SweepRow>> batch;
          for (std::size_t k = start; k < std::min(rows.size(), start + workers); ++k)
            batch.push_back(std::async(std::launch::async, sweep_row, std::cref(rows[k]), vals[k]));
          for (std::size_t k = 0; k < batch.size(); ++k) results[start + k] = batch[k].get();
        }

        const fs::path dir(o.out);
        std::ofstream csv(dir / "sweep.csv");
        if (!csv) throw std::runtime_error("cannot write sweep.csv");
        csv << "param,value,seed,status,gamma_l,tau,d_max,final_spread,events,threshold_events,timeout_events,"
               "transmissions,delivered,dropped,max_consecutive_drops,min_inter_event,max_inter_event,verified\n";
        auto opt = [](const std::optional<BoundsReport>& b, double BoundsReport::*field) {
          return b ? io::format_value((*b).*field) : std::string();
        };
        for (const auto& r : results) {
          std::size_t events = 0;
          for (auto c : r.metrics.events_per_agent) events += c;
          csv << param << ',' << io::format_value(r.value) << ',' << r.seed << ',' << r.status << ','
              << io::format_value(r.gamma_l) << ',' << opt(r.bounds, &BoundsReport::tau) << ','
              << opt(r.bounds, &BoundsReport::d_max) << ',' << io::format_value(r.metrics.final_spread) << ','
              << events << ',' << r.metrics.threshold_events << ',' << r.metrics.timeout_events << ','
              << r.metrics.transmissions << ',' << r.metrics.delivered << ',' << r.metrics.dropped << ','
              << r.metrics.max_consecutive_drops << ',' << io::format_value(r.metrics.min_inter_event) << ','
              << io::format_value(r.metrics.max_inter_event) << ','
              << (r.verified ? (*r.verified ? "1" : "0") : "") << '\n';
        }
        out << "wrote " << (dir / "sweep.csv").string() << " (" << results.size() << " rows)\n";
        return static_cast<int>(ok);
      },
      err);
}

}  // namespace etcons::cli
