#pragma once

// Command-line front end: simulate / scale / bounds / oracle / diagnose / check.
//
// Exit codes: 0 ok, 1 usage error, 2 check failed, 3 I/O failure.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "thinlab/checks.hpp"
#include "thinlab/experiments.hpp"
#include "thinlab/oracle.hpp"
#include "thinlab/thinlab.hpp"

namespace thinlab::cli {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode : int { kOk = 0, kUsage = 1, kCheckFailed = 2, kIo = 3 };

class usage_error : public config_error {
 public:
  using config_error::config_error;
};

class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown by parse_args for --help / --version; carries the text to print.
struct help_exit {
  std::string text;
};

struct CliConfig {
  std::string subcommand;
  std::map<std::string, std::string> params;  ///< long flag name -> value
  std::string format;                         ///< csv | json
  std::string out;                            ///< empty: stdout
  bool meta = true;
  unsigned workers = 1;
  bool check = false;  ///< oracle --check

  bool has(const std::string& key) const { return params.count(key) != 0; }
  const std::string& get(const std::string& key) const {
    auto it = params.find(key);
    if (it == params.end()) throw usage_error("missing required flag --" + key);
    return it->second;
  }
  std::string get_or(const std::string& key, std::string fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  }
};

namespace detail {

inline std::uint64_t to_u64(const std::string& flag, const std::string& v) {
  std::uint64_t out = 0;
  // accept 1e6-style integers as well
  if (v.find_first_of("eE") != std::string::npos) {
    char* end = nullptr;
    const double d = std::strtod(v.c_str(), &end);
    if (*end || d < 0 || d != std::floor(d) || d > 1.8e19)
      throw usage_error("--" + flag + ": not a non-negative integer: '" + v + "'");
    return static_cast<std::uint64_t>(d);
  }
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || p != v.data() + v.size())
    throw usage_error("--" + flag + ": not a non-negative integer: '" + v + "'");
  return out;
}

inline double parse_double(const std::string& flag, const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || *end || !std::isfinite(d)) throw usage_error("--" + flag + ": not a number: '" + v + "'");
  return d;
}

inline std::vector<std::string> split(const std::string& s, char sep = ',') {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) parts.push_back(cur);
  if (parts.empty()) parts.emplace_back();
  return parts;
}

/// Shortest decimal form of x rounded to `digits` significant digits.
inline std::string fmt(double x, int digits = 6) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

/// x rounded to `digits` significant digits, for JSON emission.
inline double round_sig(double x, int digits = 6) {
  if (x == 0.0 || !std::isfinite(x)) return x;
  return std::strtod(fmt(x, digits).c_str(), nullptr);
}

struct FlagSpec {
  const char* name;   // long name
  const char* alias;  // "-n" style short form or ""
  const char* help;
};

inline const std::map<std::string, std::vector<FlagSpec>>& flag_table() {
  static const std::map<std::string, std::vector<FlagSpec>> table = {
      {"simulate",
       {{"n", "-n", "bin count"},
        {"rho", "", "load factor: decimal or p/q; t = floor(rho*n)"},
        {"t", "-t", "explicit ball count"},
        {"strategy", "", "threshold:<l>[,k=<k>] | threshold:auto | one-choice | always-reject | two-choices"},
        {"trials", "", "independent runs"},
        {"seed", "", "64-bit base seed"}}},
      {"scale",
       {{"grid", "", "ascending comma-separated bin counts"},
        {"rho", "", "load factor (default 1)"},
        {"strategy", "", "strategy string"},
        {"trials", "", "runs per grid point"},
        {"seed", "", "base seed"}}},
      {"bounds",
       {{"name", "", "lemma22|lemma23|prop41|prop51|target_load|threshold_L|lower_ell|stage_params|rejection_budget"},
        {"n", "-n", "bin count (comma list for grid)"},
        {"rho", "", "load factor (comma list)"},
        {"theta", "", "load fraction in [0,1] (comma list)"},
        {"a", "-a", "level (comma list)"},
        {"set-size", "", "subset size |S| (comma list)"},
        {"eta", "", "eta > 0 (comma list)"},
        {"epsilon", "", "epsilon > 0 (comma list)"}}},
      {"oracle",
       {{"n", "-n", "bin count"},
        {"t", "-t", "ball count"},
        {"strategy", "", "strategy for the enumerated pmf (default one-choice)"}}},
      {"diagnose",
       {{"n", "-n", "bin count"},
        {"rho", "", "load factor"},
        {"t", "-t", "explicit ball count"},
        {"strategy", "", "strategy string"},
        {"seed", "", "run seed"},
        {"epsilon", "", "stage epsilon in (0,2) (default 0.5)"},
        {"trace-in", "", "read the trace from this JSON file instead of running"},
        {"trace-out", "", "also write the trace JSON here"}}},
      {"check",
       {{"suite", "", "engine|strategies|bounds|oracle|all (default all)"},
        {"cases", "", "random cases per property (default 200)"},
        {"seed", "", "seed for case generation"}}},
  };
  return table;
}

inline std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw usage_error("--config: invalid JSON: " + std::string(e.what()));
  }
  if (!j.is_object()) throw usage_error("--config: top level must be an object");
  std::map<std::string, std::string> out;
  for (const auto& [k, v] : j.items()) {
    if (v.is_string()) out[k] = v.get<std::string>();
    else if (v.is_array()) {
      std::string joined;
      for (const auto& e : v) joined += (joined.empty() ? "" : ",") + (e.is_string() ? e.get<std::string>() : e.dump());
      out[k] = joined;
    } else {
      out[k] = v.dump();
    }
  }
  return out;
}

}  // namespace detail

/// Parses argv into a validated config. Throws usage_error (or io_error for an
/// unreadable --config file).
inline CliConfig parse_args(int argc, const char* const* argv) {
  CLI::App app{"thinlab: two-thinning balls-into-bins laboratory", "thinlab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  CliConfig cfg;
  std::map<std::string, std::map<std::string, std::string>> values;
  std::map<std::string, CLI::App*> subs;
  std::string format, out, config_path, workers_text;
  bool no_meta = false;
  bool check = false;

  for (const auto& [sub, flags] : detail::flag_table()) {
    auto* s = app.add_subcommand(sub);
    subs[sub] = s;
    for (const auto& f : flags) {
      std::string names = std::string("--") + f.name;
      if (*f.alias) names = std::string(f.alias) + "," + names;
      s->add_option(names, values[sub][f.name], f.help);
    }
    s->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    s->add_option("--out", out, "output file (default stdout)");
    s->add_option("--config", config_path, "JSON file of flag values; flags on the command line win");
    s->add_option("--workers", workers_text, "parallel trials (default $THINLAB_WORKERS or 1)");
    s->add_flag("--no-meta", no_meta, "omit the metadata header");
    if (sub == "oracle") s->add_flag("--check", check, "run the oracle invariant battery");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    std::ostringstream os;
    app.exit(e, os, os);
    throw help_exit{os.str()};
  } catch (const CLI::ParseError& e) {
    throw usage_error(e.what());
  }

  for (const auto& [name, s] : subs) {
    if (!s->parsed()) continue;
    cfg.subcommand = name;
    std::map<std::string, std::string> given;
    for (const auto& f : detail::flag_table().at(name))
      if (s->count(std::string("--") + f.name) > 0) given[f.name] = values[name][f.name];
    if (!config_path.empty()) {
      auto file = detail::read_config_file(config_path);
      const bool flags_pick_size = given.count("rho") || given.count("t");
      for (auto& [k, v] : file) {
        bool known = false;
        for (const auto& f : detail::flag_table().at(name)) known = known || k == f.name;
        if (k == "format" && format.empty()) { format = v; continue; }
        if (k == "workers" && workers_text.empty()) { workers_text = v; continue; }
        if (k == "format" || k == "workers") continue;
        if (!known) throw usage_error("--config: unknown key '" + k + "' for " + name);
        if (flags_pick_size && (k == "rho" || k == "t")) continue;
        given.emplace(k, v);
      }
    }
    cfg.params = std::move(given);
  }

  cfg.check = check;
  cfg.meta = !no_meta;
  cfg.out = out;
  if (!format.empty() && format != "csv" && format != "json") throw usage_error("--format must be csv or json");
  const bool csv_default = cfg.subcommand == "simulate" || cfg.subcommand == "scale";
  cfg.format = format.empty() ? (csv_default ? "csv" : "json") : format;

  if (workers_text.empty())
    if (const char* env = std::getenv("THINLAB_WORKERS")) workers_text = env;
  if (!workers_text.empty()) {
    const auto w = detail::to_u64("workers", workers_text);
    if (w == 0 || w > 1024) throw usage_error("--workers must be in [1, 1024]");
    cfg.workers = static_cast<unsigned>(w);
  }

  // Cross-flag validation.
  if (cfg.has("rho") && cfg.has("t")) throw usage_error("--rho and -t are mutually exclusive");
  const auto sub = cfg.subcommand;
  if (sub == "simulate" || sub == "diagnose" || sub == "oracle") {
    std::uint64_t n = 0;
    if (cfg.has("n")) n = detail::to_u64("n", cfg.get("n"));
    if (cfg.has("rho")) (void)parse_ratio(cfg.get("rho"));
    if (cfg.has("strategy")) {
      try {
        (void)parse_strategy(cfg.get("strategy"), n);
      } catch (const config_error& e) {
        throw usage_error("--strategy: " + std::string(e.what()));
      }
    }
    if (sub != "diagnose" || !cfg.has("trace-in")) {
      if (!cfg.has("n")) throw usage_error("missing required flag -n");
      if (n == 0) throw usage_error("-n must be at least 1");
      if (sub != "oracle" && !cfg.has("rho") && !cfg.has("t"))
        throw usage_error("one of --rho or -t is required");
      if (sub == "oracle" && !cfg.has("t") && !cfg.check) throw usage_error("missing required flag -t");
    }
  }
  if (sub == "scale") {
    if (!cfg.has("grid")) throw usage_error("missing required flag --grid");
    if (cfg.has("strategy")) {
      // "auto" is resolved per grid point later; validate the grammar only
      const auto& s = cfg.get("strategy");
      if (s.rfind("threshold:auto", 0) != 0) {
        try {
          (void)parse_strategy(s, 3);
        } catch (const config_error& e) {
          throw usage_error("--strategy: " + std::string(e.what()));
        }
      }
    }
  }
  if (sub == "bounds" && !cfg.has("name")) throw usage_error("missing required flag --name");
  if (sub == "check") {
    const auto suite = cfg.get_or("suite", "all");
    if (suite != "all" && suite != "engine" && suite != "strategies" && suite != "bounds" && suite != "oracle")
      throw usage_error("--suite: unknown suite '" + suite + "'");
  }
  return cfg;
}

/// Parses a whitespace-separated command line (no quoting).
inline CliConfig parse_args(const std::string& line) {
  std::vector<std::string> words{"thinlab"};
  std::istringstream is(line);
  for (std::string w; is >> w;) words.push_back(w);
  std::vector<const char*> argv;
  for (const auto& w : words) argv.push_back(w.c_str());
  return parse_args(static_cast<int>(argv.size()), argv.data());
}

namespace detail {

inline std::string meta_line(const CliConfig& cfg) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return std::string("thinlab ") + kVersion + " " + cfg.subcommand + " generated " + stamp;
}

/// Emits CSV or JSON, prefixing the metadata line (CSV comment) or "meta"
/// key (JSON) unless disabled.
class Emitter {
 public:
  explicit Emitter(const CliConfig& cfg) : cfg_(cfg) {}

  void csv(const std::string& body) {
    if (cfg_.meta) text_ += "# " + meta_line(cfg_) + "\n";
    text_ += body;
  }

  void json(nlohmann::ordered_json j) {
    if (cfg_.meta) {
      nlohmann::ordered_json wrapped;
      wrapped["meta"] = meta_line(cfg_);
      for (auto& [k, v] : j.items()) wrapped[k] = v;
      if (!j.is_object()) wrapped["data"] = j;
      j = std::move(wrapped);
    }
    text_ += j.dump(2) + "\n";
  }

  void flush(std::ostream& console) const {
    if (cfg_.out.empty()) {
      console << text_;
      console.flush();
      if (!console) throw io_error("failed writing to stdout");
      return;
    }
    std::ofstream f(cfg_.out, std::ios::binary);
    if (!f) throw io_error("cannot open output file '" + cfg_.out + "'");
    f << text_;
    f.close();
    if (!f) throw io_error("failed writing '" + cfg_.out + "'");
  }

 private:
  const CliConfig& cfg_;
  std::string text_;
};

inline ExperimentConfig experiment_from(const CliConfig& cfg) {
  ExperimentConfig e;
  e.n = to_u64("n", cfg.get("n"));
  if (cfg.has("rho")) e.rho = parse_ratio(cfg.get("rho"));
  if (cfg.has("t")) e.t = to_u64("t", cfg.get("t"));
  e.strategy = cfg.get_or("strategy", "one-choice");
  e.trials = to_u64("trials", cfg.get_or("trials", "1"));
  e.base_seed = to_u64("seed", cfg.get_or("seed", "0"));
  e.workers = cfg.workers;
  return e;
}

inline nlohmann::ordered_json summary_json(const SummaryStats& s) {
  nlohmann::ordered_json j;
  j["n"] = s.n;
  j["t"] = s.t;
  j["strategy"] = s.strategy;
  j["trials"] = s.per_trial_maxload.size();
  j["mean"] = round_sig(s.mean);
  j["median"] = s.median;
  j["quantiles"] = {{"p50", s.p50}, {"p90", s.p90}, {"p99", s.p99}, {"max", s.max}};
  j["min"] = s.min;
  j["mean_rejections"] = round_sig(s.mean_rejections);
  j["target"] = s.target ? nlohmann::ordered_json(round_sig(*s.target)) : nlohmann::ordered_json();
  j["normalized_ratio"] =
      s.normalized_ratio ? nlohmann::ordered_json(round_sig(*s.normalized_ratio)) : nlohmann::ordered_json();
  j["per_trial_maxload"] = s.per_trial_maxload;
  j["per_trial_rejections"] = s.per_trial_rejections;
  j["seeds"] = s.seeds;
  return j;
}

inline int run_simulate(const CliConfig& cfg, Emitter& em) {
  const auto s = run_trials(experiment_from(cfg));
  if (cfg.format == "csv") {
    std::string body = "trial,seed,maxload,rejections\n";
    for (std::size_t i = 0; i < s.seeds.size(); ++i)
      body += std::to_string(i) + "," + std::to_string(s.seeds[i]) + "," +
              std::to_string(s.per_trial_maxload[i]) + "," + std::to_string(s.per_trial_rejections[i]) + "\n";
    em.csv(body);
  } else {
    em.json(summary_json(s));
  }
  return kOk;
}

inline int run_scale(const CliConfig& cfg, Emitter& em) {
  std::vector<std::uint64_t> grid;
  for (const auto& g : split(cfg.get("grid"))) grid.push_back(to_u64("grid", g));
  for (auto n : grid)
    if (n < 3) throw usage_error("--grid: every n must be at least 3");
  if (!std::is_sorted(grid.begin(), grid.end())) throw usage_error("--grid must be ascending");
  const auto rows = scaling_study(grid, parse_ratio(cfg.get_or("rho", "1")), cfg.get_or("strategy", "threshold:auto"),
                                  to_u64("trials", cfg.get_or("trials", "1")),
                                  to_u64("seed", cfg.get_or("seed", "0")), cfg.workers);
  if (cfg.format == "csv") {
    std::string body = "n,target,median_maxload,ratio,trials\n";
    for (const auto& r : rows)
      body += std::to_string(r.n) + "," + fmt(r.target) + "," + std::to_string(r.median_maxload) + "," +
              fmt(r.ratio) + "," + std::to_string(r.trials) + "\n";
    em.csv(body);
  } else {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : rows)
      arr.push_back({{"n", r.n},
                     {"strategy", r.strategy},
                     {"target", round_sig(r.target)},
                     {"median_maxload", r.median_maxload},
                     {"ratio", round_sig(r.ratio)},
                     {"trials", r.trials}});
    nlohmann::ordered_json j;
    j["rows"] = arr;
    em.json(j);
  }
  return kOk;
}

inline nlohmann::ordered_json report_json(const BoundReport& r) {
  nlohmann::ordered_json j;
  j["name"] = r.name;
  nlohmann::ordered_json in;
  for (const auto& [k, v] : r.inputs) in[k] = round_sig(v, 12);
  j["inputs"] = in;
  j["value"] = round_sig(r.value, 12);
  j["clamped"] = r.clamped ? nlohmann::ordered_json(round_sig(*r.clamped, 12)) : nlohmann::ordered_json();
  for (const auto& [k, v] : r.extras) j[k] = round_sig(v, 12);
  return j;
}

inline int run_bounds(const CliConfig& cfg, Emitter& em) {
  const auto name = cfg.get("name");
  // Cartesian product of every comma list.
  const char* keys[] = {"n", "rho", "theta", "a", "set-size", "eta", "epsilon"};
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
  for (const char* k : keys)
    if (cfg.has(k)) axes.emplace_back(k, split(cfg.get(k)));
  std::vector<BoundReport> reports;
  std::vector<std::size_t> idx(axes.size(), 0);
  for (;;) {
    BoundQuery q;
    for (std::size_t i = 0; i < axes.size(); ++i) {
      const auto& [k, vals] = axes[i];
      const auto& v = vals[idx[i]];
      if (k == "n") q.n = to_u64(k, v);
      else if (k == "a") q.a = static_cast<unsigned>(to_u64(k, v));
      else if (k == "rho") q.rho = parse_ratio(v).value();
      else if (k == "theta") q.theta = parse_double(k, v);
      else if (k == "set-size") q.set_size = parse_double(k, v);
      else if (k == "eta") q.eta = parse_double(k, v);
      else if (k == "epsilon") q.epsilon = parse_double(k, v);
    }
    try {
      reports.push_back(evaluate_bound(name, q));
    } catch (const thinlab::domain_error& e) {
      throw usage_error(e.what());
    }
    std::size_t i = 0;
    for (; i < axes.size(); ++i) {
      if (++idx[i] < axes[i].second.size()) break;
      idx[i] = 0;
    }
    if (i == axes.size()) break;
  }

  if (cfg.format == "json" && reports.size() == 1) {
    em.json(report_json(reports.front()));
  } else if (cfg.format == "json") {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : reports) arr.push_back(report_json(r));
    nlohmann::ordered_json j;
    j["reports"] = arr;
    em.json(j);
  } else {
    std::vector<std::string> in_cols, extra_cols;
    for (const auto& [k, v] : reports.front().inputs) in_cols.push_back(k);
    for (const auto& [k, v] : reports.front().extras) extra_cols.push_back(k);
    std::string body = "name";
    for (const auto& c : in_cols) body += "," + c;
    body += ",value,clamped";
    for (const auto& c : extra_cols) body += "," + c;
    body += "\n";
    for (const auto& r : reports) {
      body += r.name;
      for (const auto& c : in_cols) body += "," + fmt(r.inputs.at(c), 12);
      body += "," + fmt(r.value, 12) + "," + (r.clamped ? fmt(*r.clamped, 12) : "");
      for (const auto& c : extra_cols) body += "," + fmt(r.extras.at(c), 12);
      body += "\n";
    }
    em.csv(body);
  }
  return kOk;
}

inline std::string rational_text(const rational& r) {
  std::ostringstream os;
  os << r;
  return os.str();
}

inline nlohmann::ordered_json checks_json(const CheckReport& rep) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& c : rep) arr.push_back({{"check", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  return arr;
}

inline std::string checks_csv(const CheckReport& rep) {
  std::string body = "check,passed,detail\n";
  for (const auto& c : rep) body += c.name + "," + (c.passed ? "true" : "false") + "," + c.detail + "\n";
  return body;
}

inline int run_oracle(const CliConfig& cfg, Emitter& em) {
  std::optional<std::uint64_t> n, t;
  if (cfg.has("n")) n = to_u64("n", cfg.get("n"));
  if (cfg.has("t")) t = to_u64("t", cfg.get("t"));
  const auto spec = parse_strategy(cfg.get_or("strategy", "one-choice"), n.value_or(0));

  CheckReport rep;
  if (cfg.check) {
    auto instances = default_oracle_instances();
    if (n && t) instances = {{*n, *t}};
    rep = check_oracle(instances);
  }

  nlohmann::ordered_json j;
  std::string body;
  if (n && t) {
    Pmf enumerated, one_choice;
    try {
      enumerated = exact_maxload_distribution(*n, *t, spec);
      one_choice = exact_one_choice_maxload(*n, *t);
    } catch (const size_guard_error& e) {
      throw usage_error(e.what());
    }
    std::uint64_t top = 0;
    if (!enumerated.support.empty()) top = std::max(top, enumerated.support.back());
    if (!one_choice.support.empty()) top = std::max(top, one_choice.support.back());
    j["n"] = *n;
    j["t"] = *t;
    j["strategy"] = spec.to_string();
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    body = "maxload,p_strategy,p_one_choice,p_strategy_exact,p_one_choice_exact\n";
    for (std::uint64_t a = 0; a <= top; ++a) {
      const auto ps = enumerated.at(a), po = one_choice.at(a);
      rows.push_back({{"maxload", a},
                      {"p_strategy", round_sig(to_double(ps), 12)},
                      {"p_one_choice", round_sig(to_double(po), 12)},
                      {"p_strategy_exact", rational_text(ps)},
                      {"p_one_choice_exact", rational_text(po)}});
      body += std::to_string(a) + "," + fmt(to_double(ps), 12) + "," + fmt(to_double(po), 12) + "," +
              rational_text(ps) + "," + rational_text(po) + "\n";
    }
    j["pmf"] = rows;
  }
  if (cfg.check) {
    j["checks"] = checks_json(rep);
    if (!body.empty()) body += "\n";
    body += checks_csv(rep);
  }
  if (cfg.format == "csv") em.csv(body);
  else em.json(j);
  return cfg.check && !all_passed(rep) ? kCheckFailed : kOk;
}

inline int run_diagnose(const CliConfig& cfg, Emitter& em) {
  Trace tr;
  if (cfg.has("trace-in")) {
    std::ifstream in(cfg.get("trace-in"));
    if (!in) throw io_error("cannot open trace '" + cfg.get("trace-in") + "'");
    try {
      tr = read_trace_json(in);
    } catch (const nlohmann::json::exception& e) {
      throw usage_error("--trace-in: " + std::string(e.what()));
    } catch (const std::runtime_error& e) {
      throw usage_error("--trace-in: " + std::string(e.what()));
    }
  } else {
    const auto e = experiment_from(cfg);
    tr = run(e.n, e.balls(), e.strategy_spec(), e.base_seed);
  }
  if (cfg.has("trace-out")) {
    std::ofstream f(cfg.get("trace-out"), std::ios::binary);
    if (!f) throw io_error("cannot open '" + cfg.get("trace-out") + "'");
    write_trace_json(f, tr);
    if (!f) throw io_error("failed writing trace");
  }
  const double epsilon = parse_double("epsilon", cfg.get_or("epsilon", "0.5"));
  const double rho = cfg.has("rho") ? parse_ratio(cfg.get("rho")).value()
                                    : static_cast<double>(tr.params.t) / tr.params.n;
  if (tr.params.n < 3) throw usage_error("diagnose needs n >= 3");
  StageDiagnostics d;
  try {
    d = stage_diagnostics(tr, rho, epsilon);
  } catch (const std::exception& e) {
    throw usage_error(e.what());
  }
  const auto rs = rejection_stats(tr);

  if (cfg.format == "csv") {
    std::string body = "k,ball,s_size,threshold,e,maxload,f\n";
    for (const auto& r : d.per_stage)
      body += std::to_string(r.k) + "," + std::to_string(r.ball) + "," + std::to_string(r.s_size) + "," +
              fmt(r.threshold) + "," + (r.e ? "true" : "false") + "," + std::to_string(r.maxload) + "," +
              (r.f ? "true" : "false") + "\n";
    em.csv(body);
  } else {
    nlohmann::ordered_json j;
    j["n"] = tr.params.n;
    j["t"] = tr.params.t;
    j["strategy"] = tr.params.strategy.to_string();
    j["seed"] = tr.params.seed;
    j["maxload"] = max_load(tr.final_state);
    j["stage_params"] = {{"ell", d.params.ell},
                         {"s", d.params.s},
                         {"w", d.params.w},
                         {"zeta", round_sig(d.params.zeta)},
                         {"rho", round_sig(d.rho)},
                         {"epsilon", round_sig(d.epsilon)}};
    j["s0_size"] = d.s0_size;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& r : d.per_stage)
      rows.push_back({{"k", r.k},
                      {"ball", r.ball},
                      {"s_size", r.s_size},
                      {"threshold", round_sig(r.threshold)},
                      {"e", r.e},
                      {"maxload", r.maxload},
                      {"f", r.f}});
    j["per_stage"] = rows;
    j["uninspected_balls"] = d.uninspected_balls;
    j["rejections"] = {{"total", rs.total_rejections},
                       {"budget", round_sig(rs.budget)},
                       {"ratio", round_sig(rs.ratio)}};
    em.json(j);
  }
  return kOk;
}

inline int run_check(const CliConfig& cfg, Emitter& em) {
  const auto suite = cfg.get_or("suite", "all");
  const auto cases = to_u64("cases", cfg.get_or("cases", "200"));
  const auto seed = to_u64("seed", cfg.get_or("seed", "1"));
  CheckReport rep;
  auto add = [&](const CheckReport& r) { rep.insert(rep.end(), r.begin(), r.end()); };
  if (suite == "all" || suite == "engine") add(check_engine(cases, seed));
  if (suite == "all" || suite == "strategies") add(check_strategies(cases, seed + 1));
  if (suite == "all" || suite == "bounds") add(check_bounds());
  if (suite == "all" || suite == "oracle") add(check_oracle(default_oracle_instances()));
  if (cfg.format == "csv") em.csv(checks_csv(rep));
  else {
    nlohmann::ordered_json j;
    j["suite"] = suite;
    j["checks"] = checks_json(rep);
    em.json(j);
  }
  return all_passed(rep) ? kOk : kCheckFailed;
}

}  // namespace detail

/// Runs a parsed config, writing output to cfg.out or `console`. Errors go to
/// `err`; the return value is the process exit code.
inline int execute(const CliConfig& cfg, std::ostream& console = std::cout, std::ostream& err = std::cerr) {
  detail::Emitter em(cfg);
  int code = kOk;
  try {
    if (cfg.subcommand == "simulate") code = detail::run_simulate(cfg, em);
    else if (cfg.subcommand == "scale") code = detail::run_scale(cfg, em);
    else if (cfg.subcommand == "bounds") code = detail::run_bounds(cfg, em);
    else if (cfg.subcommand == "oracle") code = detail::run_oracle(cfg, em);
    else if (cfg.subcommand == "diagnose") code = detail::run_diagnose(cfg, em);
    else if (cfg.subcommand == "check") code = detail::run_check(cfg, em);
    else throw usage_error("unknown subcommand '" + cfg.subcommand + "'");
    em.flush(console);
  } catch (const io_error& e) {
    err << "thinlab: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    err << "thinlab: " << e.what() << "\n";
    return kUsage;
  }
  return code;
}

/// Full entry point: parse, execute, map errors to exit codes.
inline int main(int argc, const char* const* argv, std::ostream& console = std::cout,
                std::ostream& err = std::cerr) {
  CliConfig cfg;
  try {
    cfg = parse_args(argc, argv);
  } catch (const help_exit& h) {
    console << h.text;
    return kOk;
  } catch (const io_error& e) {
    err << "thinlab: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    err << "thinlab: " << e.what() << "\n";
    return kUsage;
  }
  return execute(cfg, console, err);
}

}  // namespace thinlab::cli
