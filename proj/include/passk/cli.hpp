// cli.hpp: JSON-configured commands behind the `passk` executable.
//
// Every command writes to caller-supplied streams so tests can run them
// in-process. Data outputs carry no timestamps or host details.
#pragma once

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "passk/advantage_shaping.hpp"
#include "passk/error.hpp"
#include "passk/oracle.hpp"
#include "passk/surrogates.hpp"
#include "passk/trainer.hpp"
#include "passk/verify.hpp"

namespace passk::cli {

using json = nlohmann::ordered_json;

enum class Format { Csv, Jsonl };

enum ExitCode : int {
  kExitOk = 0,
  kExitConfigError = 1,
  kExitVerificationFailed = 2,
};

inline Format parse_format(const std::string& s) {
  if (s == "csv") return Format::Csv;
  if (s == "jsonl") return Format::Jsonl;
  throw ConfigError("unknown format '" + s + "' (expected csv or jsonl)");
}

/// 17 significant digits, '.' decimal separator regardless of locale.
inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  for (char* c = buf; *c; ++c) {
    if (*c == ',') *c = '.';
  }
  return buf;
}

// ---------------------------------------------------------------------------
// Config reading

namespace detail {

inline void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

inline int get_int(const json& j, const std::string& key, const std::string& where) {
  const auto& v = j.at(key);
  if (!v.is_number_integer()) throw ConfigError(where + "." + key + ": expected an integer");
  return v.get<int>();
}

inline double get_double(const json& j, const std::string& key, const std::string& where) {
  const auto& v = j.at(key);
  if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a number");
  return v.get<double>();
}

inline bool get_bool(const json& j, const std::string& key, const std::string& where) {
  const auto& v = j.at(key);
  if (!v.is_boolean()) throw ConfigError(where + "." + key + ": expected true or false");
  return v.get<bool>();
}

inline std::string get_string(const json& j, const std::string& key, const std::string& where) {
  const auto& v = j.at(key);
  if (!v.is_string()) throw ConfigError(where + "." + key + ": expected a string");
  return v.get<std::string>();
}

inline const json& get_array(const json& j, const std::string& key, const std::string& where) {
  const auto& v = j.at(key);
  if (!v.is_array() || v.empty()) throw ConfigError(where + "." + key + ": expected a non-empty array");
  return v;
}

inline std::vector<int> get_int_list(const json& j, const std::string& key, const std::string& where) {
  std::vector<int> out;
  for (const auto& v : get_array(j, key, where)) {
    if (!v.is_number_integer()) throw ConfigError(where + "." + key + ": expected integers");
    out.push_back(v.get<int>());
  }
  return out;
}

inline std::vector<double> get_double_list(const json& j, const std::string& key, const std::string& where) {
  std::vector<double> out;
  for (const auto& v : get_array(j, key, where)) {
    if (!v.is_number()) throw ConfigError(where + "." + key + ": expected numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

inline Algorithm algorithm_from(const json& v, const std::string& where) {
  if (!v.is_string()) throw ConfigError(where + ": algorithm id must be a string");
  const auto a = parse_algorithm(v.get<std::string>());
  if (!a) throw ConfigError(where + ": unknown algorithm '" + v.get<std::string>() + "'");
  return *a;
}

inline Surrogate surrogate_from(const json& v, const std::string& where) {
  if (!v.is_string()) throw ConfigError(where + ": surrogate id must be a string");
  const auto s = parse_surrogate(v.get<std::string>());
  if (!s) throw ConfigError(where + ": unknown surrogate '" + v.get<std::string>() + "'");
  return *s;
}

// Library validation failures inside a config become config errors.
template <class F>
void validated(const std::string& where, const F& f) {
  try {
    f();
  } catch (const InvalidInput& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace detail

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// curves: effective gradient weights on the attainable rho_hat grid

struct CurvesConfig {
  int n = 16;
  std::vector<int> ks = {1};
  std::vector<Algorithm> algorithms;
  double lambda = 1.0;    // for entropy_grpo
  bool log_scale = false; // only recorded in the y_scale column
};

inline CurvesConfig parse_curves(const json& j) {
  const std::string w = "curves";
  detail::reject_unknown_keys(j, {"n", "ks", "algorithms", "rho_grid_points", "lambda", "log_scale"}, w);
  CurvesConfig c;
  c.n = detail::get_int(j, "n", w);
  if (c.n < 2) throw ConfigError("curves.n must be >= 2");
  if (j.contains("ks")) c.ks = detail::get_int_list(j, "ks", w);
  for (const auto& a : detail::get_array(j, "algorithms", w)) c.algorithms.push_back(detail::algorithm_from(a, w));
  if (j.contains("rho_grid_points") && detail::get_int(j, "rho_grid_points", w) != c.n - 1) {
    throw ConfigError("curves.rho_grid_points must equal n - 1: rho_hat only takes the values 1/n .. (n-1)/n");
  }
  if (j.contains("lambda")) c.lambda = detail::get_double(j, "lambda", w);
  if (j.contains("log_scale")) c.log_scale = detail::get_bool(j, "log_scale", w);
  for (Algorithm a : c.algorithms) {
    for (int k : c.ks) {
      detail::validated(w, [&] {
        AlgorithmSpec{a, k, c.lambda}.validate();
        if (needs_unbiased_k(a) && k > c.n) throw InvalidInput(std::string(to_string(a)) + ": k exceeds n");
      });
    }
  }
  return c;
}

inline void cmd_curves(const CurvesConfig& c, Format format, std::ostream& out) {
  const char* y_scale = c.log_scale ? "log" : "linear";
  if (format == Format::Csv) out << "rho_hat,algorithm,k,w_plus,w_minus,n_minus,y_scale\n";
  for (Algorithm a : c.algorithms) {
    for (int k : c.ks) {
      for (int n_plus = 1; n_plus < c.n; ++n_plus) {
        const GroupStats s = GroupStats::from_counts(c.n, n_plus);
        const EffectiveWeights w = effective_weights({a, k, c.lambda}, s);
        if (format == Format::Csv) {
          out << fmt(s.rho_hat) << ',' << to_string(a) << ',' << k << ',' << fmt(w.w_plus) << ','
              << fmt(w.w_minus) << ',' << s.n_minus << ',' << y_scale << '\n';
        } else {
          out << json{{"rho_hat", s.rho_hat}, {"algorithm", to_string(a)}, {"k", k},      {"w_plus", w.w_plus},
                      {"w_minus", w.w_minus}, {"n_minus", s.n_minus},      {"y_scale", y_scale}}
                     .dump()
              << '\n';
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// surrogates: F on a uniform grid, raw and normalized to F(1) = 1

struct SurrogatesConfig {
  std::vector<Surrogate> surrogates;
  std::vector<int> ks = {1};
  std::vector<double> lambdas = {1.0};
  int grid_points = 101;
  bool normalize = true;       // false: normalized_value repeats value
  bool x_is_pass_k = false;    // x axis is rho_K instead of rho
};

inline SurrogatesConfig parse_surrogates(const json& j) {
  const std::string w = "surrogates";
  detail::reject_unknown_keys(j, {"surrogates", "ks", "lambdas", "grid_points", "normalize", "x_axis"}, w);
  SurrogatesConfig c;
  for (const auto& s : detail::get_array(j, "surrogates", w)) c.surrogates.push_back(detail::surrogate_from(s, w));
  if (j.contains("ks")) c.ks = detail::get_int_list(j, "ks", w);
  if (j.contains("lambdas")) c.lambdas = detail::get_double_list(j, "lambdas", w);
  if (j.contains("grid_points")) c.grid_points = detail::get_int(j, "grid_points", w);
  if (c.grid_points < 2) throw ConfigError("surrogates.grid_points must be >= 2");
  if (j.contains("normalize")) c.normalize = detail::get_bool(j, "normalize", w);
  if (j.contains("x_axis")) {
    const std::string axis = detail::get_string(j, "x_axis", w);
    if (axis != "rho" && axis != "rho_k") throw ConfigError("surrogates.x_axis must be 'rho' or 'rho_k'");
    c.x_is_pass_k = axis == "rho_k";
  }
  for (int k : c.ks) {
    for (double lam : c.lambdas) detail::validated(w, [&] { SurrogateSpec{Surrogate::Identity, k, lam}.validate(); });
  }
  return c;
}

/// The (k, lambda) combinations a surrogate is emitted for: every k if it
/// depends on k (or the x axis does), every lambda if it depends on lambda.
inline std::vector<SurrogateSpec> surrogate_variants(const SurrogatesConfig& c, Surrogate s) {
  std::vector<SurrogateSpec> out;
  const std::vector<int> ks = uses_k(s) || c.x_is_pass_k ? c.ks : std::vector<int>{1};
  const std::vector<double> lams = s == Surrogate::EntropyReg ? c.lambdas : std::vector<double>{0.0};
  for (int k : ks) {
    for (double lam : lams) out.push_back({s, k, lam});
  }
  return out;
}

inline void cmd_surrogates(const SurrogatesConfig& c, Format format, std::ostream& out) {
  if (format == Format::Csv) out << "x,surrogate,k,lambda,value,normalized_value\n";
  for (Surrogate id : c.surrogates) {
    for (const SurrogateSpec& s : surrogate_variants(c, id)) {
      const double norm = c.normalize ? surrogate_normalizer(s) : 1.0;
      for (int i = 0; i < c.grid_points; ++i) {
        const double x = i == c.grid_points - 1 ? 1.0 : static_cast<double>(i) / (c.grid_points - 1);
        const double rho = c.x_is_pass_k ? rho_of_pass_k(x, s.k) : x;
        const double v = surrogate_eval(s, rho);
        if (format == Format::Csv) {
          out << fmt(x) << ',' << to_string(id) << ',' << s.k << ',' << fmt(s.lambda) << ',' << fmt(v) << ','
              << fmt(v / norm) << '\n';
        } else {
          out << json{{"x", x},          {"surrogate", to_string(id)}, {"k", s.k}, {"lambda", s.lambda},
                      {"value", v},      {"normalized_value", v / norm}}
                     .dump()
              << '\n';
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// train

inline ProblemSpec parse_problem(const json& j, const std::string& where) {
  detail::reject_unknown_keys(j, {"correct_mask", "initial_logits"}, where);
  ProblemSpec p;
  for (const auto& v : detail::get_array(j, "correct_mask", where)) {
    if (v.is_boolean()) {
      p.correct_mask.push_back(v.get<bool>());
    } else if (v.is_number_integer() && (v.get<int>() == 0 || v.get<int>() == 1)) {
      p.correct_mask.push_back(v.get<int>() == 1);
    } else {
      throw ConfigError(where + ".correct_mask: entries must be booleans or 0/1");
    }
  }
  p.initial_logits = detail::get_double_list(j, "initial_logits", where);
  detail::validated(where, [&] { p.validate(); });
  return p;
}

inline AlgorithmSpec parse_algorithm_spec(const json& j, const std::string& where) {
  if (j.is_string()) return {detail::algorithm_from(j, where), 1, 1.0};
  detail::reject_unknown_keys(j, {"id", "k", "lambda"}, where);
  AlgorithmSpec a;
  a.id = detail::algorithm_from(j.at("id"), where);
  if (j.contains("k")) a.k = detail::get_int(j, "k", where);
  if (j.contains("lambda")) a.lambda = detail::get_double(j, "lambda", where);
  return a;
}

inline TrainConfig parse_train(const json& j) {
  const std::string w = "train";
  detail::reject_unknown_keys(
      j, {"problems", "algorithm", "n", "steps", "learning_rate", "seed", "eval_ks", "gradient_mode"}, w);
  TrainConfig c;
  const auto& probs = detail::get_array(j, "problems", w);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    c.problems.push_back(parse_problem(probs[i], w + ".problems[" + std::to_string(i) + "]"));
  }
  c.algorithm = parse_algorithm_spec(j.at("algorithm"), w + ".algorithm");
  if (j.contains("n")) c.n = detail::get_int(j, "n", w);
  if (j.contains("steps")) c.steps = detail::get_int(j, "steps", w);
  if (j.contains("learning_rate")) c.learning_rate = detail::get_double(j, "learning_rate", w);
  if (j.contains("seed")) {
    const auto& s = j.at("seed");
    if (!s.is_number_unsigned()) throw ConfigError("train.seed: expected a non-negative integer");
    c.seed = s.get<std::uint64_t>();
  }
  if (j.contains("eval_ks")) c.eval_ks = detail::get_int_list(j, "eval_ks", w);
  if (j.contains("gradient_mode")) {
    const std::string m = detail::get_string(j, "gradient_mode", w);
    if (m == "sampled") {
      c.gradient_mode = GradientMode::Sampled;
    } else if (m == "expected") {
      c.gradient_mode = GradientMode::Expected;
    } else {
      throw ConfigError("train.gradient_mode must be 'sampled' or 'expected'");
    }
  }
  detail::validated(w, [&] { c.validate(); });
  return c;
}

inline json metrics_json(const MetricsRow& row, const std::vector<int>& eval_ks) {
  json rho_k = json::object(), mean_rho_k = json::object();
  for (std::size_t i = 0; i < eval_ks.size(); ++i) {
    rho_k[std::to_string(eval_ks[i])] = row.rho_k[i];
    mean_rho_k[std::to_string(eval_ks[i])] = row.mean_rho_k[i];
  }
  return json{{"step", row.step},         {"mean_rho", row.mean_rho}, {"mean_rho_k", mean_rho_k},
              {"degenerate_groups", row.degenerate_groups}, {"rho", row.rho}, {"rho_k", rho_k}};
}

inline void write_metrics_csv_header(std::ostream& out, const std::vector<int>& eval_ks, std::size_t problems) {
  out << "step,mean_rho";
  for (int k : eval_ks) out << ",mean_rho_k" << k;
  out << ",degenerate_groups";
  for (std::size_t p = 0; p < problems; ++p) out << ",rho_p" << p;
  for (int k : eval_ks) {
    for (std::size_t p = 0; p < problems; ++p) out << ",rho_k" << k << "_p" << p;
  }
  out << '\n';
}

inline void write_metrics_csv_row(std::ostream& out, const MetricsRow& row) {
  out << row.step << ',' << fmt(row.mean_rho);
  for (double v : row.mean_rho_k) out << ',' << fmt(v);
  out << ',' << row.degenerate_groups;
  for (double v : row.rho) out << ',' << fmt(v);
  for (const auto& per : row.rho_k) {
    for (double v : per) out << ',' << fmt(v);
  }
  out << '\n';
}

/// One-row CSV: configuration echo, initial and final means, total degenerate groups.
inline void write_train_summary(std::ostream& out, const TrainConfig& c, const std::vector<MetricsRow>& rows) {
  const MetricsRow& first = rows.front();
  const MetricsRow& last = rows.back();
  int degenerate = 0;
  for (const auto& r : rows) degenerate += r.degenerate_groups;
  out << "algorithm,k,lambda,n,steps,learning_rate,seed,initial_mean_rho,final_mean_rho";
  for (int k : c.eval_ks) out << ",initial_mean_rho_k" << k << ",final_mean_rho_k" << k;
  out << ",degenerate_groups\n";
  out << to_string(c.algorithm.id) << ',' << c.algorithm.k << ',' << fmt(c.algorithm.lambda) << ',' << c.n << ','
      << c.steps << ',' << fmt(c.learning_rate) << ',' << c.seed << ',' << fmt(first.mean_rho) << ','
      << fmt(last.mean_rho);
  for (std::size_t i = 0; i < c.eval_ks.size(); ++i) out << ',' << fmt(first.mean_rho_k[i]) << ',' << fmt(last.mean_rho_k[i]);
  out << ',' << degenerate << '\n';
}

inline std::vector<MetricsRow> cmd_train(const TrainConfig& c, Format format, std::ostream& out, std::ostream& summary) {
  const auto rows = train(c);
  if (format == Format::Csv) {
    write_metrics_csv_header(out, c.eval_ks, c.problems.size());
    for (const auto& r : rows) write_metrics_csv_row(out, r);
  } else {
    for (const auto& r : rows) out << metrics_json(r, c.eval_ks).dump() << '\n';
  }
  write_train_summary(summary, c, rows);
  return rows;
}

// ---------------------------------------------------------------------------
// verify

struct VerifyConfig {
  verify::Options options;
  std::string fault_injection;  // "" or "grpo_minus_sign"
};

/// Test fixture: GRPO with the sign of A- flipped.
inline oracle::AdvantageFn grpo_minus_sign_fault() {
  return [](const AlgorithmSpec& a, const GroupStats& s) {
    AdvantagePair p = advantage_pair(a, s);
    if (a.id == Algorithm::Grpo) p.a_minus = -p.a_minus;
    return p;
  };
}

inline VerifyConfig parse_verify(const json& j) {
  const std::string w = "verify";
  detail::reject_unknown_keys(j, {"suites", "seeds", "policies_per_seed", "tolerances", "fault_injection"}, w);
  VerifyConfig c;
  auto& o = c.options;
  if (j.contains("suites")) {
    for (const auto& s : detail::get_array(j, "suites", w)) {
      if (!s.is_string()) throw ConfigError("verify.suites: expected strings");
      const auto name = s.get<std::string>();
      const auto& known = verify::suite_names();
      if (std::find(known.begin(), known.end(), name) == known.end()) {
        throw ConfigError("verify.suites: unknown suite '" + name + "'");
      }
      o.suites.push_back(name);
    }
  }
  if (j.contains("seeds")) {
    o.seeds.clear();
    for (const auto& s : detail::get_array(j, "seeds", w)) {
      if (!s.is_number_unsigned()) throw ConfigError("verify.seeds: expected non-negative integers");
      o.seeds.push_back(s.get<std::uint64_t>());
    }
  }
  if (j.contains("policies_per_seed")) o.policies_per_seed = detail::get_int(j, "policies_per_seed", w);
  if (o.policies_per_seed < 1) throw ConfigError("verify.policies_per_seed must be >= 1");
  if (j.contains("tolerances")) {
    const auto& t = j.at("tolerances");
    const std::string wt = w + ".tolerances";
    detail::reject_unknown_keys(t, {"exact", "identity", "finite_diff", "population"}, wt);
    if (t.contains("exact")) o.tol.exact = detail::get_double(t, "exact", wt);
    if (t.contains("identity")) o.tol.identity = detail::get_double(t, "identity", wt);
    if (t.contains("finite_diff")) o.tol.finite_diff = detail::get_double(t, "finite_diff", wt);
    if (t.contains("population")) o.tol.population = detail::get_double(t, "population", wt);
  }
  if (j.contains("fault_injection")) {
    c.fault_injection = detail::get_string(j, "fault_injection", w);
    if (c.fault_injection == "grpo_minus_sign") {
      o.advantages = grpo_minus_sign_fault();
    } else if (!c.fault_injection.empty()) {
      throw ConfigError("verify.fault_injection: unknown fault '" + c.fault_injection + "'");
    }
  }
  return c;
}

/// Returns true iff every check passes.
inline bool cmd_verify(const VerifyConfig& c, std::ostream& out) {
  const auto rows = verify::run(c.options);
  for (const auto& r : rows) out << oracle::to_json(r).dump() << '\n';
  return verify::all_pass(rows);
}

// ---------------------------------------------------------------------------
// Dispatch

/// Metadata written next to data files (`<out>.meta.json`).
inline json run_metadata(const std::string& command, const json& config, Format format) {
  return json{{"command", command},
              {"format", format == Format::Csv ? "csv" : "jsonl"},
              {"number_format", "%.17g"},
              {"config", config}};
}

/// Runs one command end to end. `out` receives the data stream, `side` the
/// train summary when no output file is given, `err` diagnostics. When
/// out_path is non-empty the data go to that file instead, with the train
/// summary in `<out_path>.summary.csv` and metadata in `<out_path>.meta.json`.
inline int run_command(const std::string& command, const std::string& config_path, const std::string& out_path,
                       const std::string& format_name, std::ostream& out, std::ostream& side, std::ostream& err) {
  try {
    const json config = load_json_file(config_path);
    const auto pick = [&](Format fallback) { return format_name.empty() ? fallback : parse_format(format_name); };

    std::ofstream file;
    if (!out_path.empty()) {
      file.open(out_path, std::ios::binary);
      if (!file) throw ConfigError("cannot open output file '" + out_path + "'");
    }
    std::ostream& data = out_path.empty() ? out : file;

    Format format = Format::Csv;
    int code = kExitOk;
    if (command == "curves") {
      format = pick(Format::Csv);
      cmd_curves(parse_curves(config), format, data);
    } else if (command == "surrogates") {
      format = pick(Format::Csv);
      cmd_surrogates(parse_surrogates(config), format, data);
    } else if (command == "train") {
      format = pick(Format::Jsonl);
      const TrainConfig tc = parse_train(config);
      if (out_path.empty()) {
        cmd_train(tc, format, data, side);
      } else {
        std::ofstream summary(out_path + ".summary.csv", std::ios::binary);
        if (!summary) throw ConfigError("cannot open summary file '" + out_path + ".summary.csv'");
        cmd_train(tc, format, data, summary);
      }
    } else if (command == "verify") {
      format = pick(Format::Jsonl);
      if (format != Format::Jsonl) throw ConfigError("verify writes jsonl only");
      code = cmd_verify(parse_verify(config), data) ? kExitOk : kExitVerificationFailed;
    } else {
      throw ConfigError("unknown command '" + command + "'");
    }

    if (!out_path.empty()) {
      std::ofstream meta(out_path + ".meta.json", std::ios::binary);
      meta << run_metadata(command, config, format).dump(2) << '\n';
    }
    if (code == kExitVerificationFailed) err << "verification failed\n";
    return code;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const InvalidInput& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const nlohmann::json::exception& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  }
}

}  // namespace passk::cli
