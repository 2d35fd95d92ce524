#pragma once

// Command-line front end: fit, simulate, coverage and predict subcommands with
// JSON/CSV outputs and a run manifest next to every output set.
// Uses OpenSSL for SHA-256 digests, so targets including this header link
// libcrypto.

#include <openssl/evp.h>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mmanova/criteria.hpp"
#include "mmanova/io.hpp"
#include "mmanova/predictive.hpp"
#include "mmanova/simulation.hpp"

namespace mmanova::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode { ok = 0, io_error = 1, validation_error = 2, numerical_error = 3 };

inline int exit_code(Errc code) {
  switch (code) {
    case Errc::io:
    case Errc::parse: return io_error;
    case Errc::not_positive_definite:
    case Errc::non_convergence:
    case Errc::rejection_exhausted:
    case Errc::all_zero: return numerical_error;
    default: return validation_error;
  }
}

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(Errc::io, "SHA-256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

inline std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Records what is needed to repeat a run: the subcommand, its settings,
/// seed, and digests of every input and output.
struct Manifest {
  std::string subcommand;
  std::uint64_t seed = 0;
  std::string config_digest;
  std::vector<std::pair<std::string, std::string>> settings;
  std::vector<std::pair<std::string, std::string>> inputs;   // path, digest
  std::vector<std::pair<std::string, std::string>> outputs;  // file name, digest
  std::string started_at = utc_now();
  std::string finished_at;

  void add_input(const std::string& path, const std::string& bytes) { inputs.emplace_back(path, sha256_hex(bytes)); }

  void write_output(const std::filesystem::path& dir, const std::string& name, const std::string& bytes) {
    write_file((dir / name).string(), bytes);
    outputs.emplace_back(name, sha256_hex(bytes));
  }

  void save(const std::filesystem::path& dir) {
    finished_at = utc_now();
    std::ostringstream s;
    JsonWriter w(s);
    w.begin_object();
    w.field("artifact", "mmanova").field("version", kVersion).field("subcommand", subcommand);
    w.field("seed", static_cast<unsigned long long>(seed)).field("config_digest", config_digest);
    w.key("settings").begin_object();
    for (const auto& [k, v] : settings) w.field(k, v);
    w.end_object();
    w.key("inputs").begin_array();
    for (const auto& [p, d] : inputs) w.begin_object().field("path", p).field("sha256", d).end_object();
    w.end_array();
    w.key("outputs").begin_array();
    for (const auto& [p, d] : outputs) w.begin_object().field("file", p).field("sha256", d).end_object();
    w.end_array();
    w.field("started_at", started_at).field("finished_at", finished_at);
    w.end_object();
    w.finish();
    write_file((dir / "manifest.json").string(), s.str());
  }
};

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw Error(Errc::io, "cannot create directory '" + dir.string() + "'");
}

// ---------------------------------------------------------------- fit

struct FitOptions {
  std::string data_path;
  std::string config_path;
  std::string out_dir;
  bool draws_csv = false;
  std::optional<std::size_t> threads;
};

struct LoadedModel {
  std::string data_bytes;
  std::string config_bytes;
  ModelConfig config;
  Dataset data;
  ModelSpec model;
};

inline LoadedModel load_model(const std::string& data_path, const std::string& config_path) {
  LoadedModel m;
  m.config_bytes = read_file(config_path);
  m.data_bytes = read_file(data_path);
  m.config = parse_config(m.config_bytes);
  m.data = dataset_from_csv(parse_csv(m.data_bytes), m.config);
  m.model = build_model(m.config, m.data);
  return m;
}

inline std::string intervals_json(const ModelSpec& model, const ModelConfig& config, const Fit& fit,
                                  const PosteriorDraws& post) {
  std::ostringstream s;
  JsonWriter w(s);
  w.begin_object();
  w.field("draws", post.draws).field("seed", static_cast<unsigned long long>(config.seed));
  w.field("quantiles", config.quantiles);
  w.key("intervals").begin_array();
  for (const auto& iv : summarize_posterior(post, config.quantiles)) {
    w.begin_object();
    w.field("batch", iv.batch).field("parameter", to_string(iv.parameter)).field("criterion", to_string(iv.criterion));
    w.field("values", iv.values);
    w.end_object();
  }
  w.end_array();
  w.key("batches").begin_array();
  for (std::size_t b = 0; b < model.batches.size(); ++b) {
    const auto& spec = model.batches[b];
    const auto& bd = post.batches[b];
    w.begin_object();
    w.field("name", spec.name).field("kind", to_string(spec.kind)).field("levels", spec.levels);
    w.field("constraints", spec.constraint_count()).field("nu", spec.dof());
    w.field("posterior_dof", spec.posterior_dof()).field("variance_factor", spec.variance_factor());
    w.field("has_covariance", bd.has_covariance);
    w.field("rejections", bd.total_rejections()).field("truncations", bd.total_truncations());
    w.key("level_labels").begin_array();
    for (const auto& l : spec.level_labels) w.value(l);
    w.end_array();
    w.field("estimates", fit.estimates.levels[b]);
    w.field("posterior_mean_levels", post.mean_levels(b));
    w.end_object();
  }
  w.end_array();
  w.key("error").begin_object();
  w.field("residual_count", fit.scatter.residual_count);
  w.field("posterior_dof", model.error_kappa + static_cast<double>(fit.scatter.residual_count));
  w.end_object();
  w.key("notes").begin_array();
  for (const auto& n : model.notes) w.value(n);
  w.end_array();
  w.end_object();
  w.finish();
  return s.str();
}

inline std::string exceedance_json(const PosteriorDraws& post) {
  std::ostringstream s;
  JsonWriter w(s);
  w.begin_object();
  w.key("criteria").begin_array();
  for (const auto& t : exceedance_tables(post)) {
    w.begin_object();
    w.field("criterion", to_string(t.criterion));
    w.key("labels").begin_array();
    for (const auto& l : t.labels) w.value(l);
    w.end_array();
    w.key("prob").begin_array();
    for (const auto& row : t.prob) w.value(row);
    w.end_array();
    w.end_object();
  }
  w.end_array();
  w.end_object();
  w.finish();
  return s.str();
}

/// One row per (draw, covariance series): the three criteria then the upper
/// triangle of the matrix.
inline std::string draws_csv(const PosteriorDraws& post, std::size_t d) {
  std::ostringstream s;
  s << "draw,batch,parameter,determinant,total_variance,total_marginal_variance";
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t k = i; k < d; ++k) s << ",m_" << i + 1 << "_" << k + 1;
  s << "\n";
  const auto series = parameter_series(post);
  for (std::size_t r = 0; r < post.draws; ++r) {
    for (const auto& ps : series) {
      const SymMatrix& m = (*ps.draws)[r];
      s << r + 1 << "," << csv_escape(ps.batch) << "," << to_string(ps.parameter);
      for (auto c : kAllCriteria) s << "," << format_double(criterion_value(m, c));
      for (Index i = 0; i < static_cast<Index>(d); ++i)
        for (Index k = i; k < static_cast<Index>(d); ++k) s << "," << format_double(m(i, k));
      s << "\n";
    }
  }
  return s.str();
}

inline int cmd_fit(const FitOptions& opt) {
  Manifest manifest;
  manifest.subcommand = "fit";
  auto m = load_model(opt.data_path, opt.config_path);
  manifest.seed = m.config.seed;
  manifest.config_digest = sha256_hex(m.config_bytes);
  manifest.add_input(opt.data_path, m.data_bytes);
  manifest.add_input(opt.config_path, m.config_bytes);
  manifest.settings.emplace_back("draws_csv", opt.draws_csv ? "true" : "false");

  const Fit fit = fit_model(m.data, m.model);
  const PosteriorDraws post = run_posterior(m.model, fit, sampler_config(m.config, resolve_threads(opt.threads)));

  const std::filesystem::path dir(opt.out_dir);
  ensure_dir(dir);
  manifest.write_output(dir, "intervals.json", intervals_json(m.model, m.config, fit, post));
  manifest.write_output(dir, "exceedance.json", exceedance_json(post));
  if (opt.draws_csv) manifest.write_output(dir, "draws.csv", draws_csv(post, m.model.d));
  manifest.save(dir);
  return ok;
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
  int scenario = 1;
  std::size_t n_alpha = 5;
  std::size_t n_eps = 3;
  std::uint64_t seed = 1;
  std::vector<double> scales;
  std::string out_dir;
};

inline std::string one_way_config_json(const ModelConfig& c) {
  std::ostringstream s;
  JsonWriter w(s);
  w.begin_object();
  w.key("responses").begin_array();
  for (const auto& r : c.responses) w.value(r);
  w.end_array();
  w.key("batches").begin_array();
  for (const auto& b : c.batches) {
    w.begin_object().field("name", b.name).field("kind", to_string(b.kind));
    w.key("factors").begin_array();
    for (const auto& f : b.factors) w.value(f);
    w.end_array();
    w.end_object();
  }
  w.end_array();
  w.field("draws", c.draws).field("seed", static_cast<unsigned long long>(c.seed));
  w.end_object();
  w.finish();
  return s.str();
}

inline int cmd_simulate(const SimulateOptions& opt) {
  Manifest manifest;
  manifest.subcommand = "simulate";
  manifest.seed = opt.seed;
  std::optional<Vector> scales;
  if (!opt.scales.empty()) {
    if (opt.scales.size() != 3) throw Error(Errc::invalid_sizes, "--scales needs three values");
    scales = Vector::Map(opt.scales.data(), 3);
  }
  auto [sc, data] = generate_scenario(scenario_case(opt.scenario), opt.n_alpha, opt.n_eps, opt.seed, scales);
  manifest.settings = {{"case", std::to_string(opt.scenario)},
                       {"n_alpha", std::to_string(opt.n_alpha)},
                       {"n_eps", std::to_string(opt.n_eps)}};
  if (scales) {
    std::string joined;
    for (double x : opt.scales) joined += (joined.empty() ? "" : ",") + format_double(x);
    manifest.settings.emplace_back("scales", joined);
  }
  std::string canonical;
  for (const auto& [k, v] : manifest.settings) canonical += k + "=" + v + ";";
  manifest.config_digest = sha256_hex(canonical + "seed=" + std::to_string(opt.seed));

  std::ostringstream truth;
  JsonWriter w(truth);
  w.begin_object();
  w.field("case", opt.scenario).field("n_alpha", opt.n_alpha).field("n_eps", opt.n_eps);
  w.field("seed", static_cast<unsigned long long>(opt.seed));
  w.field("scales", std::vector<double>(sc.scales.data(), sc.scales.data() + sc.scales.size()));
  w.field("sigma_alpha", sc.sigma_alpha.matrix()).field("sigma_eps", sc.sigma_eps.matrix());
  w.field("alpha", sc.alpha);
  w.key("criteria").begin_object();
  for (auto c : kAllCriteria) {
    w.key(std::string(to_string(c))).begin_object();
    w.field("sigma_alpha", criterion_value(sc.sigma_alpha, c));
    w.field("sigma_eps", criterion_value(sc.sigma_eps, c));
    w.end_object();
  }
  w.end_object();
  w.end_object();
  w.finish();

  const std::filesystem::path dir(opt.out_dir);
  ensure_dir(dir);
  manifest.write_output(dir, "data.csv", dataset_to_csv(data));
  manifest.write_output(dir, "truth.json", truth.str());
  manifest.write_output(dir, "config.json", one_way_config_json(one_way_config(1000, opt.seed)));
  manifest.save(dir);
  return ok;
}

// ---------------------------------------------------------------- coverage

struct CoverageCliOptions {
  int scenario = 3;
  std::size_t n_eps = 15;
  std::size_t replicates = 100;
  std::vector<std::size_t> n_alpha{5, 20, 50};
  std::size_t draws = 1000;
  double level = 0.95;
  std::uint64_t seed = 1;
  std::vector<double> scales;
  std::optional<std::size_t> threads;
  std::string out_dir;
};

inline std::string coverage_csv(const CoverageReport& report) {
  std::ostringstream s;
  s << "source,n_alpha,parameter,criterion,coverage,mean_width,median_width,replicates\n";
  auto rows = [&](const std::vector<CoverageCell>& cells, const char* source) {
    for (const auto& c : cells) {
      s << source << "," << c.n_alpha << "," << to_string(c.parameter) << "," << to_string(c.criterion) << ","
        << format_double(c.coverage) << "," << format_double(c.mean_width) << "," << format_double(c.median_width)
        << "," << c.replicates << "\n";
    }
  };
  rows(report.cells, "posterior");
  rows(report.reference, "reference");
  return s.str();
}

inline std::string coverage_json(const CoverageReport& report) {
  std::ostringstream s;
  JsonWriter w(s);
  w.begin_object();
  w.field("case", static_cast<int>(report.kind)).field("n_eps", report.n_eps);
  w.field("replicates", report.replicates).field("draws", report.draws).field("level", report.level);
  w.field("seed", static_cast<unsigned long long>(report.seed));
  auto cells = [&](const std::string& key, const std::vector<CoverageCell>& list) {
    w.key(key).begin_array();
    for (const auto& c : list) {
      w.begin_object();
      w.field("n_alpha", c.n_alpha).field("parameter", to_string(c.parameter)).field("criterion", to_string(c.criterion));
      w.field("coverage", c.coverage).field("mean_width", c.mean_width).field("median_width", c.median_width);
      w.field("replicates", c.replicates);
      w.end_object();
    }
    w.end_array();
  };
  cells("cells", report.cells);
  cells("reference", report.reference);
  w.end_object();
  w.finish();
  return s.str();
}

inline int cmd_coverage(const CoverageCliOptions& opt) {
  Manifest manifest;
  manifest.subcommand = "coverage";
  manifest.seed = opt.seed;
  CoverageOptions co;
  co.kind = scenario_case(opt.scenario);
  co.n_alpha = opt.n_alpha;
  co.n_eps = opt.n_eps;
  co.replicates = opt.replicates;
  co.draws = opt.draws;
  co.level = opt.level;
  co.seed = opt.seed;
  co.threads = resolve_threads(opt.threads);
  if (!opt.scales.empty()) {
    if (opt.scales.size() != 3) throw Error(Errc::invalid_sizes, "--scales needs three values");
    co.scales = Vector::Map(opt.scales.data(), 3);
  }
  std::string grid;
  for (auto n : opt.n_alpha) grid += (grid.empty() ? "" : ",") + std::to_string(n);
  manifest.settings = {{"case", std::to_string(opt.scenario)}, {"n_eps", std::to_string(opt.n_eps)},
                       {"S", std::to_string(opt.replicates)},   {"n_alpha", grid},
                       {"draws", std::to_string(opt.draws)},    {"level", format_double(opt.level)}};
  std::string canonical;
  for (const auto& [k, v] : manifest.settings) canonical += k + "=" + v + ";";
  manifest.config_digest = sha256_hex(canonical + "seed=" + std::to_string(opt.seed));

  const CoverageReport report = coverage_experiment(co);
  const std::filesystem::path dir(opt.out_dir);
  ensure_dir(dir);
  manifest.write_output(dir, "coverage.csv", coverage_csv(report));
  manifest.write_output(dir, "coverage.json", coverage_json(report));
  manifest.save(dir);
  return ok;
}

// ---------------------------------------------------------------- predict

struct PredictOptions {
  std::string data_path;
  std::string config_path;
  std::string scenario_path;
  std::string out_dir;
  std::optional<std::size_t> threads;
};

struct ParsedScenario {
  PredictiveScenario scenario;
  ContrastSpec contrast;
};

/// Scenario document:
///   {"levels": {"<batch>": "novel" | {"observed": <1-based index or label>}
///                          | {"mean": <index or label>}},
///    "global_mean": "point_estimate" | "full_draws",
///    "include_error": bool,
///    "contrast": {"points": [{"covariates": {"<name>": x}, "weight": w}],
///                 "include": {"<batch>": bool}}}
inline ParsedScenario parse_scenario(const std::string& text, const ModelSpec& model) {
  using detail::Json;
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::parse, std::string("scenario is not valid JSON: ") + e.what());
  }
  detail::reject_unknown_keys(j, {"levels", "global_mean", "include_error", "contrast"}, "scenario");
  ParsedScenario out;
  auto level_index = [&](const std::string& batch, const Json& v) -> std::size_t {
    const auto& spec = model.batches[*model.find(batch)];
    if (v.is_number_integer()) {
      const auto i = v.get<long long>();
      if (i < 1 || static_cast<std::size_t>(i) > spec.levels) {
        throw Error(Errc::invalid_argument, "scenario: batch '" + batch + "' level index out of range");
      }
      return static_cast<std::size_t>(i - 1);
    }
    if (v.is_string()) {
      const auto label = v.get<std::string>();
      for (std::size_t l = 0; l < spec.level_labels.size(); ++l)
        if (spec.level_labels[l] == label) return l;
      throw Error(Errc::invalid_argument, "scenario: batch '" + batch + "' has no level '" + label + "'");
    }
    throw Error(Errc::invalid_argument, "scenario: level must be an index or a label");
  };
  if (j.contains("levels")) {
    if (!j["levels"].is_object()) throw Error(Errc::invalid_argument, "scenario.levels must be an object");
    for (const auto& item : j["levels"].items()) {
      const std::string& batch = item.key();
      if (!model.find(batch)) throw Error(Errc::invalid_argument, "scenario names unknown batch '" + batch + "'");
      const Json& v = item.value();
      if (v.is_string() && v.get<std::string>() == "novel") {
        out.scenario.levels[batch] = NovelLevel{};
      } else if (v.is_object() && v.size() == 1 && v.contains("observed")) {
        out.scenario.levels[batch] = ObservedLevel{level_index(batch, v["observed"])};
      } else if (v.is_object() && v.size() == 1 && v.contains("mean")) {
        out.scenario.levels[batch] = PosteriorMeanLevel{level_index(batch, v["mean"])};
      } else {
        throw Error(Errc::invalid_argument,
                    "scenario.levels." + batch + " must be \"novel\", {\"observed\": ...} or {\"mean\": ...}");
      }
    }
  }
  if (j.contains("global_mean")) {
    const auto g = detail::json_get<std::string>(j["global_mean"], "scenario.global_mean");
    if (g == "point_estimate") {
      out.scenario.global_mean = GlobalMeanHandling::point_estimate;
    } else if (g == "full_draws") {
      out.scenario.global_mean = GlobalMeanHandling::full_draws;
    } else {
      throw Error(Errc::invalid_argument, "scenario.global_mean must be 'point_estimate' or 'full_draws'");
    }
  }
  if (j.contains("include_error")) {
    out.scenario.include_error = detail::json_get<bool>(j["include_error"], "scenario.include_error");
  }
  if (j.contains("contrast")) {
    const Json& c = j["contrast"];
    detail::reject_unknown_keys(c, {"points", "include"}, "scenario.contrast");
    if (c.contains("points")) {
      if (!c["points"].is_array()) throw Error(Errc::invalid_argument, "scenario.contrast.points must be an array");
      for (const auto& p : c["points"]) {
        detail::reject_unknown_keys(p, {"covariates", "weight"}, "scenario.contrast.points[]");
        DesignPoint point;
        if (p.contains("covariates")) point = detail::json_get<DesignPoint>(p["covariates"], "contrast point covariates");
        const double weight = p.contains("weight") ? detail::json_get<double>(p["weight"], "contrast weight") : 1.0;
        out.contrast.points.emplace_back(std::move(point), weight);
      }
    }
    if (c.contains("include")) {
      out.contrast.include = detail::json_get<std::map<std::string, bool>>(c["include"], "scenario.contrast.include");
    }
  }
  if (out.contrast.points.empty()) out.contrast.points.emplace_back(DesignPoint{}, 1.0);
  return out;
}

inline int cmd_predict(const PredictOptions& opt) {
  Manifest manifest;
  manifest.subcommand = "predict";
  auto m = load_model(opt.data_path, opt.config_path);
  const std::string scenario_bytes = read_file(opt.scenario_path);
  const ParsedScenario parsed = parse_scenario(scenario_bytes, m.model);
  manifest.seed = m.config.seed;
  manifest.config_digest = sha256_hex(m.config_bytes);
  manifest.add_input(opt.data_path, m.data_bytes);
  manifest.add_input(opt.config_path, m.config_bytes);
  manifest.add_input(opt.scenario_path, scenario_bytes);

  const std::size_t threads = resolve_threads(opt.threads);
  const Fit fit = fit_model(m.data, m.model);
  const PosteriorDraws post = run_posterior(m.model, fit, sampler_config(m.config, threads));
  const Matrix draws = predictive_contrast(m.model, post, parsed.scenario, parsed.contrast, m.config.seed, threads);

  std::ostringstream s;
  s << "draw";
  for (const auto& r : m.data.response_names) s << "," << csv_escape(r);
  s << "\n";
  for (Index r = 0; r < draws.rows(); ++r) {
    s << r + 1;
    for (Index k = 0; k < draws.cols(); ++k) s << "," << format_double(draws(r, k));
    s << "\n";
  }
  const std::filesystem::path dir(opt.out_dir);
  ensure_dir(dir);
  manifest.write_output(dir, "predictive.csv", s.str());
  manifest.save(dir);
  return ok;
}

// ---------------------------------------------------------------- entry

/// Prints a one-line JSON diagnostic and returns the matching exit code.
inline int report_error(Errc code, const std::string& message, std::ostream& err) {
  const int status = exit_code(code);
  std::ostringstream s;
  JsonWriter w(s);
  w.begin_object().field("error", to_string(code)).field("message", message).field("exit_code", status).end_object();
  std::string text = s.str();
  for (auto& c : text)
    if (c == '\n') c = ' ';
  err << text << "\n";
  return status;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Multilevel multivariate ANOVA: posterior covariance summaries for balanced designs"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  std::optional<std::size_t> threads;
  app.add_option("--threads", threads, "worker threads (default: MMANOVA_THREADS or 1)")->check(CLI::PositiveNumber);

  FitOptions fit;
  auto* fit_cmd = app.add_subcommand("fit", "fit a model and summarize its posterior");
  fit_cmd->add_option("--data", fit.data_path, "dataset CSV")->required();
  fit_cmd->add_option("--config", fit.config_path, "model configuration JSON")->required();
  fit_cmd->add_option("--out", fit.out_dir, "output directory")->required();
  fit_cmd->add_flag("--draws-csv", fit.draws_csv, "also write every covariance draw to draws.csv");
  fit_cmd->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  SimulateOptions sim;
  auto* sim_cmd = app.add_subcommand("simulate", "generate a one-way scenario dataset");
  sim_cmd->add_option("--case", sim.scenario, "1 (groups dominate), 2 (errors dominate), 3 (comparable)")
      ->check(CLI::Range(1, 3));
  sim_cmd->add_option("--n-alpha", sim.n_alpha, "number of groups");
  sim_cmd->add_option("--n-eps", sim.n_eps, "replicates per group");
  sim_cmd->add_option("--seed", sim.seed, "random seed");
  sim_cmd->add_option("--scales", sim.scales, "group standard deviations")->delimiter(',');
  sim_cmd->add_option("--out", sim.out_dir, "output directory")->required();

  CoverageCliOptions cov;
  auto* cov_cmd = app.add_subcommand("coverage", "run a coverage experiment");
  cov_cmd->add_option("--case", cov.scenario, "scenario case")->check(CLI::Range(1, 3));
  cov_cmd->add_option("--n-eps", cov.n_eps, "replicates per group");
  cov_cmd->add_option("--S", cov.replicates, "simulated datasets per grid point")->check(CLI::PositiveNumber);
  cov_cmd->add_option("--n-alpha", cov.n_alpha, "comma-separated group counts")->delimiter(',');
  cov_cmd->add_option("--draws", cov.draws, "posterior draws per fit")->check(CLI::PositiveNumber);
  cov_cmd->add_option("--level", cov.level, "nominal interval level")->check(CLI::Range(0.0, 1.0));
  cov_cmd->add_option("--seed", cov.seed, "random seed");
  cov_cmd->add_option("--scales", cov.scales, "group standard deviations")->delimiter(',');
  cov_cmd->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  cov_cmd->add_option("--out", cov.out_dir, "output directory")->required();

  PredictOptions pred;
  auto* pred_cmd = app.add_subcommand("predict", "posterior predictive draws or contrasts");
  pred_cmd->add_option("--data", pred.data_path, "dataset CSV")->required();
  pred_cmd->add_option("--config", pred.config_path, "model configuration JSON")->required();
  pred_cmd->add_option("--scenario", pred.scenario_path, "scenario JSON")->required();
  pred_cmd->add_option("--out", pred.out_dir, "output directory")->required();
  pred_cmd->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? ok : validation_error;
  }

  try {
    if (*fit_cmd) {
      fit.threads = threads;
      return cmd_fit(fit);
    }
    if (*sim_cmd) return cmd_simulate(sim);
    if (*cov_cmd) {
      cov.threads = threads;
      return cmd_coverage(cov);
    }
    if (*pred_cmd) {
      pred.threads = threads;
      return cmd_predict(pred);
    }
  } catch (const Error& e) {
    return report_error(e.code(), e.what(), err);
  } catch (const std::filesystem::filesystem_error& e) {
    return report_error(Errc::io, e.what(), err);
  }
  return validation_error;
}

}  // namespace mmanova::cli
