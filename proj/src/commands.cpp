#include "walkdiff/commands.hpp"

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "walkdiff/parallel.hpp"

namespace walkdiff {

namespace fs = std::filesystem;

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int exit_code_for(ErrorCode code) {
  return code == ErrorCode::ParseError || code == ErrorCode::ValidationError ? 2 : 1;
}

void write_atomic(const fs::path& path, std::string_view content) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  const fs::path tmp = path.string() + ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::DomainError, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp, ec);
      throw Error(ErrorCode::DomainError, "write failed for " + path.string());
    }
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::DomainError, "cannot move output into " + path.string());
  }
}

namespace {

nlohmann::json jnum(double v) {
  if (std::isfinite(v)) return v;
  return format_real(v);
}

nlohmann::json value_json(const Value& v) {
  return std::visit(
      [](const auto& x) -> nlohmann::json {
        using X = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<X, double>) {
          return jnum(x);
        } else if constexpr (std::is_same_v<X, std::vector<double>>) {
          nlohmann::json a = nlohmann::json::array();
          for (double d : x) a.push_back(jnum(d));
          return a;
        } else {
          return x;
        }
      },
      v);
}

std::vector<std::uint64_t> counts(const std::vector<double>& v) {
  std::vector<std::uint64_t> out;
  for (double d : v) out.push_back(static_cast<std::uint64_t>(d));
  return out;
}

struct Job {
  const ExperimentConfig& cfg;
  RunContext ctx;
  std::uint64_t seed;
  std::string hash;
  DiffusionSpec spec;
  IncrementMeasure mu;
  nlohmann::json summary;
  std::vector<std::string> outputs;

  fs::path target(const std::string& chosen, const std::string& fallback) const {
    return fs::path(cfg.output.dir) / (chosen.empty() ? fallback : chosen);
  }

  void emit(const fs::path& p, const std::string& content) {
    write_atomic(p, content);
    outputs.push_back(p.string());
  }

  ScaleSolver solver(const QFunction& qf, std::uint64_t N) const {
    return ScaleSolver(qf, mu, N, solve_options(cfg), static_cast<std::size_t>(tolerance(cfg, "memo_capacity")));
  }

  ConvergenceReport finish(ConvergenceReport r) const {
    r.config = config_to_json(cfg);
    r.config["seed"] = seed;
    r.config_hash = hash;
    bool pass = r.monotone_trend;
    if (cfg.command.args.count("threshold") && !r.values.empty())
      pass = pass && r.values.back() < arg_real(cfg.command, "threshold");
    r.pass = pass;
    return r;
  }

  void write_reports(const std::vector<ConvergenceReport>& reports, const std::string& fallback) {
    nlohmann::json j;
    if (reports.size() == 1) {
      j = to_json(reports[0]);
    } else {
      j = nlohmann::json::array();
      for (const auto& r : reports) j.push_back(to_json(r));
    }
    emit(target(cfg.output.report, fallback), j.dump(2) + "\n");
    nlohmann::json brief = nlohmann::json::array();
    for (const auto& r : reports) {
      nlohmann::json vals = nlohmann::json::array();
      for (double v : r.values) vals.push_back(v);
      brief.push_back({{"experiment_id", r.experiment_id}, {"values", vals}, {"pass", *r.pass}});
    }
    summary["reports"] = brief;
  }

  void classify() {
    QFunction qf(spec, q_options(cfg));
    ClassifyOptions co;
    co.probe_points = static_cast<int>(tolerance(cfg, "probe_points"));
    const CaseReport rep = classify_case(qf, mu, co);
    nlohmann::json status = nlohmann::json::object();
    for (const auto& [k, v] : rep.assumption_status) status[k] = std::string(to_string(v));
    nlohmann::json bounds = nlohmann::json::object();
    for (Side s : {Side::left, Side::right}) {
      if (!std::isfinite(spec.interval.endpoint(s))) continue;
      const BoundaryReport& b = qf.boundary(s);
      bounds[std::string(to_string(s))] = {{"endpoint", spec.interval.endpoint(s)},
                                           {"accessible", b.accessible},
                                           {"inconclusive", b.inconclusive},
                                           {"heuristic", b.heuristic},
                                           {"limit_value", jnum(b.limit_value)}};
    }
    nlohmann::json full = {{"case_id", rep.case_id},
                           {"assumption_status", status},
                           {"N0_estimate", rep.N0_estimate},
                           {"notes", rep.notes},
                           {"boundaries", bounds},
                           {"config", config_to_json(cfg)},
                           {"config_hash", hash}};
    emit(target(cfg.output.report, "classify.json"), full.dump(2) + "\n");
    summary["case_id"] = rep.case_id;
    summary["assumption_status"] = status;
    summary["N0_estimate"] = rep.N0_estimate;
  }

  void qfun() {
    QFunction qf(spec, q_options(cfg));
    const auto ys = arg_list(cfg.command, "y");
    const auto xs = arg_list(cfg.command, "x");
    std::vector<std::string> rows(ys.size() * xs.size());
    parallel_for(rows.size(), ctx.threads, [&](std::size_t i) {
      const double y = ys[i / xs.size()], x = xs[i % xs.size()];
      rows[i] = format_real(y) + "," + format_real(x) + "," + format_real(qf.q(y, x)) + "," + format_real(qf.q_x(y, x)) + "\n";
    });
    std::string csv = "y,x,q,q_x\n";
    for (const auto& r : rows) csv += r;
    emit(target(cfg.output.csv, "qfun.csv"), csv);
    summary["rows"] = rows.size();
  }

  void scalefactor() {
    QFunction qf(spec, q_options(cfg));
    const auto N = static_cast<std::uint64_t>(arg_int(cfg.command, "N"));
    const ScaleFactorTable t = build_table(qf, mu, N, arg_list(cfg.command, "grid"), ctx.threads, solve_options(cfg));
    std::string csv = "y,a_N,G,exact_equality\n";
    for (std::size_t i = 0; i < t.grid.size(); ++i)
      csv += format_real(t.grid[i]) + "," + format_real(t.values[i]) + "," + format_real(t.achieved_G[i]) + "," +
             (t.exact_equality[i] ? "true" : "false") + "\n";
    emit(target(cfg.output.csv, "scalefactor.csv"), csv);
    summary["rows"] = t.grid.size();
  }

  void walk() {
    QFunction qf(spec, q_options(cfg));
    const auto N = static_cast<std::uint64_t>(arg_int(cfg.command, "N"));
    const auto steps = static_cast<std::size_t>(arg_int(cfg.command, "steps"));
    const auto paths = static_cast<std::size_t>(arg_int(cfg.command, "paths", 1));
    const ScaleSolver s = solver(qf, N);
    const auto walks = simulate_paths(s, steps, paths, seed, ctx.threads);
    std::string csv = "path_id,k,y\n";
    for (std::size_t i = 0; i < walks.size(); ++i)
      for (std::size_t k = 0; k < walks[i].states.size(); ++k)
        csv += std::to_string(i) + "," + std::to_string(k) + "," + format_real(walks[i].states[k]) + "\n";
    emit(target(cfg.output.csv, "walk.csv"), csv);
    summary["rows"] = paths * (steps + 1);
  }

  void embed() {
    QFunction qf(spec, q_options(cfg));
    BridgeFunction bf(mu, static_cast<int>(tolerance(cfg, "gh_nodes")));
    const auto N = static_cast<std::uint64_t>(arg_int(cfg.command, "N"));
    const auto steps = static_cast<std::size_t>(arg_int(cfg.command, "steps"));
    const auto paths = static_cast<std::size_t>(arg_int(cfg.command, "paths", 1));
    const ScaleSolver s = solver(qf, N);
    const EmbedOptions opt = embed_options(cfg);
    std::vector<std::string> chunks(paths);
    parallel_for(paths, ctx.threads, [&](std::size_t i) {
      RngStream rng(seed, i);
      const EmbeddedPath p = simulate_embedded_walk(qf, bf, s, steps, rng, opt);
      std::string& out = chunks[i];
      const std::string id = std::to_string(i) + ",";
      out += id + "0,0," + format_real(p.states[0]) + ",0,0\n";
      for (std::size_t k = 0; k < p.per_step.size(); ++k)
        out += id + std::to_string(k + 1) + "," + format_real(p.taus[k + 1]) + "," + format_real(p.states[k + 1]) + "," +
               format_real(p.per_step[k].duration_xi) + "," + format_real(p.per_step[k].compensation_wait) + "\n";
    });
    std::string csv = "path_id,k,tau,state,xi,wait\n";
    for (const auto& c : chunks) csv += c;
    emit(target(cfg.output.csv, "embed.csv"), csv);
    summary["rows"] = paths * (steps + 1);
  }

  void converge() {
    const std::string experiment = arg_string(cfg.command, "experiment", "marginal");
    const auto Ns = counts(arg_list(cfg.command, "N_values"));
    const double t = arg_real(cfg.command, "t", 1.0);
    const EmbedOptions opt = embed_options(cfg);
    std::vector<ConvergenceReport> reports;
    if (experiment == "marginal") {
      const std::string ref_name = arg_string(cfg.command, "reference", "auto");
      ReferenceMode mode = ReferenceMode::automatic;
      if (ref_name == "exact") mode = ReferenceMode::exact;
      else if (ref_name == "euler") mode = ReferenceMode::euler;
      else if (ref_name != "auto") throw Error(ErrorCode::ValidationError, "reference must be auto, exact or euler");
      EulerOptions eo = euler_options(cfg);
      eo.seed = seed ^ 0x9e3779b97f4a7c15ULL;
      eo.threads = ctx.threads;
      const ReferenceCdf ref = reference_marginal(spec, t, mode, eo);
      QFunction qf(spec, q_options(cfg));
      const auto samples = static_cast<std::uint64_t>(arg_int(cfg.command, "samples", 10000));
      reports.push_back(finish(marginal_convergence_study(qf, mu, Ns, t, samples, seed, ref, ctx.threads)));
      summary["reference"] = std::string(to_string(ref.provenance));
    } else if (experiment == "drift") {
      const auto s_values = arg_list(cfg.command, "s_values", std::vector<double>{1.0});
      const double eps = arg_real(cfg.command, "epsilon", 0.05);
      const auto reps = static_cast<std::uint64_t>(arg_int(cfg.command, "reps", 1000));
      for (auto& r : drift_experiment(spec, mu, Ns, s_values, eps, reps, seed, ctx.threads, opt))
        reports.push_back(finish(std::move(r)));
    } else if (experiment == "coupled") {
      QFunction qf(spec, q_options(cfg));
      const auto paths = static_cast<std::uint64_t>(arg_int(cfg.command, "paths", 50));
      reports.push_back(finish(coupled_study(qf, mu, Ns, t, paths, seed, ctx.threads, opt)));
    } else {
      throw Error(ErrorCode::ValidationError, "experiment must be marginal, drift or coupled");
    }
    write_reports(reports, "converge.json");
  }

  void lln() {
    const std::string name = arg_string(cfg.command, "array", "embedding");
    ArraySpec array;
    if (name == "embedding") array = embedding_cost_array(spec, mu, embed_options(cfg));
    else if (name == "constant") array = constant_array();
    else if (name == "exponential") array = exponential_array();
    else if (name == "pareto_clipped") array = pareto_clipped_array();
    else throw Error(ErrorCode::ValidationError, "array must be embedding, constant, exponential or pareto_clipped");
    const auto ns = counts(arg_list(cfg.command, "n_values"));
    const double eps = arg_real(cfg.command, "epsilon", 0.05);
    const auto reps = static_cast<std::uint64_t>(arg_int(cfg.command, "reps", 1000));
    write_reports({finish(lln_experiment(array, ns, eps, reps, seed, ctx.threads))}, "lln.json");
  }
};

}  // namespace

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  if (cfg.seed) j["seed"] = *cfg.seed;
  nlohmann::json model = {{"name", cfg.model.name}};
  if (cfg.model.m) model["m"] = jnum(*cfg.model.m);
  for (const auto& [k, v] : cfg.model.params) model["params"][k] = jnum(v);
  j["model"] = model;
  nlohmann::json measure = {{"name", cfg.measure.name}};
  for (const Atom& a : cfg.measure.atoms) measure["atoms"].push_back({jnum(a.x), jnum(a.w)});
  for (const auto& [k, v] : cfg.measure.params) measure["params"][k] = jnum(v);
  j["measure"] = measure;
  nlohmann::json cmd = {{"name", cfg.command.name}};
  for (const auto& [k, v] : cfg.command.args) cmd[k] = value_json(v);
  j["command"] = cmd;
  j["output"] = {{"dir", cfg.output.dir}, {"csv", cfg.output.csv}, {"report", cfg.output.report}};
  nlohmann::json tol = nlohmann::json::object();
  for (const auto& [k, v] : cfg.tolerances) tol[k] = jnum(v);
  j["tolerances"] = tol;
  return j;
}

CommandResult run_command(const ExperimentConfig& config, const RunContext& ctx) {
  validate_config(config);
  if (config.command.name.empty()) throw Error(ErrorCode::ValidationError, "no command given");
  ExperimentConfig cfg = config;
  if (!cfg.seed) {
    std::random_device rd;
    cfg.seed = ((static_cast<std::uint64_t>(rd()) << 32) | rd()) >> 1;
  }
  Job job{cfg, ctx, *cfg.seed, config_hash(cfg), build_model(cfg), build_measure(cfg.measure), {}, {}};
  job.ctx.threads = std::max(1u, ctx.threads);
  job.summary = {{"command", cfg.command.name}, {"status", "ok"}, {"seed", job.seed}, {"config_hash", job.hash}};
  const std::string& c = cfg.command.name;
  if (c == "classify") job.classify();
  else if (c == "qfun") job.qfun();
  else if (c == "scalefactor") job.scalefactor();
  else if (c == "walk") job.walk();
  else if (c == "embed") job.embed();
  else if (c == "converge") job.converge();
  else if (c == "lln") job.lln();
  else throw Error(ErrorCode::ValidationError, "unknown command '" + c + "'");
  job.summary["outputs"] = job.outputs;
  return {job.summary, job.outputs};
}

}  // namespace walkdiff
