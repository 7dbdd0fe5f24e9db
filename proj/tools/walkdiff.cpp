#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "walkdiff/commands.hpp"
#include "walkdiff/config.hpp"

using namespace walkdiff;

namespace {

std::string dashed(std::string key) {
  for (char& c : key)
    if (c == '_') c = '-';
  return key;
}

int fail(const std::string& code, const std::string& message, int status) {
  nlohmann::json j{{"status", "error"}, {"code", code}, {"message", message}};
  std::cout << j.dump() << std::endl;
  return status;
}

unsigned resolve_threads(unsigned flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("WALKDIFF_THREADS"); env && *env) {
    const auto v = std::get<std::int64_t>(parse_value(ArgType::integer, env));
    if (v < 1) throw Error(ErrorCode::ValidationError, "WALKDIFF_THREADS must be at least 1");
    return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"walkdiff: scaled random walks, Skorokhod embeddings and convergence experiments"};
  app.fallthrough();
  app.require_subcommand(0, 1);

  std::string config_path, out_dir, model_spec, mu_spec, csv_name, report_name;
  std::optional<std::uint64_t> seed;
  std::optional<double> start;
  unsigned threads = 0;
  std::vector<std::string> tols;
  bool dump = false;
  app.add_option("--config", config_path, "TOML experiment config");
  app.add_option("--seed", seed, "master seed (generated and reported when omitted)");
  app.add_option("--threads", threads, "worker threads (WALKDIFF_THREADS, else all cores)");
  app.add_option("--out-dir", out_dir, "directory for output files");
  app.add_option("--csv", csv_name, "CSV file name inside the output dir");
  app.add_option("--report", report_name, "JSON report name inside the output dir");
  app.add_option("--tol", tols, "override a default, key=value (repeatable)")->take_all();
  app.add_option("--model", model_spec, "e.g. bm, gbm, cev{alpha=0.5}, bm{l=0}, two_media{A=2}");
  app.add_option("--m", start, "start state");
  app.add_option("--mu", mu_spec, "e.g. rademacher, atoms{-1:0.5,1:0.5}, uniform{a=1}");
  app.add_flag("--dump-config", dump, "print the merged config as TOML and exit");

  // raw[command][key] holds flag text until the schema type is applied
  std::map<std::string, std::map<std::string, std::string>> raw;
  std::map<std::string, CLI::App*> subs;
  const std::map<std::string_view, std::string> about{
      {"classify", "boundary case, assumption checks and N0 estimate"},
      {"qfun", "q(y, x) and its x-derivative on a grid"},
      {"scalefactor", "a_N(y) on a grid of states"},
      {"walk", "simulate scaled walks"},
      {"embed", "simulate walks through the Brownian embedding with stopping times"},
      {"converge", "marginal KS, stopping-time drift or coupled sup-distance studies"},
      {"lln", "deviation probabilities of row means"},
  };
  for (std::string_view name : command_names()) {
    const std::string cmd(name);
    CLI::App* sub = app.add_subcommand(cmd, about.at(name));
    subs[cmd] = sub;
    for (const ArgSpec& a : command_schema(cmd)) {
      const std::string flag = "--" + dashed(a.key);
      const std::string names = flag == "--" + a.key ? flag : flag + ",--" + a.key;
      sub->add_option(names, raw[cmd][a.key], std::string(a.doc));
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail("ParseError", e.what(), 2);
  }

  try {
    ExperimentConfig cfg;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw Error(ErrorCode::ParseError, "cannot read config '" + config_path + "'");
      std::stringstream ss;
      ss << in.rdbuf();
      cfg = parse_config_unchecked(ss.str());
    }
    if (!model_spec.empty()) cfg.model = parse_model_spec(model_spec);
    if (start) cfg.model.m = *start;
    if (!mu_spec.empty()) cfg.measure = parse_measure_spec(mu_spec);

    for (const auto& [cmd, sub] : subs) {
      if (!sub->parsed()) continue;
      // switching command drops arguments meant for another one
      if (cfg.command.name != cmd) cfg.command = CommandBlock{cmd, {}};
      for (const ArgSpec& a : command_schema(cmd))
        if (sub->count("--" + dashed(a.key)) > 0) cfg.command.args[a.key] = parse_value(a.type, raw[cmd][a.key]);
    }
    if (seed) cfg.seed = *seed;
    if (!out_dir.empty()) cfg.output.dir = out_dir;
    if (!csv_name.empty()) cfg.output.csv = csv_name;
    if (!report_name.empty()) cfg.output.report = report_name;
    for (const std::string& t : tols) {
      const auto eq = t.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::ParseError, "--tol expects key=value, got '" + t + "'");
      const std::string key = t.substr(0, eq);
      tolerance(cfg, key);
      cfg.tolerances[key] = std::get<double>(parse_value(ArgType::real, t.substr(eq + 1)));
    }

    if (dump) {
      std::cout << serialize_config(cfg);
      return 0;
    }
    if (cfg.command.name.empty()) throw Error(ErrorCode::ValidationError, "no subcommand given (see --help)");
    validate_config(cfg);
    const CommandResult r = run_command(cfg, {resolve_threads(threads)});
    std::cout << r.summary.dump() << std::endl;
    return 0;
  } catch (const Error& e) {
    return fail(std::string(to_string(e.code())), e.what(), exit_code_for(e.code()));
  } catch (const std::exception& e) {
    return fail("InternalError", e.what(), 1);
  }
}
