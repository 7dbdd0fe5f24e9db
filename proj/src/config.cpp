#include "walkdiff/config.hpp"

#include <toml.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace walkdiff {

namespace {

[[noreturn]] void parse_fail(const toml::source_region& src, const std::string& what) {
  throw Error(ErrorCode::ParseError, "line " + std::to_string(src.begin.line) + ": " + what);
}

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::ValidationError, what); }

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

double to_real(std::string_view text) {
  const std::string t = trim(text);
  if (t == "inf" || t == "+inf") return kInf;
  if (t == "-inf") return -kInf;
  double v = 0.0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || p != t.data() + t.size())
    throw Error(ErrorCode::ParseError, "not a number: '" + t + "'");
  return v;
}

std::int64_t to_int(std::string_view text) {
  const std::string t = trim(text);
  std::int64_t v = 0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (!t.empty() && ec == std::errc() && p == t.data() + t.size()) return v;
  // Accept integral reals such as 1e4.
  const double d = to_real(t);
  if (d != std::floor(d) || std::abs(d) > 9.2e18) throw Error(ErrorCode::ParseError, "not an integer: '" + t + "'");
  return static_cast<std::int64_t>(d);
}

std::optional<double> node_real(const toml::node& n) {
  if (auto v = n.as_floating_point()) return v->get();
  if (auto v = n.as_integer()) return static_cast<double>(v->get());
  return std::nullopt;
}

std::map<std::string, double> real_table(const toml::node& n, const std::string& where) {
  const toml::table* t = n.as_table();
  if (!t) parse_fail(n.source(), where + " must be a table");
  std::map<std::string, double> out;
  for (auto&& [k, v] : *t) {
    const auto r = node_real(v);
    if (!r) parse_fail(v.source(), where + "." + std::string(k.str()) + " must be a number");
    out[std::string(k.str())] = *r;
  }
  return out;
}

std::string_view type_name(ArgType t) {
  switch (t) {
    case ArgType::integer: return "an integer";
    case ArgType::real: return "a number";
    case ArgType::string: return "a string";
    case ArgType::list: return "a list of numbers";
    case ArgType::boolean: return "a boolean";
  }
  return "?";
}

Value node_value(const toml::node& n, const ArgSpec& spec) {
  const auto bad = [&]() -> Value {
    parse_fail(n.source(), "command." + spec.key + " must be " + std::string(type_name(spec.type)));
  };
  switch (spec.type) {
    case ArgType::integer:
      if (auto v = n.as_integer()) return v->get();
      if (auto v = n.as_floating_point()) {
        const double d = v->get();
        if (d == std::floor(d) && std::abs(d) < 9.2e18) return static_cast<std::int64_t>(d);
      }
      return bad();
    case ArgType::real:
      if (auto r = node_real(n)) return *r;
      return bad();
    case ArgType::string:
      if (auto v = n.as_string()) return v->get();
      return bad();
    case ArgType::boolean:
      if (auto v = n.as_boolean()) return v->get();
      return bad();
    case ArgType::list: {
      const toml::array* a = n.as_array();
      if (!a) return bad();
      std::vector<double> out;
      for (const toml::node& e : *a) {
        const auto r = node_real(e);
        if (!r) return bad();
        out.push_back(*r);
      }
      return out;
    }
  }
  return bad();
}

const ArgSpec* find_arg(const std::vector<ArgSpec>& schema, const std::string& key) {
  for (const ArgSpec& a : schema)
    if (a.key == key) return &a;
  return nullptr;
}

template <class T>
const T* get_arg(const CommandBlock& c, const std::string& key) {
  auto it = c.args.find(key);
  if (it == c.args.end()) return nullptr;
  const T* v = std::get_if<T>(&it->second);
  if (!v) invalid("command." + key + " has the wrong type");
  return v;
}

}  // namespace

const std::vector<DefaultEntry>& defaults_table() {
  static const std::vector<DefaultEntry> table{
      {"q_rel_tol", 1e-9, "relative tolerance of q quadrature"},
      {"divergence_cap", 1e12, "q values above this count as divergent"},
      {"probe_budget", 60, "probe points toward a finite boundary"},
      {"solver_rel_tol", 1e-12, "relative bracket width at which bisection stops"},
      {"solver_max_iter", 200, "bisection iteration cap"},
      {"equality_tol", 1e-8, "relative gap to 1/N that counts as exact equality"},
      {"probe_points", 40, "liminf probes for the case conditions"},
      {"memo_capacity", 65536, "scale-solver memo entries before it is cleared"},
      {"gh_nodes", 64, "Gauss-Hermite nodes for density bridges"},
      {"grid_nodes", 2048, "embedding grid nodes over [0, v_max]"},
      {"v_max", 36, "embedding grid span in v = -log(1 - s)"},
      {"max_doublings", 2, "Brownian-bridge refinements per step"},
      {"rel_change", 1e-4, "relative xi change that ends refinement"},
      {"separation", 12, "threshold distance (in sqrt(1 - s)) ending an atomic step"},
      {"density_cutoff", 1e-10, "1 - s at which a density step stops"},
      {"euler_step", 1e-4, "Euler oracle time step"},
      {"euler_paths", 1e5, "Euler oracle paths"},
  };
  return table;
}

double tolerance(const ExperimentConfig& cfg, std::string_view key) {
  for (const DefaultEntry& d : defaults_table()) {
    if (d.key != key) continue;
    auto it = cfg.tolerances.find(std::string(key));
    return it == cfg.tolerances.end() ? d.value : it->second;
  }
  invalid("unknown tolerance key '" + std::string(key) + "'");
}

const std::vector<ArgSpec>& command_schema(std::string_view command) {
  using T = ArgType;
  static const std::map<std::string, std::vector<ArgSpec>, std::less<>> schemas{
      {"classify", {}},
      {"qfun", {{"y", T::list, true, "base points"}, {"x", T::list, true, "target points"}}},
      {"scalefactor", {{"N", T::integer, true, "walk resolution"}, {"grid", T::list, true, "states y"}}},
      {"walk",
       {{"N", T::integer, true, "walk resolution"},
        {"steps", T::integer, true, "steps per path"},
        {"paths", T::integer, false, "number of paths (1)"}}},
      {"embed",
       {{"N", T::integer, true, "walk resolution"},
        {"steps", T::integer, true, "steps per path"},
        {"paths", T::integer, false, "number of paths (1)"}}},
      {"converge",
       {{"experiment", T::string, false, "marginal | drift | coupled (marginal)"},
        {"N_values", T::list, true, "walk resolutions"},
        {"t", T::real, false, "time horizon (1)"},
        {"samples", T::integer, false, "walks per N for marginal (10000)"},
        {"reference", T::string, false, "auto | exact | euler (auto)"},
        {"s_values", T::list, false, "drift times (1)"},
        {"epsilon", T::real, false, "drift deviation (0.05)"},
        {"reps", T::integer, false, "drift replicas (1000)"},
        {"paths", T::integer, false, "coupled paths per N (50)"},
        {"threshold", T::real, false, "pass needs the last value below this"}}},
      {"lln",
       {{"array", T::string, false, "embedding | constant | exponential | pareto_clipped (embedding)"},
        {"n_values", T::list, true, "row lengths"},
        {"epsilon", T::real, false, "deviation (0.05)"},
        {"reps", T::integer, false, "replicas (1000)"},
        {"threshold", T::real, false, "pass needs the last value below this"}}},
  };
  auto it = schemas.find(command);
  if (it == schemas.end()) invalid("unknown command '" + std::string(command) + "'");
  return it->second;
}

Value parse_value(ArgType type, std::string_view text) {
  switch (type) {
    case ArgType::integer: return to_int(text);
    case ArgType::real: return to_real(text);
    case ArgType::string: return trim(text);
    case ArgType::list: return parse_list(text);
    case ArgType::boolean: {
      const std::string t = trim(text);
      if (t == "true" || t == "1") return true;
      if (t == "false" || t == "0") return false;
      throw Error(ErrorCode::ParseError, "not a boolean: '" + t + "'");
    }
  }
  throw Error(ErrorCode::ParseError, "bad value");
}

ExperimentConfig parse_config_unchecked(std::string_view text) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    parse_fail(e.source(), std::string(e.description()));
  }
  ExperimentConfig cfg;
  for (auto&& [key, node] : root) {
    const std::string k(key.str());
    if (k == "seed") {
      auto v = node.as_integer();
      if (!v || v->get() < 0) parse_fail(node.source(), "seed must be a nonnegative integer");
      cfg.seed = static_cast<std::uint64_t>(v->get());
    } else if (k == "model") {
      const toml::table* t = node.as_table();
      if (!t) parse_fail(node.source(), "model must be a table");
      for (auto&& [mk, mv] : *t) {
        const std::string name(mk.str());
        if (name == "name") {
          if (!mv.is_string()) parse_fail(mv.source(), "model.name must be a string");
          cfg.model.name = mv.as_string()->get();
        } else if (name == "m") {
          const auto r = node_real(mv);
          if (!r) parse_fail(mv.source(), "model.m must be a number");
          cfg.model.m = *r;
        } else if (name == "params") {
          cfg.model.params = real_table(mv, "model.params");
        } else {
          parse_fail(mk.source(), "unknown key '" + name + "' in [model]");
        }
      }
    } else if (k == "measure") {
      const toml::table* t = node.as_table();
      if (!t) parse_fail(node.source(), "measure must be a table");
      for (auto&& [mk, mv] : *t) {
        const std::string name(mk.str());
        if (name == "name") {
          if (!mv.is_string()) parse_fail(mv.source(), "measure.name must be a string");
          cfg.measure.name = mv.as_string()->get();
        } else if (name == "params") {
          cfg.measure.params = real_table(mv, "measure.params");
        } else if (name == "atoms") {
          const toml::array* a = mv.as_array();
          if (!a) parse_fail(mv.source(), "measure.atoms must be an array of [x, w] pairs");
          for (const toml::node& e : *a) {
            const toml::array* pair = e.as_array();
            if (!pair || pair->size() != 2 || !node_real(*pair->get(0)) || !node_real(*pair->get(1)))
              parse_fail(e.source(), "measure.atoms entries must be [x, w] pairs");
            cfg.measure.atoms.push_back({*node_real(*pair->get(0)), *node_real(*pair->get(1))});
          }
        } else {
          parse_fail(mk.source(), "unknown key '" + name + "' in [measure]");
        }
      }
    } else if (k == "command") {
      const toml::table* t = node.as_table();
      if (!t) parse_fail(node.source(), "command must be a table");
      if (auto n = t->get("name")) {
        if (!n->is_string()) parse_fail(n->source(), "command.name must be a string");
        cfg.command.name = n->as_string()->get();
        if (std::find(command_names().begin(), command_names().end(), cfg.command.name) == command_names().end())
          parse_fail(n->source(), "unknown command '" + cfg.command.name + "'");
      } else {
        parse_fail(node.source(), "command.name is required");
      }
      const auto& schema = command_schema(cfg.command.name);
      for (auto&& [ck, cv] : *t) {
        const std::string name(ck.str());
        if (name == "name") continue;
        const ArgSpec* spec = find_arg(schema, name);
        if (!spec) parse_fail(ck.source(), "unknown key '" + name + "' for command " + cfg.command.name);
        cfg.command.args[name] = node_value(cv, *spec);
      }
    } else if (k == "output") {
      const toml::table* t = node.as_table();
      if (!t) parse_fail(node.source(), "output must be a table");
      for (auto&& [ok, ov] : *t) {
        const std::string name(ok.str());
        std::string* dst = name == "dir" ? &cfg.output.dir : name == "csv" ? &cfg.output.csv
                         : name == "report"                 ? &cfg.output.report
                                                            : nullptr;
        if (!dst) parse_fail(ok.source(), "unknown key '" + name + "' in [output]");
        if (!ov.is_string()) parse_fail(ov.source(), "output." + name + " must be a string");
        *dst = ov.as_string()->get();
      }
    } else if (k == "tolerances") {
      for (const auto& [tk, tv] : real_table(node, "tolerances")) {
        if (std::none_of(defaults_table().begin(), defaults_table().end(),
                         [&](const DefaultEntry& d) { return d.key == tk; }))
          parse_fail(node.source(), "unknown key '" + tk + "' in [tolerances]");
        cfg.tolerances[tk] = tv;
      }
    } else {
      parse_fail(key.source(), "unknown key '" + k + "'");
    }
  }
  return cfg;
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg = parse_config_unchecked(text);
  validate_config(cfg);
  return cfg;
}

std::string serialize_config(const ExperimentConfig& cfg) {
  toml::table root;
  if (cfg.seed) root.insert("seed", static_cast<std::int64_t>(*cfg.seed));
  toml::table model{{"name", cfg.model.name}};
  if (cfg.model.m) model.insert("m", *cfg.model.m);
  if (!cfg.model.params.empty()) {
    toml::table p;
    for (const auto& [k, v] : cfg.model.params) p.insert(k, v);
    model.insert("params", std::move(p));
  }
  root.insert("model", std::move(model));
  toml::table measure{{"name", cfg.measure.name}};
  if (!cfg.measure.atoms.empty()) {
    toml::array atoms;
    for (const Atom& a : cfg.measure.atoms) atoms.push_back(toml::array{a.x, a.w});
    measure.insert("atoms", std::move(atoms));
  }
  if (!cfg.measure.params.empty()) {
    toml::table p;
    for (const auto& [k, v] : cfg.measure.params) p.insert(k, v);
    measure.insert("params", std::move(p));
  }
  root.insert("measure", std::move(measure));
  if (!cfg.command.name.empty()) {
    toml::table cmd{{"name", cfg.command.name}};
    for (const auto& [k, v] : cfg.command.args) {
      std::visit(
          [&](const auto& x) {
            using X = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<X, std::vector<double>>) {
              toml::array a;
              for (double d : x) a.push_back(d);
              cmd.insert(k, std::move(a));
            } else {
              cmd.insert(k, x);
            }
          },
          v);
    }
    root.insert("command", std::move(cmd));
  }
  toml::table out{{"dir", cfg.output.dir}};
  if (!cfg.output.csv.empty()) out.insert("csv", cfg.output.csv);
  if (!cfg.output.report.empty()) out.insert("report", cfg.output.report);
  root.insert("output", std::move(out));
  if (!cfg.tolerances.empty()) {
    toml::table t;
    for (const auto& [k, v] : cfg.tolerances) t.insert(k, v);
    root.insert("tolerances", std::move(t));
  }
  std::ostringstream os;
  os << root << "\n";
  return os.str();
}

void validate_config(const ExperimentConfig& cfg) {
  try {
    build_model(cfg);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ValidationError) throw;
    invalid(std::string("model: ") + e.what());
  }
  IncrementMeasure mu = [&] {
    try {
      return build_measure(cfg.measure);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ValidationError) throw;
      invalid(std::string("measure: ") + e.what());
    }
  }();
  const MeasureReport rep = validate_measure(mu);
  if (!rep.valid) {
    std::string msg = "measure fails";
    for (const auto& f : rep.failures) msg += "; " + f;
    invalid(msg);
  }
  for (const auto& [k, v] : cfg.tolerances) {
    tolerance(cfg, k);
    if (k == "max_doublings" ? !(v >= 0.0) : !(v > 0.0)) invalid("tolerance '" + k + "' must be positive");
  }
  if (cfg.command.name.empty()) return;
  const auto& schema = command_schema(cfg.command.name);
  for (const auto& [k, v] : cfg.command.args)
    if (!find_arg(schema, k)) invalid("unknown key '" + k + "' for command " + cfg.command.name);
  for (const ArgSpec& a : schema)
    if (a.required && !cfg.command.args.count(a.key)) invalid("command " + cfg.command.name + " needs '" + a.key + "'");
  for (const char* key : {"N", "steps", "paths", "samples", "reps"}) {
    if (const auto* v = get_arg<std::int64_t>(cfg.command, key)) {
      const bool zero_ok = std::string(key) == "steps";
      if (*v < 0 || (*v == 0 && !zero_ok)) invalid(std::string("command.") + key + " must be positive");
    }
  }
  for (const char* key : {"N_values", "n_values"}) {
    if (const auto* v = get_arg<std::vector<double>>(cfg.command, key)) {
      if (v->empty()) invalid(std::string("command.") + key + " must not be empty");
      for (double d : *v)
        if (!(d >= 1.0) || d != std::floor(d)) invalid(std::string("command.") + key + " entries must be positive integers");
    }
  }
}

std::int64_t arg_int(const CommandBlock& c, const std::string& key, std::optional<std::int64_t> fallback) {
  if (const auto* v = get_arg<std::int64_t>(c, key)) return *v;
  if (fallback) return *fallback;
  invalid("command." + key + " is required");
}

double arg_real(const CommandBlock& c, const std::string& key, std::optional<double> fallback) {
  if (const auto* v = get_arg<double>(c, key)) return *v;
  if (fallback) return *fallback;
  invalid("command." + key + " is required");
}

std::string arg_string(const CommandBlock& c, const std::string& key, std::optional<std::string> fallback) {
  if (const auto* v = get_arg<std::string>(c, key)) return *v;
  if (fallback) return *fallback;
  invalid("command." + key + " is required");
}

std::vector<double> arg_list(const CommandBlock& c, const std::string& key, std::optional<std::vector<double>> fallback) {
  if (const auto* v = get_arg<std::vector<double>>(c, key)) return *v;
  if (fallback) return *fallback;
  invalid("command." + key + " is required");
}

bool arg_bool(const CommandBlock& c, const std::string& key, std::optional<bool> fallback) {
  if (const auto* v = get_arg<bool>(c, key)) return *v;
  if (fallback) return *fallback;
  invalid("command." + key + " is required");
}

DiffusionSpec build_model(const ExperimentConfig& cfg) {
  return make_model(cfg.model.name, cfg.model.params, cfg.model.m);
}

IncrementMeasure build_measure(const MeasureBlock& m) {
  if (m.name == "rademacher") {
    if (!m.atoms.empty() || !m.params.empty()) invalid("rademacher takes no atoms or params");
    return IncrementMeasure::rademacher();
  }
  if (m.name == "atoms") {
    if (m.atoms.empty()) invalid("atoms measure needs at least one atom");
    if (!m.params.empty()) invalid("atoms measure takes no params");
    return IncrementMeasure::from_atoms(m.atoms);
  }
  if (!m.atoms.empty()) invalid("density '" + m.name + "' takes no atoms");
  return IncrementMeasure::from_density(m.name, m.params);
}

QOptions q_options(const ExperimentConfig& cfg) {
  QOptions o;
  o.rel_tol = tolerance(cfg, "q_rel_tol");
  o.divergence_cap = tolerance(cfg, "divergence_cap");
  o.probe_budget = static_cast<int>(tolerance(cfg, "probe_budget"));
  return o;
}

SolveOptions solve_options(const ExperimentConfig& cfg) {
  SolveOptions o;
  o.rel_tol = tolerance(cfg, "solver_rel_tol");
  o.max_iter = static_cast<int>(tolerance(cfg, "solver_max_iter"));
  o.equality_tol = tolerance(cfg, "equality_tol");
  return o;
}

EmbedOptions embed_options(const ExperimentConfig& cfg) {
  EmbedOptions o;
  o.grid_nodes = static_cast<int>(tolerance(cfg, "grid_nodes"));
  o.v_max = tolerance(cfg, "v_max");
  o.max_doublings = static_cast<int>(tolerance(cfg, "max_doublings"));
  o.rel_change = tolerance(cfg, "rel_change");
  o.separation = tolerance(cfg, "separation");
  o.density_cutoff = tolerance(cfg, "density_cutoff");
  return o;
}

EulerOptions euler_options(const ExperimentConfig& cfg) {
  EulerOptions o;
  o.step = tolerance(cfg, "euler_step");
  o.paths = static_cast<std::uint64_t>(tolerance(cfg, "euler_paths"));
  return o;
}

namespace {

// Splits `name{body}` into its parts; body may be empty.
std::pair<std::string, std::string> split_braces(std::string_view s) {
  const std::string t = trim(s);
  const auto open = t.find('{');
  if (open == std::string::npos) {
    if (t.empty()) throw Error(ErrorCode::ParseError, "empty spec");
    return {t, ""};
  }
  if (t.back() != '}') throw Error(ErrorCode::ParseError, "missing '}' in '" + t + "'");
  return {trim(t.substr(0, open)), t.substr(open + 1, t.size() - open - 2)};
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      const std::string part = trim(s.substr(start, i - start));
      if (!part.empty()) out.push_back(part);
      start = i + 1;
    }
  }
  return out;
}

std::map<std::string, double> kv_list(std::string_view body) {
  std::map<std::string, double> out;
  for (const std::string& item : split(body, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ParseError, "expected key=value, got '" + item + "'");
    out[trim(item.substr(0, eq))] = to_real(item.substr(eq + 1));
  }
  return out;
}

}  // namespace

ModelBlock parse_model_spec(std::string_view s) {
  const auto [name, body] = split_braces(s);
  ModelBlock m;
  m.name = name;
  m.params = kv_list(body);
  if (auto it = m.params.find("m"); it != m.params.end()) {
    m.m = it->second;
    m.params.erase(it);
  }
  return m;
}

MeasureBlock parse_measure_spec(std::string_view s) {
  const auto [name, body] = split_braces(s);
  MeasureBlock m;
  m.name = name;
  if (name == "atoms") {
    for (const std::string& item : split(body, ',')) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) throw Error(ErrorCode::ParseError, "expected x:w, got '" + item + "'");
      m.atoms.push_back({to_real(item.substr(0, colon)), to_real(item.substr(colon + 1))});
    }
  } else {
    m.params = kv_list(body);
  }
  return m;
}

std::vector<double> parse_list(std::string_view s) {
  const std::string t = trim(s);
  if (t.find(':') != std::string::npos && t.find(',') == std::string::npos) {
    const auto parts = split(t, ':');
    if (parts.size() != 3) throw Error(ErrorCode::ParseError, "range must be lo:hi:count");
    const double lo = to_real(parts[0]), hi = to_real(parts[1]);
    const std::int64_t n = to_int(parts[2]);
    if (n < 1) throw Error(ErrorCode::ParseError, "range count must be positive");
    std::vector<double> out;
    for (std::int64_t i = 0; i < n; ++i)
      out.push_back(n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1));
    return out;
  }
  std::vector<double> out;
  for (const std::string& item : split(t, ',')) out.push_back(to_real(item));
  return out;
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : serialize_config(cfg)) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace walkdiff
