#include "walkdiff/convergence.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>

#include "walkdiff/numerics.hpp"
#include "walkdiff/parallel.hpp"

namespace walkdiff {

namespace {

std::uint64_t stream_of(std::size_t group, std::size_t i) {
  return (static_cast<std::uint64_t>(group) << 32) | static_cast<std::uint64_t>(i);
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void finish_trend(ConvergenceReport& r) { r.monotone_trend = strictly_decreasing(r.values); }

}  // namespace

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::ks: return "ks";
    case Metric::wasserstein1: return "wasserstein1";
    case Metric::sup_path_distance: return "sup_path_distance";
    case Metric::deviation_probability: return "deviation_probability";
  }
  return "?";
}

Metric metric_from_string(std::string_view s) {
  for (Metric m : {Metric::ks, Metric::wasserstein1, Metric::sup_path_distance, Metric::deviation_probability})
    if (to_string(m) == s) return m;
  throw Error(ErrorCode::ParseError, "unknown metric '" + std::string(s) + "'");
}

std::string_view to_string(Provenance p) { return p == Provenance::exact ? "exact" : "euler_oracle"; }

nlohmann::json to_json(const ConvergenceReport& r) {
  nlohmann::json j;
  j["experiment_id"] = r.experiment_id;
  j["config"] = r.config;
  j["config_hash"] = r.config_hash;
  j["metric"] = std::string(to_string(r.metric));
  j["sample_size"] = r.sample_size;
  nlohmann::json vals = nlohmann::json::array();
  for (std::size_t i = 0; i < r.values.size(); ++i)
    vals.push_back({{"N", i < r.N_values.size() ? r.N_values[i] : 0}, {"value", r.values[i]}});
  j["values"] = vals;
  j["monotone_trend"] = r.monotone_trend;
  j["pass"] = r.pass ? nlohmann::json(*r.pass) : nlohmann::json(nullptr);
  return j;
}

ConvergenceReport report_from_json(const nlohmann::json& j) {
  try {
    ConvergenceReport r;
    r.experiment_id = j.at("experiment_id").get<std::string>();
    r.config = j.at("config");
    r.config_hash = j.at("config_hash").get<std::string>();
    r.metric = metric_from_string(j.at("metric").get<std::string>());
    r.sample_size = j.at("sample_size").get<std::uint64_t>();
    for (const auto& v : j.at("values")) {
      r.N_values.push_back(v.at("N").get<std::uint64_t>());
      r.values.push_back(v.at("value").get<double>());
    }
    r.monotone_trend = j.at("monotone_trend").get<bool>();
    if (!j.at("pass").is_null()) r.pass = j.at("pass").get<bool>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("report: ") + e.what());
  }
}

bool strictly_decreasing(std::span<const double> v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

// ---- LLN

ArraySpec constant_array(double c) {
  return {"constant", [c](std::uint64_t n, RngStream&, std::vector<double>& out) { out.assign(n, c); },
          [c](std::uint64_t n) { return c * static_cast<double>(n); }};
}

ArraySpec exponential_array() {
  return {"exponential",
          [](std::uint64_t n, RngStream& rng, std::vector<double>& out) {
            out.resize(n);
            for (auto& v : out) v = -std::log(rng.uniform());
          },
          [](std::uint64_t n) { return static_cast<double>(n); }};
}

ArraySpec pareto_clipped_array(double alpha) {
  if (!(alpha > 0.0)) throw Error(ErrorCode::DomainError, "pareto alpha must be positive");
  // E min(P, c) for P ~ Pareto(alpha) on [1, inf).
  auto clipped_mean = [alpha](double c) {
    if (alpha == 1.0) return 1.0 + std::log(c);
    return (alpha - std::pow(c, 1.0 - alpha)) / (alpha - 1.0);
  };
  return {"pareto_clipped",
          [alpha](std::uint64_t n, RngStream& rng, std::vector<double>& out) {
            out.resize(n);
            const double cap = static_cast<double>(n);
            for (auto& v : out) v = std::min(std::pow(rng.uniform(), -1.0 / alpha), cap);
          },
          [clipped_mean](std::uint64_t n) { return static_cast<double>(n) * clipped_mean(static_cast<double>(n)); }};
}

ArraySpec embedding_cost_array(const DiffusionSpec& spec, const IncrementMeasure& mu, const EmbedOptions& opt) {
  auto qf = std::make_shared<const QFunction>(spec);
  auto bf = std::make_shared<const BridgeFunction>(mu);
  auto m = std::make_shared<const IncrementMeasure>(mu);
  return {"embedding_cost_" + spec.name,
          [qf, bf, m, opt](std::uint64_t n, RngStream& rng, std::vector<double>& out) {
            ScaleSolver solver(*qf, *m, n);
            const EmbeddedPath p = simulate_embedded_walk(*qf, *bf, solver, n, rng, opt);
            out.resize(n);
            const double N = static_cast<double>(n);
            for (std::size_t k = 0; k < n; ++k) out[k] = N * (p.taus[k + 1] - p.taus[k]);
          },
          [](std::uint64_t n) { return static_cast<double>(n); }};
}

ConvergenceReport lln_experiment(const ArraySpec& array, std::span<const std::uint64_t> n_values, double epsilon,
                                 std::uint64_t reps, std::uint64_t seed, unsigned threads) {
  require_finite(epsilon, "epsilon");
  if (!(epsilon > 0.0)) throw Error(ErrorCode::DomainError, "epsilon must be positive");
  ConvergenceReport r;
  r.experiment_id = "lln_" + array.name;
  r.metric = Metric::deviation_probability;
  r.sample_size = reps;
  for (std::size_t j = 0; j < n_values.size(); ++j) {
    const std::uint64_t n = n_values[j];
    if (n == 0) throw Error(ErrorCode::DomainError, "row length must be positive");
    const double mean = array.mean_sum(n) / static_cast<double>(n);
    std::vector<char> hit(reps, 0);
    parallel_for(reps, threads, [&](std::size_t i) {
      RngStream rng(seed, stream_of(j, i));
      std::vector<double> row;
      array.row(n, rng, row);
      double s = 0.0;
      for (double z : row) s += z;
      hit[i] = std::abs(s / static_cast<double>(n) - mean) > epsilon;
    });
    const double count = static_cast<double>(std::count(hit.begin(), hit.end(), 1));
    r.N_values.push_back(n);
    r.values.push_back(reps ? count / static_cast<double>(reps) : 0.0);
  }
  finish_trend(r);
  return r;
}

// ---- drift

namespace {

std::size_t step_index(std::uint64_t N, double s) {
  require_finite(s, "s");
  if (s < 0.0) throw Error(ErrorCode::DomainError, "s must be nonnegative");
  return static_cast<std::size_t>(std::floor(static_cast<double>(N) * s));
}

std::vector<ConvergenceReport> drift_reports(const std::vector<std::uint64_t>& Ns,
                                             const std::vector<std::vector<std::vector<double>>>& taus,
                                             std::span<const double> s_values, double epsilon) {
  // taus[j][i][k]: tau at floor(N_j s_k) for replica i.
  std::vector<ConvergenceReport> out;
  for (std::size_t k = 0; k < s_values.size(); ++k) {
    ConvergenceReport r;
    r.experiment_id = "drift_s=" + num(s_values[k]);
    r.metric = Metric::deviation_probability;
    r.N_values = Ns;
    for (std::size_t j = 0; j < Ns.size(); ++j) {
      std::size_t hit = 0;
      for (const auto& rep : taus[j])
        if (std::abs(rep[k] - s_values[k]) > epsilon) ++hit;
      r.sample_size = taus[j].size();
      r.values.push_back(taus[j].empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(taus[j].size()));
    }
    finish_trend(r);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

std::vector<ConvergenceReport> stopping_time_drift(std::span<const EmbeddedPath> paths, std::span<const double> s_values,
                                                   double epsilon) {
  std::map<std::uint64_t, std::vector<std::vector<double>>> by_N;
  for (const EmbeddedPath& p : paths) {
    std::vector<double> row;
    for (double s : s_values) {
      const std::size_t k = step_index(p.N, s);
      if (k >= p.taus.size()) throw Error(ErrorCode::DomainError, "path shorter than floor(N s)");
      row.push_back(p.taus[k]);
    }
    by_N[p.N].push_back(std::move(row));
  }
  std::vector<std::uint64_t> Ns;
  std::vector<std::vector<std::vector<double>>> taus;
  for (auto& [N, rows] : by_N) {
    Ns.push_back(N);
    taus.push_back(std::move(rows));
  }
  return drift_reports(Ns, taus, s_values, epsilon);
}

std::vector<ConvergenceReport> drift_experiment(const DiffusionSpec& spec, const IncrementMeasure& mu,
                                                std::span<const std::uint64_t> N_values,
                                                std::span<const double> s_values, double epsilon, std::uint64_t reps,
                                                std::uint64_t seed, unsigned threads, const EmbedOptions& opt) {
  QFunction qf(spec);
  BridgeFunction bf(mu);
  EmbedOptions o = opt;
  o.record_trajectory = false;
  std::vector<std::uint64_t> Ns(N_values.begin(), N_values.end());
  std::vector<std::vector<std::vector<double>>> taus(Ns.size());
  for (std::size_t j = 0; j < Ns.size(); ++j) {
    ScaleSolver solver(qf, mu, Ns[j]);
    std::size_t K = 0;
    for (double s : s_values) K = std::max(K, step_index(Ns[j], s));
    taus[j].resize(reps);
    parallel_for(reps, threads, [&](std::size_t i) {
      RngStream rng(seed, stream_of(j, i));
      const EmbeddedPath p = simulate_embedded_walk(qf, bf, solver, K, rng, o);
      for (double s : s_values) taus[j][i].push_back(p.taus[step_index(Ns[j], s)]);
    });
  }
  return drift_reports(Ns, taus, s_values, epsilon);
}

// ---- marginals

double ks_statistic(std::span<const double> x, const std::function<double(double)>& cdf) {
  if (x.empty()) throw Error(ErrorCode::DomainError, "ks_statistic: empty sample");
  for (std::size_t i = 0; i < x.size(); ++i) {
    require_finite(x[i], "sample");
    if (i && x[i] < x[i - 1]) throw Error(ErrorCode::UnsortedInput, "ks_statistic: sample is not sorted");
  }
  // Per block of equal values x_i..x_j: F_n jumps from i/n to (j+1)/n. The left
  // limit of F is read at the previous double, so atoms in F are handled too.
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size();) {
    std::size_t j = i;
    while (j + 1 < x.size() && x[j + 1] == x[i]) ++j;
    const double F = std::clamp(cdf(x[i]), 0.0, 1.0);
    const double F_left = std::clamp(cdf(std::nextafter(x[i], -kInf)), 0.0, 1.0);
    d = std::max({d, std::abs(static_cast<double>(j + 1) / n - F), std::abs(F_left - static_cast<double>(i) / n)});
    i = j + 1;
  }
  return d;
}

std::vector<double> euler_sample(const DiffusionSpec& spec, double t, const EulerOptions& euler) {
  if (!(t > 0.0) || !(euler.step > 0.0)) throw Error(ErrorCode::DomainError, "euler: t and step must be positive");
  const auto n = static_cast<std::uint64_t>(std::ceil(t / euler.step - 1e-9));
  const double h = t / static_cast<double>(n);
  const double sh = std::sqrt(h);
  const Interval iv = spec.interval;
  std::vector<double> out(euler.paths);
  parallel_for(euler.paths, euler.threads, [&](std::size_t i) {
    RngStream rng(euler.seed, i);
    double x = spec.start;
    for (std::uint64_t k = 0; k < n; ++k) {
      x += spec.eta_inside(x) * sh * rng.normal();
      if (!iv.contains_open(x)) {
        x = x <= iv.lower ? iv.lower : iv.upper;
        break;
      }
    }
    out[i] = x;
  });
  std::sort(out.begin(), out.end());
  return out;
}

ReferenceCdf reference_marginal(const DiffusionSpec& spec, double t, ReferenceMode mode, const EulerOptions& euler) {
  require_finite(t, "t");
  if (!(t > 0.0)) throw Error(ErrorCode::DomainError, "reference_marginal: t must be positive");
  const double m = spec.start;
  const double st = std::sqrt(t);
  const Interval iv = spec.interval;
  ReferenceCdf ref;
  if (mode != ReferenceMode::euler) {
    if (spec.name == "bm" && !iv.lower_finite() && !iv.upper_finite()) {
      ref.cdf = [m, st](double x) { return normal_cdf((x - m) / st); };
      return ref;
    }
    if (spec.name == "bm" && iv.lower_finite() && !iv.upper_finite()) {
      // Reflection principle; the hitting mass sits at l.
      const double l = iv.lower;
      ref.cdf = [m, st, l](double x) {
        if (x < l) return 0.0;
        return 1.0 - (normal_cdf((m - x) / st) - normal_cdf((2 * l - m - x) / st));
      };
      return ref;
    }
    if (spec.name == "bm" && !iv.lower_finite() && iv.upper_finite()) {
      const double r = iv.upper;
      ref.cdf = [m, st, r](double x) {
        if (x >= r) return 1.0;
        return normal_cdf((x - m) / st) - normal_cdf((x - (2 * r - m)) / st);
      };
      return ref;
    }
    if (spec.name == "gbm") {
      ref.cdf = [m, t, st](double x) {
        if (x <= 0.0) return 0.0;
        return normal_cdf((std::log(x / m) + t / 2) / st);
      };
      return ref;
    }
    if (mode == ReferenceMode::exact)
      throw Error(ErrorCode::UnsupportedModel, "no closed-form marginal for model '" + spec.name + "'");
  }
  ref.provenance = Provenance::euler_oracle;
  ref.sample = euler_sample(spec, t, euler);
  auto sample = std::make_shared<const std::vector<double>>(ref.sample);
  ref.cdf = [sample](double x) {
    const auto it = std::upper_bound(sample->begin(), sample->end(), x);
    return static_cast<double>(it - sample->begin()) / static_cast<double>(sample->size());
  };
  return ref;
}

ConvergenceReport marginal_convergence_study(const QFunction& qf, const IncrementMeasure& mu,
                                             std::span<const std::uint64_t> N_values, double t,
                                             std::uint64_t sample_size, std::uint64_t seed, const ReferenceCdf& ref,
                                             unsigned threads) {
  require_finite(t, "t");
  if (!(t >= 0.0)) throw Error(ErrorCode::DomainError, "t must be nonnegative");
  if (sample_size == 0) throw Error(ErrorCode::DomainError, "sample_size must be positive");
  ConvergenceReport r;
  r.experiment_id = "marginal_" + qf.spec().name + "_t=" + num(t);
  r.metric = Metric::ks;
  r.sample_size = sample_size;
  for (std::size_t j = 0; j < N_values.size(); ++j) {
    const std::uint64_t N = N_values[j];
    ScaleSolver solver(qf, mu, N);
    const double nt = static_cast<double>(N) * t;
    const auto K = static_cast<std::size_t>(std::ceil(nt));
    std::vector<double> ends(sample_size);
    parallel_for(sample_size, threads, [&](std::size_t i) {
      RngStream rng(seed, stream_of(j, i));
      ends[i] = interpolate(simulate_path(solver, K, rng), nt);
    });
    std::sort(ends.begin(), ends.end());
    r.N_values.push_back(N);
    r.values.push_back(ks_statistic(ends, ref.cdf));
  }
  finish_trend(r);
  return r;
}

// ---- coupling

double coupled_sup_distance(const QFunction& qf, const EmbeddedPath& path, std::span<const double> time_grid) {
  if (qf.spec().name != "bm") throw Error(ErrorCode::UnsupportedModel, "coupled distance needs Brownian motion");
  // M on the recorded times: bridge points inside each step, then the wait at the endpoint.
  std::vector<double> T{0.0}, V{path.states.front()};
  for (std::size_t k = 0; k < path.per_step.size(); ++k) {
    const EmbeddedStep& st = path.per_step[k];
    if (st.trajectory.empty() && st.duration_xi > 0.0)
      throw Error(ErrorCode::DomainError, "coupled distance needs recorded trajectories");
    const double t0 = path.taus[k];
    for (const TrajectoryPoint& p : st.trajectory) {
      T.push_back(t0 + p.time);
      V.push_back(p.value);
    }
    T.push_back(path.taus[k + 1]);
    V.push_back(path.states[k + 1]);
  }
  const double N = static_cast<double>(path.N);
  const double K = static_cast<double>(path.states.size() - 1);
  double d = 0.0;
  for (double t : time_grid) {
    require_finite(t, "t");
    if (t < 0.0 || t > T.back() || N * t > K) throw Error(ErrorCode::DomainError, "time grid beyond the simulated path");
    // Last recorded point at or before t; equal times keep the later value.
    const auto it = std::upper_bound(T.begin(), T.end(), t);
    const std::size_t i = static_cast<std::size_t>(it - T.begin()) - 1;
    double m = V[i];
    if (i + 1 < T.size() && T[i + 1] > T[i]) m += (t - T[i]) / (T[i + 1] - T[i]) * (V[i + 1] - V[i]);
    const double u = N * t;
    const auto k = static_cast<std::size_t>(std::floor(u));
    double y = path.states[k];
    if (static_cast<double>(k) < u) y += (u - static_cast<double>(k)) * (path.states[k + 1] - path.states[k]);
    d = std::max(d, std::abs(y - m));
  }
  return d;
}

ConvergenceReport coupled_study(const QFunction& qf, const IncrementMeasure& mu, std::span<const std::uint64_t> N_values,
                                double horizon, std::uint64_t paths, std::uint64_t seed, unsigned threads,
                                EmbedOptions opt) {
  if (qf.spec().name != "bm") throw Error(ErrorCode::UnsupportedModel, "coupled distance needs Brownian motion");
  require_finite(horizon, "horizon");
  if (!(horizon >= 0.0)) throw Error(ErrorCode::DomainError, "horizon must be nonnegative");
  opt.record_trajectory = true;
  BridgeFunction bf(mu);
  ConvergenceReport r;
  r.experiment_id = "coupled_" + qf.spec().name + "_T=" + num(horizon);
  r.metric = Metric::sup_path_distance;
  r.sample_size = paths;
  for (std::size_t j = 0; j < N_values.size(); ++j) {
    const std::uint64_t N = N_values[j];
    ScaleSolver solver(qf, mu, N);
    const std::size_t G = std::max<std::size_t>(1000, static_cast<std::size_t>(4 * N * horizon));
    std::vector<double> grid(G + 1);
    for (std::size_t g = 0; g <= G; ++g) grid[g] = horizon * static_cast<double>(g) / static_cast<double>(G);
    std::vector<double> dist(paths);
    parallel_for(paths, threads, [&](std::size_t i) {
      auto K = static_cast<std::size_t>(std::ceil(1.5 * static_cast<double>(N) * horizon)) + 8;
      for (;;) {
        RngStream rng(seed, stream_of(j, i));
        const EmbeddedPath p = simulate_embedded_walk(qf, bf, solver, K, rng, opt);
        if (p.taus.back() >= horizon) {
          dist[i] = coupled_sup_distance(qf, p, grid);
          return;
        }
        K *= 2;
      }
    });
    r.N_values.push_back(N);
    r.values.push_back(median(dist));
  }
  finish_trend(r);
  return r;
}

}  // namespace walkdiff
