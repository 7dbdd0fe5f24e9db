#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "walkdiff/embedding.hpp"
#include "walkdiff/walk.hpp"

namespace walkdiff {

enum class Metric { ks, wasserstein1, sup_path_distance, deviation_probability };

std::string_view to_string(Metric m);
Metric metric_from_string(std::string_view s);

struct ConvergenceReport {
  std::string experiment_id;
  std::vector<std::uint64_t> N_values;
  std::uint64_t sample_size = 0;
  Metric metric = Metric::ks;
  std::vector<double> values;
  bool monotone_trend = true;
  std::string config_hash;
  nlohmann::json config = nlohmann::json::object();
  std::optional<bool> pass;

  bool operator==(const ConvergenceReport&) const = default;
};

nlohmann::json to_json(const ConvergenceReport& r);
/// Inverse of to_json. ParseError on missing or mistyped fields.
ConvergenceReport report_from_json(const nlohmann::json& j);

/// True for sequences of length <= 1.
bool strictly_decreasing(std::span<const double> v);

// ---- weak LLN for triangular arrays

/// Row generator for a triangular array: row(n, rng, out) fills out with the
/// n nonnegative entries of row n; mean_sum(n) is the sum of their means.
struct ArraySpec {
  std::string name;
  std::function<void(std::uint64_t, RngStream&, std::vector<double>&)> row;
  std::function<double(std::uint64_t)> mean_sum;
};

ArraySpec constant_array(double c = 1.0);
ArraySpec exponential_array();
/// Pareto(alpha) entries clipped at n; not uniformly integrable for alpha = 1.
ArraySpec pareto_clipped_array(double alpha = 1.0);
/// Z^N_k = N (xi_k + wait_k) along one embedded walk with N = n.
ArraySpec embedding_cost_array(const DiffusionSpec& spec, const IncrementMeasure& mu, const EmbedOptions& opt = {});

/// P(|(1/n) sum_k (Z^n_k - E Z^n_k)| > eps) per n; replica i of n_values[j] uses stream (seed, j 2^32 + i).
ConvergenceReport lln_experiment(const ArraySpec& array, std::span<const std::uint64_t> n_values, double epsilon,
                                 std::uint64_t reps, std::uint64_t seed, unsigned threads = 1);

// ---- stopping-time drift

/// One report per s: empirical P(|tau^N(floor(N s)) - s| > eps), grouped by the paths' N.
/// DomainError when a path is shorter than floor(N s).
std::vector<ConvergenceReport> stopping_time_drift(std::span<const EmbeddedPath> paths, std::span<const double> s_values,
                                                   double epsilon);

/// Same statistic, simulating reps embedded walks per N without keeping them.
std::vector<ConvergenceReport> drift_experiment(const DiffusionSpec& spec, const IncrementMeasure& mu,
                                                std::span<const std::uint64_t> N_values,
                                                std::span<const double> s_values, double epsilon, std::uint64_t reps,
                                                std::uint64_t seed, unsigned threads = 1, const EmbedOptions& opt = {});

// ---- marginals

/// Two-sided KS distance of a sorted sample to a CDF. UnsortedInput if not sorted.
double ks_statistic(std::span<const double> sorted_sample, const std::function<double(double)>& cdf);

enum class Provenance { exact, euler_oracle };
enum class ReferenceMode { automatic, exact, euler };

std::string_view to_string(Provenance p);

struct EulerOptions {
  double step = 1e-4;
  std::uint64_t paths = 100000;
  std::uint64_t seed = 0x5eedULL;
  unsigned threads = 1;
};

struct ReferenceCdf {
  std::function<double(double)> cdf;
  Provenance provenance = Provenance::exact;
  /// Sorted Euler endpoints (euler_oracle only).
  std::vector<double> sample;
};

/// Exact law of M_t for BM (free or absorbed at one end) and GBM; Euler oracle otherwise.
/// UnsupportedModel in exact mode without a closed form.
ReferenceCdf reference_marginal(const DiffusionSpec& spec, double t, ReferenceMode mode = ReferenceMode::automatic,
                                const EulerOptions& euler = {});

/// Euler scheme endpoints at time t, absorbed at finite ends, sorted.
std::vector<double> euler_sample(const DiffusionSpec& spec, double t, const EulerOptions& euler);

/// KS distance of Y^N_{Nt} (sample_size walks per N) to the reference law.
/// Walk i for N_values[j] uses stream (seed, j 2^32 + i).
ConvergenceReport marginal_convergence_study(const QFunction& qf, const IncrementMeasure& mu,
                                             std::span<const std::uint64_t> N_values, double t,
                                             std::uint64_t sample_size, std::uint64_t seed, const ReferenceCdf& ref,
                                             unsigned threads = 1);

// ---- pathwise coupling (BM only)

/// sup over time_grid of |Y^N_{Nt} - M_t|, with M rebuilt from the embedding's
/// recorded trajectory. Needs record_trajectory; UnsupportedModel unless BM.
double coupled_sup_distance(const QFunction& qf, const EmbeddedPath& path, std::span<const double> time_grid);

/// Median coupled sup distance on [0, horizon] over `paths` walks per N.
ConvergenceReport coupled_study(const QFunction& qf, const IncrementMeasure& mu, std::span<const std::uint64_t> N_values,
                                double horizon, std::uint64_t paths, std::uint64_t seed, unsigned threads = 1,
                                EmbedOptions opt = {});

}  // namespace walkdiff
