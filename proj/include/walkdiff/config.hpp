#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "walkdiff/convergence.hpp"
#include "walkdiff/diffusion.hpp"
#include "walkdiff/embedding.hpp"
#include "walkdiff/measure.hpp"
#include "walkdiff/scale_factor.hpp"

namespace walkdiff {

struct ModelBlock {
  std::string name = "bm";
  std::map<std::string, double> params;
  std::optional<double> m;
  bool operator==(const ModelBlock&) const = default;
};

struct MeasureBlock {
  /// "rademacher", "atoms" or a density name.
  std::string name = "rademacher";
  std::vector<Atom> atoms;
  std::map<std::string, double> params;
  bool operator==(const MeasureBlock&) const = default;
};

using Value = std::variant<bool, std::int64_t, double, std::string, std::vector<double>>;

struct CommandBlock {
  std::string name;
  std::map<std::string, Value> args;
  bool operator==(const CommandBlock&) const = default;
};

struct OutputBlock {
  std::string dir = ".";
  /// File names relative to dir; empty means the command's default.
  std::string csv;
  std::string report;
  bool operator==(const OutputBlock&) const = default;
};

struct ExperimentConfig {
  ModelBlock model;
  MeasureBlock measure;
  CommandBlock command;
  std::optional<std::uint64_t> seed;
  OutputBlock output;
  std::map<std::string, double> tolerances;
  bool operator==(const ExperimentConfig&) const = default;
};

struct DefaultEntry {
  std::string_view key;
  double value;
  std::string_view doc;
};

/// Every numeric knob with its default; [tolerances] and --tol override by key.
const std::vector<DefaultEntry>& defaults_table();
/// Override or default; ValidationError for an unknown key.
double tolerance(const ExperimentConfig& cfg, std::string_view key);

inline const std::vector<std::string_view>& command_names() {
  static const std::vector<std::string_view> names{"classify", "qfun", "scalefactor", "walk", "embed", "converge", "lln"};
  return names;
}

enum class ArgType { integer, real, string, list, boolean };

struct ArgSpec {
  std::string key;
  ArgType type;
  bool required;
  std::string_view doc;
};

/// Accepted [command] keys per subcommand; ValidationError for an unknown command.
const std::vector<ArgSpec>& command_schema(std::string_view command);
/// Converts text (CLI flag value) into a Value of the given type. ParseError on bad input.
Value parse_value(ArgType type, std::string_view text);

/// Strict TOML parse: unknown keys are ParseError (with line), semantic
/// problems ValidationError. The command block may be left unnamed.
ExperimentConfig parse_config(std::string_view text);
/// Syntax and key checks only; the CLI merges flags before validating.
ExperimentConfig parse_config_unchecked(std::string_view text);
std::string serialize_config(const ExperimentConfig& cfg);

/// Checks the command name and argument types/requirements, builds the model
/// and validates the measure. ValidationError on failure.
void validate_config(const ExperimentConfig& cfg);

// Argument access; ValidationError on a missing required key or a bad type.
std::int64_t arg_int(const CommandBlock& c, const std::string& key, std::optional<std::int64_t> fallback = std::nullopt);
double arg_real(const CommandBlock& c, const std::string& key, std::optional<double> fallback = std::nullopt);
std::string arg_string(const CommandBlock& c, const std::string& key, std::optional<std::string> fallback = std::nullopt);
std::vector<double> arg_list(const CommandBlock& c, const std::string& key,
                             std::optional<std::vector<double>> fallback = std::nullopt);
bool arg_bool(const CommandBlock& c, const std::string& key, std::optional<bool> fallback = std::nullopt);

// Builders driven by the config and its tolerances.
DiffusionSpec build_model(const ExperimentConfig& cfg);
IncrementMeasure build_measure(const MeasureBlock& m);
QOptions q_options(const ExperimentConfig& cfg);
SolveOptions solve_options(const ExperimentConfig& cfg);
EmbedOptions embed_options(const ExperimentConfig& cfg);
EulerOptions euler_options(const ExperimentConfig& cfg);

/// Inline forms used on the command line: `gbm`, `cev{alpha=0.5}`, `bm{l=0}`;
/// `rademacher`, `atoms{-1:0.5,1:0.5}`, `uniform{a=1}`. ParseError on bad syntax.
ModelBlock parse_model_spec(std::string_view s);
MeasureBlock parse_measure_spec(std::string_view s);
/// `0.1,0.2,0.5` or `lo:hi:count` (inclusive linspace).
std::vector<double> parse_list(std::string_view s);

/// 64-bit FNV-1a of the serialized config, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace walkdiff
