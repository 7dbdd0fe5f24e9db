#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "walkdiff/config.hpp"

namespace walkdiff {

struct RunContext {
  unsigned threads = 1;
};

struct CommandResult {
  /// One-line summary printed by the CLI.
  nlohmann::json summary;
  std::vector<std::string> outputs;
};

/// Runs cfg.command, writing its artifact under cfg.output.dir. A missing seed
/// is generated and reported in the summary. Throws walkdiff::Error.
CommandResult run_command(const ExperimentConfig& cfg, const RunContext& ctx = {});

/// 2 for usage problems (ParseError, ValidationError), 1 for everything else.
int exit_code_for(ErrorCode code);

/// Writes to a sibling temp file, then renames over the target.
void write_atomic(const std::filesystem::path& path, std::string_view content);

/// Plain JSON view of a config; infinities become the strings "inf" / "-inf".
nlohmann::json config_to_json(const ExperimentConfig& cfg);

/// %.17g, with inf / -inf / nan spelled out.
std::string format_real(double v);

}  // namespace walkdiff
