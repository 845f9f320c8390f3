#pragma once

// Batch front end. Each command takes a fully resolved JSON config (defaults
// merged with a config file and flag overrides) and writes its outputs plus a
// manifest.json echoing that config into the output directory.

#include <string_view>

#include <json.hpp>

namespace lrvi::cli {

using Json = nlohmann::json;

enum ExitCode : int { success = 0, failure = 1, config_error = 2, numerical_error = 3 };

Json default_config(std::string_view command);

/// defaults <- file <- overrides. Keys absent from the defaults are rejected.
/// A manifest written by a previous run is accepted as a config file.
Json resolve_config(std::string_view command, const Json& file, const Json& overrides);

void cmd_synth(const Json& config);
void cmd_embed(const Json& config);
void cmd_eval(const Json& config);
void cmd_sweep(const Json& config);

/// Parses argv, dispatches, and maps errors to exit codes.
int run(int argc, char** argv);

} // namespace lrvi::cli
