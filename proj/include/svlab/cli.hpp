#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "svlab/coupled.hpp"
#include "svlab/planar.hpp"

namespace svlab::cli {

using nlohmann::json;

/// One subcommand plus its complete parameter block (defaults filled in).
struct ExperimentConfig {
  std::string command;
  json params = json::object();
  bool operator==(const ExperimentConfig&) const = default;
};

void to_json(json& j, const ExperimentConfig& c);
void from_json(const json& j, ExperimentConfig& c);

const std::vector<std::string>& commands();
/// Default parameter block of a subcommand; config error for unknown names.
json defaults_for(const std::string& command);
/// Overlay `patch` on `base`, rejecting unknown keys and type changes.
json overlay(const json& base, const json& patch, const std::string& where);
/// Checks the documented ranges; config error on violation.
void validate(const ExperimentConfig& c);

/// FNV-1a over the canonical dump of {command, params}, omitting "output".
std::string config_hash(const ExperimentConfig& c);

/// Output root: $SVLAB_OUTPUT_ROOT or ./svlab_out.
std::filesystem::path output_root();

/// Runs one subcommand into `dir` and returns its summary object.
json execute(const ExperimentConfig& c, const std::filesystem::path& dir);

/// Full CLI: parses argv, writes artifacts, prints the one-line summary to `out`.
/// Returns 0, 2 (config error) or 3 (solver error).
int run_command(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// CSV with a JSON header line, as written by the radial subcommand.
std::string state_to_csv(const radial::CoupledState& s);
radial::CoupledState state_from_csv(const std::string& text);
/// Field CSV as written by the planar subcommand (no base attached).
planar::PlanarField field_from_csv(const std::string& text);

}  // namespace svlab::cli
