#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "cpof/experiment.hpp"

namespace cpof {

/// Config parse failure; `line` is 1-based (0 when not tied to a line).
class ConfigError : public Error {
 public:
  ConfigError(std::size_t line, const std::string& message);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Flat "key = value" text, one key per line, '#' starts a comment. Keys not
/// listed in the README are rejected.
ExperimentConfig parse_run_config(std::istream& is);
ExperimentConfig load_run_config(const std::filesystem::path& path);

/// Writes a config that parses back to the same values.
void write_run_config(std::ostream& os, const ExperimentConfig& config);

}  // namespace cpof
