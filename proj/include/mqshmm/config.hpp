#pragma once
// Run configuration files: flat `key = value` lines grouped in [sections].
// Unknown sections/keys and malformed values are rejected with ConfigError.

#include <iosfwd>
#include <string>

#include "mqshmm/problem.hpp"

namespace mqshmm {

RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::string& path);
// Writes every supported key with its current value.
void write_config(std::ostream& out, const RunConfig& cfg);

bool valid_mode(const std::string& mode);

}  // namespace mqshmm
