#pragma once

#include <iosfwd>
#include <utility>
#include <string>
#include <vector>

namespace knockforge::cli {

// Runs one command line (args[0] is the program name) and returns the process
// exit code: 0 success, 2 usage, 3 I/O, 4 data contract, 5 numerical.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string version_string();

// Parses `key = value` lines; '#' starts a comment, [section] headers are
// ignored, quotes and brackets around values are stripped. Throws UsageError
// on malformed lines.
std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text);

// 64-bit FNV-1a of a file's bytes as 16 hex digits.
std::string file_digest(const std::string& path);

}  // namespace knockforge::cli
