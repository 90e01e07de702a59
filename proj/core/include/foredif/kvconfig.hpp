#pragma once

#include <map>
#include <set>
#include <string>

namespace foredif {

/// Parses a UTF-8 key=value config file. Blank lines and lines starting
/// with '#' are ignored; anything else must contain '='. Values keep
/// their verbatim text.
std::map<std::string, std::string> parse_kv_file(const std::string& path);

std::map<std::string, std::string> parse_kv_text(const std::string& text,
                                                 const std::string& origin);

/// Raises ConfigError naming the first key not in the allowed set.
void reject_unknown_keys(const std::map<std::string, std::string>& kv,
                         const std::set<std::string>& allowed,
                         const std::string& origin);

}  // namespace foredif
