#include "foredif/kvconfig.hpp"

#include <fstream>
#include <sstream>

#include "foredif/common.hpp"

namespace foredif {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::map<std::string, std::string> parse_kv_text(const std::string& text,
                                                 const std::string& origin) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto eq = t.find('=');
        FD_CHECK_T(ConfigError, eq != std::string::npos && eq > 0, origin, ":", line_no,
                   ": expected key=value, got '", t, "'");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        FD_CHECK_T(ConfigError, !kv.count(key), origin, ":", line_no, ": duplicate key '",
                   key, "'");
        kv[key] = value;
    }
    return kv;
}

std::map<std::string, std::string> parse_kv_file(const std::string& path) {
    std::ifstream in(path);
    FD_CHECK_T(ConfigError, in.good(), "cannot open config file: ", path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_kv_text(buf.str(), path);
}

void reject_unknown_keys(const std::map<std::string, std::string>& kv,
                         const std::set<std::string>& allowed,
                         const std::string& origin) {
    for (const auto& [key, value] : kv) {
        FD_CHECK_T(ConfigError, allowed.count(key), origin, ": unknown key '", key, "'");
    }
}

}  // namespace foredif
