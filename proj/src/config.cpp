#include "qkdtime/config.hpp"

#include "qkdtime/errors.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace qkdtime {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    T value{};
    const char* first = text.data();
    const char* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) {
        throw ConfigError(fmt::format("config key '{}': cannot parse '{}' as a number", key, text));
    }
    return value;
}

}  // namespace

Config Config::parse(std::string_view text, std::string_view origin) {
    Config config;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;

        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(fmt::format("{}:{}: expected 'key = value'", origin, line_no));
        }
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(fmt::format("{}:{}: empty key", origin, line_no));
        config.entries_[std::string(key)] = std::string(value);
    }
    return config;
}

Config Config::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot open config file '{}'", path.string()));
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str(), path.string());
}

void Config::apply_override(std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) {
        throw ConfigError(fmt::format("override '{}' is not of the form key=value", assignment));
    }
    const auto key = trim(assignment.substr(0, eq));
    if (key.empty()) throw ConfigError(fmt::format("override '{}' has an empty key", assignment));
    set(std::string(key), std::string(trim(assignment.substr(eq + 1))));
}

void Config::set(const std::string& key, const std::string& value) {
    entries_[key] = value;
}

bool Config::has(const std::string& key) const {
    return entries_.contains(key);
}

std::optional<std::string> Config::raw(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    used_.insert(key);
    return it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    return raw(key).value_or(fallback);
}

double Config::get_double(const std::string& key, double fallback) const {
    const auto value = raw(key);
    return value ? parse_number<double>(key, *value) : fallback;
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) const {
    const auto value = raw(key);
    return value ? parse_number<std::int64_t>(key, *value) : fallback;
}

std::uint64_t Config::get_uint(const std::string& key, std::uint64_t fallback) const {
    const auto value = raw(key);
    return value ? parse_number<std::uint64_t>(key, *value) : fallback;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    const auto value = raw(key);
    if (!value) return fallback;
    std::string lower = *value;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "true" || lower == "yes" || lower == "on" || lower == "1") return true;
    if (lower == "false" || lower == "no" || lower == "off" || lower == "0") return false;
    throw ConfigError(fmt::format("config key '{}': '{}' is not a boolean", key, *value));
}

std::optional<double> Config::get_optional_double(const std::string& key) const {
    const auto value = raw(key);
    if (!value || value->empty() || *value == "none") return std::nullopt;
    return parse_number<double>(key, *value);
}

double Config::get_double(const std::string& primary, const std::string& secondary, double fallback) const {
    const double shared = get_double(secondary, fallback);
    return get_double(primary, shared);
}

std::int64_t Config::get_int(const std::string& primary, const std::string& secondary, std::int64_t fallback) const {
    const std::int64_t shared = get_int(secondary, fallback);
    return get_int(primary, shared);
}

void Config::require_all_used() const {
    std::vector<std::string> unused;
    for (const auto& [key, value] : entries_) {
        if (!used_.contains(key)) unused.push_back(key);
    }
    if (!unused.empty()) {
        throw ConfigError(fmt::format("unknown config key(s): {}", fmt::join(unused, ", ")));
    }
}

}  // namespace qkdtime
