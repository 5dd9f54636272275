#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace qkdtime {

/// Flat `section.key = value` configuration.
///
/// Grammar, one entry per line:
///
///     # comment            (also after a value)
///     model.kind = rw_s
///     link.delay_fwd_ns = 50
///
/// Keys are case-sensitive, whitespace around `=` is ignored, a repeated key
/// overrides the earlier one. Every key must be read by some consumer;
/// `require_all_used` reports leftovers so typos fail loudly.
class Config {
public:
    Config() = default;

    static Config parse(std::string_view text, std::string_view origin = "<string>");
    static Config from_file(const std::filesystem::path& path);

    /// Applies a `key=value` override, as given on the command line.
    void apply_override(std::string_view assignment);
    void set(const std::string& key, const std::string& value);

    bool has(const std::string& key) const;
    std::optional<std::string> raw(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::optional<double> get_optional_double(const std::string& key) const;

    /// Looks up `primary`, then `secondary`, then falls back.
    double get_double(const std::string& primary, const std::string& secondary, double fallback) const;
    std::int64_t get_int(const std::string& primary, const std::string& secondary, std::int64_t fallback) const;

    /// Throws ConfigError listing keys nobody asked for.
    void require_all_used() const;

    const std::map<std::string, std::string>& entries() const noexcept { return entries_; }

private:
    std::map<std::string, std::string> entries_;
    mutable std::set<std::string> used_;
};

}  // namespace qkdtime
