#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace weakprog {

/// 64-bit FNV-1a, used for content hashes and file trailers.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

/// Shortest representation that round-trips to the same double.
std::string format_double(double v);
std::string format_fixed(double v, int decimals);
/// Exact hexadecimal float ("%a").
std::string format_hex(double v);

double parse_double(std::string_view s, std::string_view what);
std::int64_t parse_int(std::string_view s, std::string_view what);
std::uint64_t parse_u64(std::string_view s, std::string_view what);

std::vector<std::string> split(std::string_view s, char delim);
std::string_view trim(std::string_view s);

std::string read_file(const std::filesystem::path& path);
/// Writes atomically enough for our purposes: temp file then rename.
void write_file(const std::filesystem::path& path, std::string_view content);

/// Flat view of a `[section]` / `key = value` text config. Keys are stored
/// as "section.key". Later assignments override earlier ones.
class KvConfig {
public:
    static KvConfig parse(std::string_view text, std::string_view origin = "<string>");
    static KvConfig load(const std::filesystem::path& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    /// Canonical text (sorted keys), stable across runs; hashed into manifests.
    std::string canonical() const;
    const std::map<std::string, std::string>& values() const { return values_; }
    const std::string& origin() const { return origin_; }

private:
    std::map<std::string, std::string> values_;
    std::string origin_;
};

}  // namespace weakprog
