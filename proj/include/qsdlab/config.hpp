#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace qsd {

/**
 * Flat key/value configuration.
 *
 *   # comment
 *   grid.n = 3999
 *   [potential]
 *   family = quadratic     # stored as potential.family
 *
 * Later assignments win; command-line flags are applied last.
 */
class RunConfig {
public:
    static RunConfig parse(std::istream& in, const std::string& source = "<config>");
    static RunConfig load(const std::filesystem::path& path);

    std::string command;

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool has(const std::string& key) const { return values_.count(key) != 0; }
    std::optional<std::string> get(const std::string& key) const;
    const std::map<std::string, std::string>& entries() const { return values_; }

    // Typed access; throw ValidationError naming the key on malformed values.
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::optional<double> get_optional_double(const std::string& key) const;
    long long get_int(const std::string& key, long long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

private:
    std::map<std::string, std::string> values_;
};

// Keys understood by the command-line front end.
const std::vector<std::string>& known_config_keys();

// One diagnostic per violated invariant, each naming the offending key. Empty iff valid.
std::vector<std::string> validate(const RunConfig& config);

}  // namespace qsd
