#include "qsdlab/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include "qsdlab/errors.hpp"

namespace qsd {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

const std::vector<std::string> kFamilies = {"zero", "quadratic", "shifted-power", "tabulated"};
const std::vector<std::string> kExamples = {"brownian", "ou"};
const std::vector<std::string> kInitial = {"uniform", "gaussian-truncated", "qsd", "custom"};

bool contains(const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
}

std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) out += (out.empty() ? "" : ", ") + s;
    return out;
}

}  // namespace

RunConfig RunConfig::parse(std::istream& in, const std::string& source) {
    RunConfig cfg;
    std::string line;
    std::string section;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ValidationError(source + ":" + std::to_string(number) + ": malformed section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ValidationError(source + ":" + std::to_string(number) + ": expected key = value");
        }
        std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ValidationError(source + ":" + std::to_string(number) + ": empty key");
        }
        if (!section.empty()) key = section + "." + key;
        cfg.values_[key] = value;
    }
    return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot read config file " + path.string());
    }
    return parse(in, path.string());
}

std::optional<std::string> RunConfig::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
    return get(key).value_or(fallback);
}

double RunConfig::get_double(const std::string& key, double fallback) const {
    return get_optional_double(key).value_or(fallback);
}

std::optional<double> RunConfig::get_optional_double(const std::string& key) const {
    const auto v = get(key);
    if (!v) return std::nullopt;
    try {
        std::size_t used = 0;
        const double d = std::stod(*v, &used);
        if (used != v->size() || !std::isfinite(d)) throw std::invalid_argument(key);
        return d;
    } catch (const std::exception&) {
        throw ValidationError(key + " must be a finite number, got `" + *v + "`");
    }
}

long long RunConfig::get_int(const std::string& key, long long fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    try {
        std::size_t used = 0;
        const long long i = std::stoll(*v, &used);
        if (used != v->size()) throw std::invalid_argument(key);
        return i;
    } catch (const std::exception&) {
        throw ValidationError(key + " must be an integer, got `" + *v + "`");
    }
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "on" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "off" || *v == "no") return false;
    throw ValidationError(key + " must be a boolean, got `" + *v + "`");
}

const std::vector<std::string>& known_config_keys() {
    static const std::vector<std::string> keys = {
        "example", "example.N", "example.d",
        "potential.family", "potential.lambda", "potential.delta", "potential.table_path",
        "potential.cdfi",
        "grid.x_min", "grid.x_max", "grid.n",
        "flow.t_max", "flow.dt", "flow.samples",
        "mc.dt", "mc.horizon", "mc.particles", "mc.resample", "mc.bridge_correction",
        "mc.threads", "mc.bins",
        "initial.family", "initial.mean", "initial.sd", "initial.path",
        "rates.lambda0_lower", "rates.probe_min", "rates.probe_max", "identity.probe_max",
        "report.window_from", "report.window_to", "report.x0",
        "output.dir", "seed",
    };
    return keys;
}

std::vector<std::string> validate(const RunConfig& config) {
    std::vector<std::string> out;
    auto guarded = [&](auto check) {
        try {
            check();
        } catch (const ValidationError& e) {
            out.emplace_back(e.what());
        }
    };

    for (const auto& [key, value] : config.entries()) {
        if (!contains(known_config_keys(), key)) out.push_back("unknown key `" + key + "`");
    }

    std::string family = "zero";
    guarded([&] {
        const auto example = config.get("example");
        if (example && !contains(kExamples, *example)) {
            out.push_back("example must be one of: " + join(kExamples));
        }
        if (example && *example == "ou") family = "quadratic";
        family = config.get_string("potential.family", family);
        if (!contains(kFamilies, family)) {
            out.push_back("potential.family must be one of: " + join(kFamilies));
        }
    });
    guarded([&] {
        if (config.get_double("example.N", 1.0) <= 0.0) out.push_back("example.N must be > 0");
    });
    guarded([&] {
        if (config.get_int("example.d", 1) < 1) out.push_back("example.d must be >= 1");
    });
    guarded([&] {
        if (family == "quadratic" && !(config.get_double("potential.lambda", 1.0) > 0.0)) {
            out.push_back("potential.lambda must be > 0 for the quadratic family");
        }
    });
    guarded([&] {
        if (family == "shifted-power" && !(config.get_double("potential.delta", 3.0) > 2.0)) {
            out.push_back("potential.delta must be > 2: the shifted-power potential (x+1)^delta "
                          "requires delta > 2");
        }
    });
    guarded([&] {
        if (family == "tabulated") {
            const auto path = config.get("potential.table_path");
            if (!path) {
                out.push_back("potential.table_path is required for the tabulated family");
            } else if (!std::filesystem::exists(*path)) {
                out.push_back("potential.table_path does not exist: " + *path);
            }
        }
    });
    guarded([&] { config.get_bool("potential.cdfi", false); });
    guarded([&] {
        if (config.get_int("grid.n", 1999) < 3) out.push_back("grid.n must be >= 3");
    });
    guarded([&] {
        const auto lo = config.get_optional_double("grid.x_min");
        const auto hi = config.get_optional_double("grid.x_max");
        if (lo && hi && !(*lo < *hi)) out.push_back("grid.x_min must be < grid.x_max");
        if (lo && family == "shifted-power" && *lo < -1.0) {
            out.push_back("grid.x_min must be >= -1 for the shifted-power family");
        }
    });
    guarded([&] {
        const auto v = config.get_optional_double("flow.t_max");
        if (v && !(*v > 0.0)) out.push_back("flow.t_max must be > 0");
    });
    guarded([&] {
        const auto v = config.get_optional_double("flow.dt");
        if (v && !(*v > 0.0)) out.push_back("flow.dt must be > 0");
    });
    guarded([&] {
        if (config.get_int("flow.samples", 141) < 2) out.push_back("flow.samples must be >= 2");
    });
    guarded([&] {
        const double dt = config.get_double("mc.dt", 1e-3);
        const double horizon = config.get_double("mc.horizon", 1.0);
        if (!(dt > 0.0)) out.push_back("mc.dt must be > 0");
        if (!(horizon > 0.0)) out.push_back("mc.horizon must be > 0");
        if (dt > horizon) out.push_back("mc.dt must not exceed mc.horizon");
    });
    guarded([&] {
        if (config.get_int("mc.particles", 100000) < 100) out.push_back("mc.particles must be >= 100");
    });
    guarded([&] {
        if (config.get_int("mc.threads", 0) < 0) out.push_back("mc.threads must be >= 0");
    });
    guarded([&] {
        if (config.get_int("mc.bins", 5) < 3) out.push_back("mc.bins must be >= 3");
    });
    guarded([&] { config.get_bool("mc.resample", false); });
    guarded([&] { config.get_bool("mc.bridge_correction", true); });
    guarded([&] {
        if (config.get_int("seed", 1) < 0) out.push_back("seed must be >= 0");
    });
    guarded([&] {
        const std::string init = config.get_string("initial.family", "uniform");
        if (!contains(kInitial, init)) {
            out.push_back("initial.family must be one of: " + join(kInitial));
        }
        if (init == "gaussian-truncated" && !(config.get_double("initial.sd", 0.3) > 0.0)) {
            out.push_back("initial.sd must be > 0");
        }
        if (init == "custom") {
            const auto path = config.get("initial.path");
            if (!path) {
                out.push_back("initial.path is required for a custom initial measure");
            } else if (!std::filesystem::exists(*path)) {
                out.push_back("initial.path does not exist: " + *path);
            }
        }
        config.get_optional_double("initial.mean");
    });
    guarded([&] {
        const auto v = config.get_optional_double("rates.lambda0_lower");
        if (v && !(*v > 0.0)) out.push_back("rates.lambda0_lower must be > 0");
    });
    for (const char* key : {"rates.probe_min", "rates.probe_max", "identity.probe_max",
                            "report.window_from", "report.window_to", "report.x0"}) {
        guarded([&] { config.get_optional_double(key); });
    }
    return out;
}

}  // namespace qsd
