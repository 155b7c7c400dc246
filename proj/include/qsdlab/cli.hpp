#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "qsdlab/config.hpp"
#include "qsdlab/grid_measure.hpp"
#include "qsdlab/io.hpp"
#include "qsdlab/potential.hpp"

namespace qsd {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitNumerical = 2;

// Parses `qsdlab <command> [flags]`, runs it and maps errors to exit codes.
// Diagnostics go to `err` as single lines.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Potential and grid selected by a configuration (example shortcuts included).
struct ProblemSetup {
    PotentialSpec spec;
    Grid1D grid;
    std::string example;  // "brownian", "ou" or empty
};

ProblemSetup make_setup(const RunConfig& config);

// Smallest x (scanning in steps of 0.05 from x_min) where
// e^{-(V(x) - min V)} (1 + |x|)^2 < 1e-12.
double default_truncation(const PotentialSpec& spec, double x_min);

// Runs a validated configuration and returns the staged output files.
OutputBundle execute(const RunConfig& config, std::ostream& out);

}  // namespace qsd
