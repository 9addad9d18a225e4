#ifndef PANELSSM_CLI_HPP
#define PANELSSM_CLI_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "panelssm/mif.hpp"
#include "panelssm/params.hpp"

namespace panelssm {

// Exit codes reported by run().
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitPartial = 3;

struct ExperimentConfig {
    std::string command;
    std::string model = "gompertz";
    std::size_t U = 0;
    std::size_t N = 0;
    NamedValues overrides;  // param = <name> <value>
    std::string data_dir;   // load a saved panel instead of simulating

    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> data_seed;  // defaults to seed
    std::size_t workers = 1;
    std::string out = "out";

    std::size_t J = 1000;
    std::size_t reps = 10;

    std::size_t M = 50;
    std::size_t nseq = 1;
    RwSdSpec rw_sd;
    CoolingSchedule cooling;
    bool marginalize = false;
    std::size_t max_failures = 20;
    std::optional<std::size_t> block_reps;  // block-refine defaults to 1, profile to 0
    NamedValues lower, upper;               // random-start / profile bounds

    std::string focal;
    double grid_lo = 0.0, grid_hi = 0.0;
    std::size_t grid_count = 0;
    std::size_t nprof = 5;
    std::size_t eval_reps = 10;
    std::size_t eval_J = 2500;

    double span = 0.75;
    double level = 0.95;
    std::string input;  // mcap: profile table CSV
};

// Flat key = value entries -> config. Repeated keys accumulate for param,
// rw_sd, lower, and upper; scalar keys take the last value. Unknown keys and
// malformed values throw ConfigError.
ExperimentConfig parse_config(const std::vector<std::pair<std::string, std::string>>& entries);
ExperimentConfig parse_config_file(const std::string& path);

// Canonical echo with every effective value materialized; parse_config on the
// result reproduces the config, so a manifest re-runs bit-identically.
std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& c);

// Structural checks that need no model: command known, sizes positive, seed
// present where required. Throws ConfigError.
void validate_config(const ExperimentConfig& c);

// Executes the experiment and writes artifact CSVs plus manifest.txt under
// c.out. Config errors are reported before any model work starts.
int run(const ExperimentConfig& c);

}  // namespace panelssm

#endif
