#pragma once

#include "cvar_reach/grid.hpp"
#include "cvar_reach/model.hpp"
#include "cvar_reach/monte_carlo.hpp"
#include "cvar_reach/value_iteration.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cvar_reach::app {

inline constexpr int kSchemaVersion = 1;

/// Raised for unreadable, malformed or incomplete configs. `where` names the
/// offending key path or source line.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& where, const std::string& what)
        : std::runtime_error(where + ": " + what), where_(where) {}
    const std::string& where() const { return where_; }

private:
    std::string where_;
};

struct ModelConfig {
    std::string preset; // "pond-v1" or empty for inline parameters
    PondParams pond;
    std::vector<double> values; // disturbance law, kept raw so validate can inspect it
    std::vector<double> probs;
};

struct StateSpec {
    std::optional<double> min, max, step;
    std::vector<double> points;
};

struct CostConfig {
    double beta = 1e-3;
    double m = 10.0;
    std::string surface = "linear"; // "linear" or "indicator"
    double c_max = 5.0;
};

struct PolicyConfig {
    std::string kind = "fixed"; // "fixed" or "table"
    double control = 1.0;
};

struct McConfig {
    std::size_t samples = 100000;
    double sigma_w0 = 1e-12;
    double sigma_j0 = 1e-7;
    std::uint64_t seed = 20190710;
    std::size_t bootstrap = 200;
    PolicyConfig policy;
};

struct SetsConfig {
    std::vector<double> alphas;
    std::vector<double> risks;
    double margin_sigmas = 3.0;
    std::vector<double> special_case_epsilons{0.1};
};

struct RunConfig {
    int schema_version = kSchemaVersion;
    ModelConfig model;
    StateSpec states;
    std::vector<double> confidence;
    CostConfig cost;
    int horizon = 48;
    McConfig mc;
    SetsConfig sets;
    std::string output_dir;
};

RunConfig parse_config_text(const std::string& text, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path);
/// The pond benchmark defaults; identical to configs/pond.json.
RunConfig default_config();

/// Canonical JSON of the resolved config, with sorted keys.
std::string canonical_json(const RunConfig& cfg);

// Build module-level objects; these throw ConfigError on invalid values.
SystemModel build_model(const RunConfig& cfg);
std::shared_ptr<const AugmentedGrid> build_grid(const RunConfig& cfg);
StageCostSpec build_cost(const RunConfig& cfg);

/// Hashes of the config sections each stage depends on, so that rerunning a
/// later stage with unrelated edits does not invalidate earlier outputs.
std::string solve_hash(const RunConfig& cfg);
std::string mc_hash(const RunConfig& cfg);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

} // namespace cvar_reach::app
