#include "pipeline.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

using namespace cvar_reach::app;

int main(int argc, char** argv) {
    CLI::App app{"Risk-sensitive reachability: CVaR value iteration, Monte Carlo and safe sets"};
    app.require_subcommand(1);

    std::string config_path;
    CommonOptions opt;
    if (const char* env = std::getenv("CVAR_REACH_OUT"); env != nullptr && *env != '\0')
        opt.out = env;
    std::uint64_t seed = 0;
    std::string out;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON run configuration (defaults to the built-in pond setup)");
        sub->add_option("--out", out, "output directory (default $CVAR_REACH_OUT or ./cvar_reach_out)");
        sub->add_option("--seed", seed, "override mc.seed");
        sub->add_option("--threads", opt.threads, "worker threads, 0 = hardware concurrency");
        sub->add_flag("--quick", opt.quick, "cap Monte Carlo at 10^4 samples and 50 bootstrap resamples");
        sub->add_flag("--record-timings", opt.record_timings, "write wall-clock timings into manifests");
    };
    CLI::App* solve = app.add_subcommand("solve", "value iteration on the augmented grid");
    CLI::App* mc = app.add_subcommand("mc", "Monte Carlo W0 and J0* on the state grid");
    CLI::App* sets = app.add_subcommand("sets", "safe sets from solve and mc outputs, with consistency checks");
    CLI::App* validate = app.add_subcommand("validate", "oracle and property suites");
    for (CLI::App* sub : {solve, mc, sets, validate})
        add_common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }

    RunConfig cfg;
    try {
        cfg = config_path.empty() ? default_config() : load_config(config_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    }
    if (!cfg.output_dir.empty())
        opt.out = cfg.output_dir;
    if (!out.empty())
        opt.out = out;
    CLI::App* chosen = app.get_subcommands().front();
    if (chosen->count("--seed") > 0)
        opt.seed = seed;
    cfg = resolve(std::move(cfg), opt);

    try {
        if (chosen == solve)
            return cmd_solve(cfg, opt, std::cout);
        if (chosen == mc)
            return cmd_mc(cfg, opt, std::cout);
        if (chosen == sets)
            return cmd_sets(cfg, opt, std::cout);
        return cmd_validate(cfg, opt, std::cout);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_numeric;
    }
}
