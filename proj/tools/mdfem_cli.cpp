#include "mdfem/cli.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"MDFEM: multivariate decomposition finite element method"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_path;
    std::string cache_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;

    for (const char* name : {"plan", "run", "study", "baseline", "validate"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "configuration file");
        sub->add_option("--out", out_path, "output path (CSV or report)");
        sub->add_option("--cache", cache_path, "generating-vector cache directory");
        sub->add_option("--seed", seed, "seed override")->each([&](const std::string&) {
            seed_set = true;
        });
        sub->add_option("--threads", threads, "worker thread count");
    }

    CLI11_PARSE(app, argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        mdfem::cli::RunConfig cfg;
        if (!config_path.empty()) {
            cfg = mdfem::cli::load_config(config_path);
        } else if (command != "validate") {
            std::cerr << "config error: --config is required for " << command << "\n";
            return 2;
        } else {
            cfg.epsilons = {0.05};
        }
        if (seed_set) cfg.seed = seed;
        if (threads > 0) cfg.threads = threads;
        if (!cache_path.empty()) cfg.cache = cache_path;
        if (const char* env = std::getenv("MDFEM_CACHE")) cfg.cache = env;

        const bool fault = [] {
            const char* f = std::getenv("MDFEM_FAULT");
            return f && std::string(f) == "flip-sign";
        }();

        std::ofstream file;
        std::ostream* out = &std::cout;
        const std::string target = !out_path.empty() ? out_path : cfg.csv;
        if (!target.empty() && (command == "study" || command == "baseline")) {
            file.open(target);
            if (!file) {
                std::cerr << "config error: cannot open output file " << target << "\n";
                return 2;
            }
            out = &file;
        }
        return mdfem::cli::run_command(command, cfg, *out, std::cerr, fault);
    } catch (const mdfem::cli::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}
