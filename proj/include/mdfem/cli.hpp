#ifndef MDFEM_CLI_HPP
#define MDFEM_CLI_HPP

#include "mdfem/mdfemdriver.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace mdfem::cli {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Line-based `section.key = value` configuration.  Sections: problem,
/// weights, run, plan, output.  Unknown keys are rejected.
struct RunConfig {
    // problem
    std::string family = "dyadic";
    double c = 0.1;
    double sigma = 4.0;
    double alphahat = 2.0;
    double amp = 1.0;
    double cdelta = 1.0;
    double delta = 0.5;
    double bnorm = 1.0;
    double bbase = 0.5;
    long jmax = 6;
    std::string a0 = "1";
    std::string f = "1";
    std::string g = "1";
    double t = 1.0;
    double tprime = 1.0;

    // weights
    double pstar = 0.5;
    std::string bfamily = "model";  // model | finite
    std::vector<double> bvalues;

    // run
    std::vector<double> epsilons;
    std::string mode = "auto";  // auto | deterministic | randomized
    int shifts = 8;
    std::uint64_t seed = 1;
    int replications = 1;
    int threads = 1;
    int oracle_s = 6;
    int oracle_degree = 6;

    // plan
    std::string strategy = "cbc";  // cbc | random | fixed
    std::string cache;
    double fem_constant = 1.0;

    // output
    std::string csv;
    bool timing = false;  // when true, wall_ms carries measured time
};

RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::string& path);

DiffusionModel make_model(const RunConfig& cfg);
Weights make_weights(const RunConfig& cfg, const DiffusionModel& model);
Functional make_functional(const RunConfig& cfg);
ClosedForm make_source(const RunConfig& cfg);
SearchOptions make_search_options(const RunConfig& cfg);

/// Mode resolution: "auto" follows the derived branch; explicit modes must
/// agree with the derived branch (the two branches do not overlap).
CubatureMode resolve_mode(const RunConfig& cfg, const RateParams& rates);

int cmd_plan(const RunConfig& cfg, std::ostream& out);
int cmd_run(const RunConfig& cfg, std::ostream& out);
int cmd_study(const RunConfig& cfg, std::ostream& csv, std::ostream& log);
int cmd_baseline(const RunConfig& cfg, std::ostream& csv, std::ostream& log);
int cmd_validate(const RunConfig& cfg, std::ostream& log, bool inject_sign_fault = false);

/// Maps exceptions to the documented exit codes: 2 config, 3 admissibility,
/// 4 numerical.
int run_command(const std::string& command, const RunConfig& cfg, std::ostream& out,
                std::ostream& log, bool inject_sign_fault = false);

}  // namespace mdfem::cli

#endif
