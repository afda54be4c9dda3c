// conjulab: desk-scale laboratory for certified conjugacy computations around
// operators with an invariant stable/unstable splitting.
//
//   conjulab constants|solve|verify|sweep --config <file> [--out <dir>]
//                                         [--seed <u64>] [--jobs <n>]
//
// Exit codes: 0 all-pass, 1 verification failure, 2 config/admissibility
// error, 3 budget infeasible. CONJULAB_LOG=off|error|warn|info|debug controls
// log verbosity on stderr.

#include <optional>
#include <string>

#include "CLI11.hpp"

#include "conjulab/commands.hpp"
#include "conjulab/log.hpp"

namespace {

struct CliArgs {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    int jobs = 1;
};

void add_common(CLI::App* cmd, CliArgs& args) {
    cmd->add_option("--config", args.config_path, "scenario configuration file (JSON, schema 1)")
        ->required();
    cmd->add_option("--out", args.out_dir, "output directory for report.jsonl / sweep.csv");
    cmd->add_option("--seed", args.seed, "override the config's global seed");
    cmd->add_option("--jobs", args.jobs, "scenario-level parallelism")->check(CLI::PositiveNumber);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"certified conjugacy laboratory"};
    app.require_subcommand(1);

    CliArgs args;
    CLI::App* constants = app.add_subcommand("constants", "certificate and derived thresholds");
    CLI::App* solve = app.add_subcommand("solve", "pointwise h / h^{-1} values");
    CLI::App* verify = app.add_subcommand("verify", "run the scenario verifier suites");
    CLI::App* sweep = app.add_subcommand("sweep", "residual/rate columns along one axis");
    for (CLI::App* cmd : {constants, solve, verify, sweep}) add_common(cmd, args);

    CLI11_PARSE(app, argc, argv);

    conjulab::LabConfig cfg;
    try {
        cfg = conjulab::load_config_file(args.config_path);
    } catch (const conjulab::config_error& e) {
        std::cerr << "config: " << e.what() << '\n';
        return conjulab::kExitConfigError;
    }

    conjulab::RunOptions opts;
    opts.out_dir = args.out_dir;
    opts.seed = args.seed;
    opts.jobs = args.jobs;

    conjulab::log::info("loaded " + std::to_string(cfg.scenarios.size()) + " scenario(s) from " +
                        args.config_path);

    if (constants->parsed()) return conjulab::cmd_constants(cfg, opts);
    if (solve->parsed()) return conjulab::cmd_solve(cfg, opts);
    if (verify->parsed()) return conjulab::cmd_verify(cfg, opts);
    return conjulab::cmd_sweep(cfg, opts);
}
