#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tpm/commands.hpp"

namespace {

// "lo:hi" or a single value.
bool parse_range(const std::string& text, tpm::Index& lo, tpm::Index& hi) {
    try {
        const auto colon = text.find(':');
        std::size_t used = 0;
        if (colon == std::string::npos) {
            lo = hi = std::stol(text, &used);
            return used == text.size();
        }
        const std::string a = text.substr(0, colon);
        const std::string b = text.substr(colon + 1);
        lo = std::stol(a, &used);
        if (used != a.size()) return false;
        hi = std::stol(b, &used);
        return used == b.size();
    } catch (const std::exception&) {
        return false;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-point energy measurement simulator"};
    app.require_subcommand(1);

    tpm::CommandOptions opt;
    double tol = 0.0;
    std::string dims;

    auto add_common = [&](CLI::App* sub, bool needs_scenario, bool needs_out) {
        auto* s = sub->add_option("--scenario", opt.scenario, "scenario file (JSON)");
        if (needs_scenario) s->required()->check(CLI::ExistingFile);
        auto* o = sub->add_option("--out", opt.out, "output directory");
        if (needs_out) o->required();
        sub->add_option("--tol", tol, "check tolerance (default: the scenario's check_tol)");
        sub->add_option("--format", opt.format, "csv: tables as CSV plus the report; doc: report only")
            ->check(CLI::IsMember({"csv", "doc"}));
    };

    auto* run_tpm = app.add_subcommand("run-tpm", "system-only protocol: joint table and work distribution");
    add_common(run_tpm, true, true);

    auto* run_ext = app.add_subcommand("run-extended", "system + two probes: outcome table and total work");
    add_common(run_ext, true, true);

    auto* verify = app.add_subcommand("verify", "run the scenario checks");
    add_common(verify, true, false);
    verify->add_option("--checks", opt.checks, "comma-separated subset of checks (default: all)")->delimiter(',');
    verify->add_option("--seed", opt.seed, "seed for random state samples");
    verify->add_option("--count", opt.count, "random state samples for distribution_equality");

    auto* sweep = app.add_subcommand("sweep", "randomized scenario families");
    add_common(sweep, false, true);
    sweep->add_option("--mode", opt.mode, "eigenstate-xi | pointer-equal | weak-conservation-family");
    sweep->add_option("--seed", opt.seed, "master seed");
    sweep->add_option("--count", opt.count, "number of scenarios")->check(CLI::PositiveNumber);
    sweep->add_option("--system-dims", dims, "system dimension range lo:hi (default 2:4)");
    sweep->add_option("--max-probe-dim", opt.probe_max, "largest probe dimension (default 4)");
    sweep->add_option("--threads", opt.threads, "worker threads (0: all cores)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : tpm::kExitInputError;
    }

    for (auto* sub : {run_tpm, run_ext, verify, sweep}) {
        if (sub->parsed() && sub->count("--tol") > 0) {
            opt.tol = tol;
        }
    }
    if (!dims.empty() && !parse_range(dims, opt.system_min, opt.system_max)) {
        std::cerr << "error: --system-dims expects lo:hi\n";
        return tpm::kExitInputError;
    }

    if (run_tpm->parsed()) return tpm::cmd_run_tpm(opt);
    if (run_ext->parsed()) return tpm::cmd_run_extended(opt);
    if (verify->parsed()) return tpm::cmd_verify(opt);
    return tpm::cmd_sweep(opt);
}
