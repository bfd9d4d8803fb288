// Command-line front end: one subcommand per experiment kind plus `rerun`,
// which repeats a finished run from its metadata file. Flags beat config-file
// values; every flag can also be given through --config as a TOML key of the
// same name.

#include <cstdio>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "tailq/errors.hpp"
#include "tailq/experiment.hpp"
#include "tailq/report.hpp"

#ifndef TAILQ_BUILD_ID
#define TAILQ_BUILD_ID "dev"
#endif

namespace {

void add_shared(CLI::App* sub, tailq::ExperimentConfig& cfg) {
    sub->add_option("--arrival", cfg.arrival, "inter-arrival law, e.g. exp(rate=0.2)");
    sub->add_option("--service", cfg.service,
                    "service law, e.g. pareto(shape=2.5, scale=0.6)");
    sub->add_option("--feedback-p", cfg.feedback_p, "feedback probability in [0,1)");
    sub->add_option("--reps", cfg.reps, "replications (cycles for stationary kinds)");
    sub->add_option("--seed", cfg.seed, "base seed; replication j draws from stream j");
    sub->add_option("--workers", cfg.workers, "worker threads; 0 uses every core");
    sub->add_option("--out", cfg.out, "output directory");
    sub->add_option("--grid", cfg.grid.points, "explicit threshold grid, ascending");
    sub->add_option("--grid-start", cfg.grid.start,
                    "geometric grid start; 0 means 10x the mean service time");
    sub->add_option("--grid-factor", cfg.grid.factor, "geometric grid ratio");
    sub->add_option("--grid-points", cfg.grid.count, "geometric grid length");
    sub->add_option("--event-cap", cfg.event_cap, "per-replication event budget");
    sub->add_flag("--check", cfg.check, "evaluate the built-in pass/fail checks");
    sub->set_config("--config", "", "TOML file holding the same keys as the flags");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulation and tail analytics for the single-server feedback queue"};
    app.require_subcommand(1);
    app.set_version_flag("--version", TAILQ_BUILD_ID);

    tailq::ExperimentConfig cfg;
    std::string meta_path;
    int workers_override = -1;
    std::string out_override;

    CLI::App* means = app.add_subcommand(
        "validate-means", "compare simulated queue-length and pass-count means "
                          "against the closed forms for Poisson input");
    add_shared(means, cfg);
    means->add_option("--means-k-max", cfg.means_k_max,
                      "compare E(X_1) through E(X_k)");

    CLI::App* busy = app.add_subcommand(
        "busy-tail", "tail of the busy-period length against its one-big-jump "
                     "asymptote");
    add_shared(busy, cfg);
    busy->add_option("--e-tau-h", cfg.e_tau_h,
                     "mean customers per busy period; required for non-Poisson input");

    CLI::App* count = app.add_subcommand(
        "count-tail", "tail of the number of customers served in a busy period");
    add_shared(count, cfg);
    count->add_option("--e-tau-h", cfg.e_tau_h,
                      "mean customers per busy period; required for non-Poisson input");

    CLI::App* sojourn = app.add_subcommand(
        "sojourn-tail", "tail of the first sojourn time of a customer arriving "
                        "at an empty queue");
    add_shared(sojourn, cfg);
    sojourn->add_option("--prefactor", cfg.prefactor,
                        "inject E(1 + X_(K-1)) instead of deriving it");

    CLI::App* tk = app.add_subcommand(
        "finite-tk", "tails of the first k completion times against their "
                     "finite-sum forms");
    add_shared(tk, cfg);
    tk->add_option("--tk-max", cfg.tk_max, "largest completion index to estimate");

    CLI::App* stationary = app.add_subcommand(
        "stationary-tail", "stationary sojourn tail over regeneration cycles");
    add_shared(stationary, cfg);

    CLI::App* psbj = app.add_subcommand(
        "psbj", "how often a tail exceedance comes with a single big service");
    add_shared(psbj, cfg);
    psbj->add_option("--mode", cfg.psbj_mode, "busy or stationary")
        ->check(CLI::IsMember({"busy", "stationary"}));
    psbj->add_option("--e-tau-h", cfg.e_tau_h,
                     "mean customers per busy period; required for non-Poisson input");

    CLI::App* decomp = app.add_subcommand(
        "decomposition", "split first-sojourn exceedances by the cycle and "
                         "position of the big service");
    add_shared(decomp, cfg);
    decomp->add_option("--target-p", cfg.target_p,
                       "pick the threshold at this empirical tail level");
    decomp->add_option("--x", cfg.decomp_x, "fixed threshold, skips the pilot pass");
    decomp->add_option("--k-max", cfg.k_max, "largest cycle index kept");
    decomp->add_option("--l-max", cfg.l_max, "largest number of later cycles kept");
    decomp->add_option("--j-max", cfg.j_max, "largest queue-ahead count kept");

    CLI::App* fluid = app.add_subcommand(
        "fluid-check", "plant a huge service and compare later completion times "
                       "with the fluid multipliers");
    add_shared(fluid, cfg);
    fluid->add_option("--jump", cfg.jump,
                      "planted service time; 0 means 1e4x the mean service time");
    fluid->add_option("--ell-max", cfg.ell_max, "compare T_1 through T_(1+ell)");

    CLI::App* rerun = app.add_subcommand(
        "rerun", "repeat a finished run exactly from its metadata file");
    rerun->add_option("--meta", meta_path, "metadata.json of the run to repeat")
        ->required();
    rerun->add_option("--workers", workers_override,
                      "override the stored worker count; output bytes do not change");
    rerun->add_option("--out", out_override, "write the repeat somewhere else");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    CLI::App* sub = app.get_subcommands().front();
    try {
        if (sub == rerun) {
            cfg = tailq::config_from_json(tailq::read_file(meta_path));
            if (workers_override >= 0) cfg.workers = workers_override;
            if (!out_override.empty()) cfg.out = out_override;
        } else {
            cfg.kind = sub->get_name();
        }
        const tailq::RunResult result = tailq::run_experiment(cfg);
        for (const tailq::CheckLine& line : result.checks)
            std::printf("[%s] %s\n", line.pass ? "PASS" : "FAIL", line.text.c_str());
        if (result.dropped > 0)
            std::printf("note: %llu replications exceeded the event budget and were "
                        "dropped\n",
                        static_cast<unsigned long long>(result.dropped));
        for (const std::string& f : result.files) std::printf("wrote %s\n", f.c_str());
        if (result.check_performed && !result.check_passed) return 4;
        return 0;
    } catch (const tailq::ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const tailq::DomainError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const tailq::EmptyGrid& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
