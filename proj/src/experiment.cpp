#include "tailq/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <variant>

#include "json.hpp"
#include "tailq/asymptotics.hpp"
#include "tailq/errors.hpp"
#include "tailq/estimate.hpp"
#include "tailq/parallel.hpp"
#include "tailq/report.hpp"
#include "tailq/simulate.hpp"

#ifndef TAILQ_BUILD_ID
#define TAILQ_BUILD_ID "dev"
#endif

namespace tailq {

namespace {

using ordered_json = nlohmann::ordered_json;

bool known_kind(const std::string& kind) {
    for (const char* k : kExperimentKinds)
        if (kind == k) return true;
    return false;
}

bool poisson_input(const ModelParams& params) {
    return std::holds_alternative<Exponential>(params.arrival);
}

ordered_json config_json(const ExperimentConfig& cfg) {
    ordered_json j;
    j["kind"] = cfg.kind;
    j["arrival"] = cfg.arrival;
    j["service"] = cfg.service;
    j["feedback-p"] = cfg.feedback_p;
    j["reps"] = cfg.reps;
    j["seed"] = cfg.seed;
    j["workers"] = cfg.workers;
    j["out"] = cfg.out;
    if (!cfg.grid.points.empty()) j["grid"] = cfg.grid.points;
    j["grid-start"] = cfg.grid.start;
    j["grid-factor"] = cfg.grid.factor;
    j["grid-points"] = cfg.grid.count;
    j["event-cap"] = cfg.event_cap;
    j["check"] = cfg.check;
    if (cfg.prefactor) j["prefactor"] = *cfg.prefactor;
    if (cfg.e_tau_h) j["e-tau-h"] = *cfg.e_tau_h;
    j["tk-max"] = cfg.tk_max;
    j["means-k-max"] = cfg.means_k_max;
    j["mode"] = cfg.psbj_mode;
    j["target-p"] = cfg.target_p;
    if (cfg.decomp_x) j["x"] = *cfg.decomp_x;
    j["k-max"] = cfg.k_max;
    j["l-max"] = cfg.l_max;
    j["j-max"] = cfg.j_max;
    j["jump"] = cfg.jump;
    j["ell-max"] = cfg.ell_max;
    return j;
}

template <class T>
void read_key(const ordered_json& val, const char* key, T& into) {
    try {
        val.get_to(into);
    } catch (const nlohmann::json::exception&) {
        throw ParseError(std::string("config key '") + key + "' has the wrong type");
    }
}

ExperimentConfig config_from(const ordered_json& obj) {
    if (!obj.is_object()) throw ParseError("config must be a JSON object");
    ExperimentConfig cfg;
    for (const auto& [key, val] : obj.items()) {
        if (key == "kind") read_key(val, "kind", cfg.kind);
        else if (key == "arrival") read_key(val, "arrival", cfg.arrival);
        else if (key == "service") read_key(val, "service", cfg.service);
        else if (key == "feedback-p") read_key(val, "feedback-p", cfg.feedback_p);
        else if (key == "reps") read_key(val, "reps", cfg.reps);
        else if (key == "seed") read_key(val, "seed", cfg.seed);
        else if (key == "workers") read_key(val, "workers", cfg.workers);
        else if (key == "out") read_key(val, "out", cfg.out);
        else if (key == "grid") read_key(val, "grid", cfg.grid.points);
        else if (key == "grid-start") read_key(val, "grid-start", cfg.grid.start);
        else if (key == "grid-factor") read_key(val, "grid-factor", cfg.grid.factor);
        else if (key == "grid-points") read_key(val, "grid-points", cfg.grid.count);
        else if (key == "event-cap") read_key(val, "event-cap", cfg.event_cap);
        else if (key == "check") read_key(val, "check", cfg.check);
        else if (key == "prefactor") { double v; read_key(val, "prefactor", v); cfg.prefactor = v; }
        else if (key == "e-tau-h") { double v; read_key(val, "e-tau-h", v); cfg.e_tau_h = v; }
        else if (key == "tk-max") read_key(val, "tk-max", cfg.tk_max);
        else if (key == "means-k-max") read_key(val, "means-k-max", cfg.means_k_max);
        else if (key == "mode") read_key(val, "mode", cfg.psbj_mode);
        else if (key == "target-p") read_key(val, "target-p", cfg.target_p);
        else if (key == "x") { double v; read_key(val, "x", v); cfg.decomp_x = v; }
        else if (key == "k-max") read_key(val, "k-max", cfg.k_max);
        else if (key == "l-max") read_key(val, "l-max", cfg.l_max);
        else if (key == "j-max") read_key(val, "j-max", cfg.j_max);
        else if (key == "jump") read_key(val, "jump", cfg.jump);
        else if (key == "ell-max") read_key(val, "ell-max", cfg.ell_max);
        else throw ParseError("unknown config key '" + key + "'");
    }
    return cfg;
}

struct RunContext {
    const ExperimentConfig& cfg;
    ModelParams params;
    DerivedConstants c;
    int workers = 1;
    ordered_json run = ordered_json::object();
    RunResult result;
};

void emit(RunContext& ctx, const std::string& name, const std::string& content) {
    const std::string path = (std::filesystem::path(ctx.cfg.out) / name).string();
    write_file(path, content);
    ctx.result.files.push_back(path);
}

void add_check(RunContext& ctx, bool pass, std::string text) {
    ctx.result.checks.push_back({std::move(text), pass});
    if (!pass) ctx.result.check_passed = false;
}

void enforce_drop_limit(RunContext& ctx, std::uint64_t drops, std::uint64_t reps) {
    ctx.result.dropped += drops;
    if (reps > 0 && static_cast<double>(drops) > 0.001 * static_cast<double>(reps)) {
        char buf[128];
        std::snprintf(buf, sizeof buf,
                      "%llu of %llu replications exceeded the event budget (over 0.1%%)",
                      static_cast<unsigned long long>(drops),
                      static_cast<unsigned long long>(reps));
        throw Error(buf);
    }
}

void standard_comments(CsvBuilder& b, const RunContext& ctx) {
    b.comment("kind", ctx.cfg.kind);
    b.comment("arrival", format_distribution(ctx.params.arrival));
    b.comment("service", format_distribution(ctx.params.service));
    b.comment("feedback_p", ctx.c.p);
    b.comment("seed", std::to_string(ctx.cfg.seed));
    b.comment("reps", std::to_string(ctx.cfg.reps));
    b.comment("a", ctx.c.a);
    b.comment("b", ctx.c.b);
    b.comment("q", ctx.c.q);
    b.comment("r", ctx.c.r);
    b.comment("rho", ctx.c.rho);
}

std::string tail_csv(RunContext& ctx, const TailEstimate& est, const AsymptoteCurve* curve,
                     std::uint64_t dropped) {
    CsvBuilder b;
    standard_comments(b, ctx);
    if (curve) {
        b.comment("curve", curve->label);
        b.comment("validity", curve->validity_note);
    }
    b.comment("dropped", std::to_string(dropped));
    const bool with_ratio = !est.ratio.empty();
    if (with_ratio)
        b.header({"x", "n", "hits", "p_hat", "ci_low", "ci_high", "predicted", "ratio",
                  "ratio_low", "ratio_high"});
    else
        b.header({"x", "n", "hits", "p_hat", "ci_low", "ci_high"});
    for (std::size_t i = 0; i < est.grid().size(); ++i) {
        b.begin_row();
        b.cell(est.grid()[i]);
        b.cell(est.n());
        b.cell(est.hits()[i]);
        b.cell(est.p_hat()[i]);
        b.cell(est.ci_low()[i]);
        b.cell(est.ci_high()[i]);
        if (with_ratio) {
            b.cell(est.predicted[i]);
            b.cell(est.ratio[i]);
            b.cell(est.ratio_low[i]);
            b.cell(est.ratio_high[i]);
        }
        b.end_row();
    }
    return b.str();
}

// Grid point whose empirical tail sits closest to target on a log scale.
std::size_t nearest_index(const TailEstimate& est, double target) {
    std::size_t best = est.grid().size();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < est.grid().size(); ++i) {
        if (est.hits()[i] == 0) continue;
        const double d = std::fabs(std::log(est.p_hat()[i] / target));
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;  // == size() when every count is zero
}

void band_check(RunContext& ctx, const TailEstimate& est, double lo, double hi,
                const char* what, double target = 1e-3) {
    const std::size_t i = nearest_index(est, target);
    if (i == est.grid().size()) {
        add_check(ctx, false,
                  std::string(what) + ": no grid point has any exceedances");
        return;
    }
    const double ratio = est.ratio[i];
    char buf[200];
    std::snprintf(buf, sizeof buf, "%s: ratio %.4g at x = %g (p_hat %.3g) within [%g, %g]",
                  what, ratio, est.grid()[i], est.p_hat()[i], lo, hi);
    add_check(ctx, ratio >= lo && ratio <= hi, buf);
}

// |ratio - 1| must not grow over the last three grid points that still carry
// enough exceedances to measure it.
void trend_check(RunContext& ctx, const TailEstimate& est, const char* what,
                 std::uint64_t min_hits = 100) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < est.grid().size(); ++i)
        if (est.hits()[i] >= min_hits) idx.push_back(i);
    if (idx.size() < 3) {
        add_check(ctx, false,
                  std::string(what) + ": need three grid points with at least " +
                      std::to_string(min_hits) + " exceedances for the trend");
        return;
    }
    const std::size_t i0 = idx[idx.size() - 3];
    const std::size_t i1 = idx[idx.size() - 2];
    const std::size_t i2 = idx[idx.size() - 1];
    const double d0 = std::fabs(est.ratio[i0] - 1.0);
    const double d1 = std::fabs(est.ratio[i1] - 1.0);
    const double d2 = std::fabs(est.ratio[i2] - 1.0);
    char buf[220];
    std::snprintf(buf, sizeof buf,
                  "%s: |ratio-1| nonincreasing over x = %g, %g, %g (%.4g, %.4g, %.4g)",
                  what, est.grid()[i0], est.grid()[i1], est.grid()[i2], d0, d1, d2);
    add_check(ctx, d0 >= d1 && d1 >= d2, buf);
}

double resolve_e_tau_h(const RunContext& ctx) {
    if (ctx.cfg.e_tau_h) return *ctx.cfg.e_tau_h;
    if (poisson_input(ctx.params)) return poisson_mean_busy_count(ctx.c);
    throw DomainError("e-tau-h is required for non-Poisson arrivals "
                      "(no closed form; supply a simulation estimate)");
}

SimOptions sim_options(const RunContext& ctx) {
    SimOptions opt;
    opt.event_cap = ctx.cfg.event_cap;
    return opt;
}

// ---------------------------------------------------------------- kinds ----

void run_validate_means(RunContext& ctx) {
    if (!poisson_input(ctx.params))
        throw DomainError("validate-means needs exponential inter-arrival times "
                          "(Poisson input); the comparison formulas have no "
                          "closed form otherwise");
    const int kmax = ctx.cfg.means_k_max;
    struct Block {
        std::vector<MeanAccumulator> xk;
        MeanAccumulator pref, total;
        std::uint64_t drops = 0;
    };
    Block top;
    top.xk.resize(kmax);
    run_blocked<Block>(
        ctx.cfg.reps, ctx.workers,
        [&](std::uint64_t, std::uint64_t lo, std::uint64_t hi) {
            Block blk;
            blk.xk.resize(kmax);
            TaggedTrace tr;
            const SimOptions opt = sim_options(ctx);
            for (std::uint64_t j = lo; j < hi; ++j) {
                RandomStream rs(ctx.cfg.seed, j);
                try {
                    simulate_tagged_first(ctx.params, ctx.c, rs, tr, opt);
                } catch (const EventBudgetExceeded&) {
                    ++blk.drops;
                    continue;
                }
                for (int k = 1; k <= kmax; ++k)
                    if (k < tr.K) blk.xk[k - 1].add(tr.X[k]);
                blk.pref.add(prefactor_observation(tr));
                double services = tr.K;
                for (int x : tr.X) services += x;
                blk.total.add(services);
            }
            return blk;
        },
        [&](std::uint64_t, Block&& blk) {
            for (int k = 0; k < kmax; ++k) top.xk[k].merge(blk.xk[k]);
            top.pref.merge(blk.pref);
            top.total.merge(blk.total);
            top.drops += blk.drops;
        });
    enforce_drop_limit(ctx, top.drops, ctx.cfg.reps);

    struct Row {
        std::string name;
        const MeanAccumulator* acc;
        double predicted;
    };
    std::vector<Row> rows;
    const double lb = ctx.c.lambda * ctx.c.b;
    for (int k = 1; k <= kmax; ++k)
        rows.push_back({"mean_queue_" + std::to_string(k), &top.xk[k - 1],
                        poisson_mean_queue(ctx.c, k, lb)});
    rows.push_back({"prefactor", &top.pref, poisson_prefactor(ctx.c)});
    rows.push_back({"total_services", &top.total,
                    poisson_mean_total_services(ctx.c, 0.0, 0.0)});

    CsvBuilder b;
    standard_comments(b, ctx);
    b.comment("dropped", std::to_string(top.drops));
    b.header({"statistic", "n", "estimate", "se", "predicted", "z"});
    for (const Row& row : rows) {
        b.begin_row();
        b.cell(std::string_view(row.name));
        b.cell(row.acc->n());
        if (row.acc->n() >= 2) {
            const double est = row.acc->mean();
            const double se = row.acc->se();
            const double z = se > 0 ? (est - row.predicted) / se
                                    : (est == row.predicted ? 0.0
                                                            : std::numeric_limits<double>::infinity());
            b.cell(est);
            b.cell(se);
            b.cell(row.predicted);
            b.cell(z);
            if (ctx.cfg.check) {
                char buf[160];
                std::snprintf(buf, sizeof buf, "%s: %.6g vs %.6g, z = %.3g within 3",
                              row.name.c_str(), est, row.predicted, z);
                add_check(ctx, std::fabs(z) <= 3.0, buf);
            }
        } else {
            b.cell(std::string_view(""));
            b.cell(std::string_view(""));
            b.cell(row.predicted);
            b.cell(std::string_view(""));
            if (ctx.cfg.check) add_check(ctx, false, row.name + ": too few samples");
        }
        b.end_row();
    }
    emit(ctx, "means.csv", b.str());
    ctx.run["n"] = ctx.cfg.reps - top.drops;
    ctx.run["dropped"] = top.drops;
}

void run_busy_family(RunContext& ctx, bool count_tail) {
    const std::vector<double> grid = resolve_grid(ctx.cfg.grid, ctx.c);
    const double e_tau_h = resolve_e_tau_h(ctx);
    struct Block {
        TailEstimate est;
        std::uint64_t drops = 0;
    };
    Block top{TailEstimate(grid), 0};
    run_blocked<Block>(
        ctx.cfg.reps, ctx.workers,
        [&](std::uint64_t, std::uint64_t lo, std::uint64_t hi) {
            Block blk{TailEstimate(grid), 0};
            BusyRecord rec;
            const SimOptions opt = sim_options(ctx);
            for (std::uint64_t j = lo; j < hi; ++j) {
                RandomStream rs(ctx.cfg.seed, j);
                try {
                    simulate_busy_period(ctx.params, ctx.c, rs, rec, opt);
                } catch (const EventBudgetExceeded&) {
                    ++blk.drops;
                    continue;
                }
                blk.est.add(count_tail ? static_cast<double>(rec.customers) : rec.length);
            }
            return blk;
        },
        [&](std::uint64_t, Block&& blk) {
            top.est.merge(blk.est);
            top.drops += blk.drops;
        });
    enforce_drop_limit(ctx, top.drops, ctx.cfg.reps);

    const AsymptoteCurve curve = count_tail
                                     ? busy_count_curve(ctx.params, ctx.c, e_tau_h)
                                     : busy_period_curve(ctx.params, ctx.c, e_tau_h);
    ratio_curve(top.est, curve);
    emit(ctx, "tail.csv", tail_csv(ctx, top.est, &curve, top.drops));
    ctx.run["n"] = top.est.n();
    ctx.run["dropped"] = top.drops;
    ctx.run["e_tau_h"] = e_tau_h;
    if (ctx.cfg.check) {
        const char* label = count_tail ? "count asymptote" : "busy asymptote";
        band_check(ctx, top.est, 0.7, 1.3, label);
        trend_check(ctx, top.est, label);
    }
}

void run_sojourn_tail(RunContext& ctx) {
    const std::vector<double> grid = resolve_grid(ctx.cfg.grid, ctx.c);
    struct Block {
        TailEstimate est;
        MeanAccumulator pref;
        std::uint64_t drops = 0;
    };
    Block top{TailEstimate(grid), {}, 0};
    run_blocked<Block>(
        ctx.cfg.reps, ctx.workers,
        [&](std::uint64_t, std::uint64_t lo, std::uint64_t hi) {
            Block blk{TailEstimate(grid), {}, 0};
            TaggedTrace tr;
            const SimOptions opt = sim_options(ctx);
            for (std::uint64_t j = lo; j < hi; ++j) {
                RandomStream rs(ctx.cfg.seed, j);
                try {
                    simulate_tagged_first(ctx.params, ctx.c, rs, tr, opt);
                } catch (const EventBudgetExceeded&) {
                    ++blk.drops;
                    continue;
                }
                blk.est.add(tr.sojourn);
                blk.pref.add(prefactor_observation(tr));
            }
            return blk;
        },
        [&](std::uint64_t, Block&& blk) {
            top.est.merge(blk.est);
            top.pref.merge(blk.pref);
            top.drops += blk.drops;
        });
    enforce_drop_limit(ctx, top.drops, ctx.cfg.reps);

    double prefactor;
    const char* source;
    if (ctx.cfg.prefactor) {
        prefactor = *ctx.cfg.prefactor;
        source = "injected";
    } else if (poisson_input(ctx.params)) {
        prefactor = poisson_prefactor(ctx.c);
        source = "closed-form";
    } else {
        prefactor = top.pref.mean();
        source = "estimated";
    }
    const AsymptoteCurve curve = first_sojourn_curve(ctx.params, ctx.c, prefactor);
    ratio_curve(top.est, curve);
    emit(ctx, "tail.csv", tail_csv(ctx, top.est, &curve, top.drops));

    ctx.run["n"] = top.est.n();
    ctx.run["dropped"] = top.drops;
    ctx.run["prefactor"] = prefactor;
    ctx.run["prefactor_source"] = source;
    auto [emp_pref, emp_se] = estimate_prefactor(top.pref);
    ctx.run["prefactor_estimate"] = emp_pref;
    ctx.run["prefactor_se"] = emp_se;
    if (rv_alpha(ctx.params.service) && poisson_input(ctx.params)) {
        const RVConstants rv = first_sojourn_rv(ctx.params, ctx.c);
        ctx.run["rv_alpha"] = rv.alpha;
        ctx.run["rv_sojourn_constant"] = rv.sojourn_constant;
        const double xref = 1e4 * ctx.c.b;
        const double series = first_sojourn_tail(ctx.params, ctx.c, prefactor, xref);
        const double closed =
            rv.sojourn_constant * sv_factor(ctx.params.service, xref) /
            std::pow(xref, rv.alpha + 1.0);
        ctx.run["series_vs_rv_at"] = xref;
        ctx.run["series_vs_rv_ratio"] = series / closed;
    }
    if (ctx.cfg.check) {
        band_check(ctx, top.est, 0.6, 1.4, "sojourn asymptote");
        trend_check(ctx, top.est, "sojourn asymptote");
    }
}

void run_finite_tk(RunContext& ctx) {
    const std::vector<double> grid = resolve_grid(ctx.cfg.grid, ctx.c);
    const int tkmax = ctx.cfg.tk_max;
    struct Block {
        std::vector<TailEstimate> per_k;
        std::vector<MeanAccumulator> xmean;  // X_1 .. X_{tkmax-1}
        std::uint64_t drops = 0;
    };
    auto make_block = [&] {
        Block blk;
        blk.per_k.reserve(tkmax);
        for (int k = 0; k < tkmax; ++k) blk.per_k.emplace_back(grid);
        blk.xmean.resize(tkmax > 0 ? tkmax - 1 : 0);
        return blk;
    };
    Block top = make_block();
    run_blocked<Block>(
        ctx.cfg.reps, ctx.workers,
        [&](std::uint64_t, std::uint64_t lo, std::uint64_t hi) {
            Block blk = make_block();
            TaggedTrace tr;
            const SimOptions opt = sim_options(ctx);
            for (std::uint64_t j = lo; j < hi; ++j) {
                RandomStream rs(ctx.cfg.seed, j);
                try {
                    simulate_tagged_first(ctx.params, ctx.c, rs, tr, opt);
                } catch (const EventBudgetExceeded&) {
                    ++blk.drops;
                    continue;
                }
                const int kk = std::min(tr.K, tkmax);
                for (int k = 1; k <= kk; ++k) blk.per_k[k - 1].add(tr.T[k - 1]);
                for (int m = 1; m < tkmax; ++m)
                    if (m < tr.K) blk.xmean[m - 1].add(tr.X[m]);
            }
            return blk;
        },
        [&](std::uint64_t, Block&& blk) {
            for (int k = 0; k < tkmax; ++k) top.per_k[k].merge(blk.per_k[k]);
            for (std::size_t m = 0; m < top.xmean.size(); ++m)
                top.xmean[m].merge(blk.xmean[m]);
            top.drops += blk.drops;
        });
    enforce_drop_limit(ctx, top.drops, ctx.cfg.reps);

    // prefactors[j] = E(1 + X_j); closed form for Poisson input, otherwise the
    // run's own estimates.
    const bool poisson = poisson_input(ctx.params);
    std::vector<double> prefactors(tkmax);
    prefactors[0] = 1.0;
    for (int m = 1; m < tkmax; ++m)
        prefactors[m] = poisson
                            ? 1.0 + poisson_mean_queue(ctx.c, m, ctx.c.lambda * ctx.c.b)
                            : 1.0 + top.xmean[m - 1].mean();

    CsvBuilder b;
    standard_comments(b, ctx);
    b.comment("dropped", std::to_string(top.drops));
    b.header({"k", "x", "n", "hits", "p_hat", "ci_low", "ci_high", "predicted", "ratio",
              "ratio_low", "ratio_high"});
    ordered_json nk = ordered_json::array();
    for (int k = 1; k <= tkmax; ++k) {
        TailEstimate& est = top.per_k[k - 1];
        const AsymptoteCurve curve = completion_time_curve(
            ctx.params, ctx.c, k,
            std::vector<double>(prefactors.begin(), prefactors.begin() + k));
        ratio_curve(est, curve);
        nk.push_back(est.n());
        for (std::size_t i = 0; i < grid.size(); ++i) {
            b.begin_row();
            b.cell(k);
            b.cell(grid[i]);
            b.cell(est.n());
            b.cell(est.hits()[i]);
            b.cell(est.p_hat()[i]);
            b.cell(est.ci_low()[i]);
            b.cell(est.ci_high()[i]);
            b.cell(est.predicted[i]);
            b.cell(est.ratio[i]);
            b.cell(est.ratio_low[i]);
            b.cell(est.ratio_high[i]);
            b.end_row();
        }
        if (ctx.cfg.check) {
            char what[40];
            std::snprintf(what, sizeof what, "T_%d", k);
            if (k == 1) {
                // T_1 is one plain service draw, so the curve is exact here and
                // the interval must cover it everywhere.
                bool cover = true;
                for (std::size_t i = 0; i < grid.size(); ++i)
                    cover = cover && est.ci_low()[i] <= est.predicted[i] &&
                            est.predicted[i] <= est.ci_high()[i];
                add_check(ctx, cover,
                          "T_1: confidence interval covers the exact tail at every "
                          "grid point");
            } else {
                const std::size_t start = nearest_index(est, 1e-3);
                if (start == grid.size()) {
                    add_check(ctx, false,
                              std::string(what) + ": no grid point has exceedances");
                } else {
                    bool ok = true;
                    std::size_t used = 0;
                    for (std::size_t i = start; i < grid.size(); ++i) {
                        if (est.hits()[i] < 100) continue;
                        ++used;
                        ok = ok && est.ratio[i] >= 0.6 && est.ratio[i] <= 1.4;
                    }
                    char buf[160];
                    std::snprintf(buf, sizeof buf,
                                  "%s: ratio within [0.6, 1.4] at %zu deep grid points",
                                  what, used);
                    add_check(ctx, ok && used > 0, buf);
                }
            }
        }
    }
    emit(ctx, "tk.csv", b.str());
    ctx.run["n_per_k"] = nk;
    ctx.run["dropped"] = top.drops;
    ctx.run["prefactors"] = prefactors;
}

void run_stationary_tail(RunContext& ctx) {
    const std::vector<double> grid = resolve_grid(ctx.cfg.grid, ctx.c);
    struct Block {
        TailEstimate est;
        std::uint64_t drops = 0;
    };
    Block top{TailEstimate(grid), 0};
    run_blocked<Block>(
        ctx.cfg.reps, ctx.workers,
        [&](std::uint64_t, std::uint64_t lo, std::uint64_t hi) {
            Block blk{TailEstimate(grid), 0};
            CycleRecord rec;
            const SimOptions opt = sim_options(ctx);
            for (std::uint64_t j = lo; j < hi; ++j) {
                RandomStream rs(ctx.cfg.seed, j);
                try {
                    simulate_one_cycle(ctx.params, ctx.c, rs, rec, opt);
                } catch (const EventBudgetExceeded&) {
                    ++blk.drops;
                    continue;
                }
                for (std::uint32_t m = 0; m < rec.customers; ++m)
                    blk.est.add(rec.sojourns[m]);
            }
            return blk;
        },
        [&](std::uint64_t, Block&& blk) {
            top.est.merge(blk.est);
            top.drops += blk.drops;
        });
    enforce_drop_limit(ctx, top.drops, ctx.cfg.reps);

    const AsymptoteCurve curve = stationary_sojourn_curve(ctx.params, ctx.c);
    ratio_curve(top.est, curve);
    emit(ctx, "tail.csv", tail_csv(ctx, top.est, &curve, top.drops));
    ctx.run["cycles"] = ctx.cfg.reps - top.drops;
    ctx.run["customers"] = top.est.n();
    ctx.run["dropped"] = top.drops;
    // Interval note: customers of one cycle are dependent; the per-threshold
    // intervals treat them as independent and are mildly optimistic.
    ctx.run["ci_note"] = "intervals ignore within-cycle dependence";
    if (rv_alpha(ctx.params.service)) {
        const double xref = 1e4 * ctx.c.b;
        ctx.run["series_vs_rv_at"] = xref;
        ctx.run["series_vs_rv_ratio"] =
            stationary_sojourn_tail(ctx.params, ctx.c, xref) /
            stationary_sojourn_rv(ctx.params, ctx.c, xref);
    }
    if (ctx.cfg.check) {
        band_check(ctx, top.est, 0.6, 1.4, "stationary asymptote");
        trend_check(ctx, top.est, "stationary asymptote");
    }
}

void run_psbj(RunContext& ctx) {
    const std::vector<double> grid = resolve_grid(ctx.cfg.grid, ctx.c);
    const bool busy = ctx.cfg.psbj_mode == "busy";
    struct Block {
        TailEstimate est;
        AttributionCounts att;
        std::uint64_t drops = 0;
    };
    Block top{TailEstimate(grid), AttributionCounts(grid, ctx.c), 0};
    run_blocked<Block>(
        ctx.cfg.reps, ctx.workers,
        [&](std::uint64_t, std::uint64_t lo, std::uint64_t hi) {
            Block blk{TailEstimate(grid), AttributionCounts(grid, ctx.c), 0};
            BusyRecord brec;
            CycleRecord crec;
            SimOptions opt = sim_options(ctx);
            opt.attribution = true;
            for (std::uint64_t j = lo; j < hi; ++j) {
                RandomStream rs(ctx.cfg.seed, j);
                try {
                    if (busy) {
                        simulate_busy_period(ctx.params, ctx.c, rs, brec, opt);
                        blk.est.add(brec.length);
                        blk.att.add(brec);
                    } else {
                        simulate_one_cycle(ctx.params, ctx.c, rs, crec, opt);
                        for (std::uint32_t m = 0; m < crec.customers; ++m)
                            blk.est.add(crec.sojourns[m]);
                        blk.att.add(crec);
                    }
                } catch (const EventBudgetExceeded&) {
                    ++blk.drops;
                }
            }
            return blk;
        },
        [&](std::uint64_t, Block&& blk) {
            top.est.merge(blk.est);
            top.att.merge(blk.att);
            top.drops += blk.drops;
        });
    enforce_drop_limit(ctx, top.drops, ctx.cfg.reps);

    const AsymptoteCurve curve = busy
                                     ? busy_period_curve(ctx.params, ctx.c,
                                                         resolve_e_tau_h(ctx))
                                     : stationary_sojourn_curve(ctx.params, ctx.c);
    ratio_curve(top.est, curve);
    emit(ctx, "tail.csv", tail_csv(ctx, top.est, &curve, top.drops));

    CsvBuilder ab;
    standard_comments(ab, ctx);
    ab.comment("mode", ctx.cfg.psbj_mode);
    ab.comment("big_jump_threshold", "x * (1 - rho)");
    ab.header({"x", "exceed", "attributed", "fraction"});
    for (std::size_t i = 0; i < grid.size(); ++i) {
        ab.begin_row();
        ab.cell(grid[i]);
        ab.cell(top.att.exceed()[i]);
        ab.cell(top.att.attributed()[i]);
        if (auto f = top.att.fraction(i)) ab.cell(*f);
        else ab.cell(std::string_view(""));
        ab.end_row();
    }
    emit(ctx, "attribution.csv", ab.str());

    if (!busy) {
        CsvBuilder ob;
        standard_comments(ob, ctx);
        ob.comment("offset", "how many customers before the victim the big one arrived");
        ob.header({"x", "offset", "count"});
        for (std::size_t i = 0; i < grid.size(); ++i)
            for (std::size_t n = 0; n < top.att.offsets()[i].size(); ++n)
                if (top.att.offsets()[i][n] > 0) {
                    ob.begin_row();
                    ob.cell(grid[i]);
                    ob.cell(static_cast<std::uint64_t>(n));
                    ob.cell(top.att.offsets()[i][n]);
                    ob.end_row();
                }
        emit(ctx, "offsets.csv", ob.str());
    }

    ctx.run["n"] = top.est.n();
    ctx.run["dropped"] = top.drops;
    if (ctx.cfg.check) {
        // Deepest point still carrying 200 exceedances; the single-big-jump
        // picture has to dominate there.
        const double need = busy ? 0.9 : 0.85;
        std::vector<std::size_t> usable;
        for (std::size_t i = 0; i < grid.size(); ++i)
            if (top.att.exceed()[i] >= 200) usable.push_back(i);
        if (usable.empty()) {
            add_check(ctx, false, "attribution: no grid point has 200 exceedances");
        } else {
            const std::size_t i = usable.back();
            const double f = *top.att.fraction(i);
            char buf[180];
            std::snprintf(buf, sizeof buf,
                          "attribution: fraction %.4g at x = %g (%llu exceedances) at "
                          "least %g",
                          f, grid[i], static_cast<unsigned long long>(top.att.exceed()[i]),
                          need);
            add_check(ctx, f >= need, buf);
            if (usable.size() >= 2) {
                const std::size_t i0 = usable[usable.size() - 2];
                const double f0 = *top.att.fraction(i0);
                std::snprintf(buf, sizeof buf,
                              "attribution: fraction nondecreasing over the two deepest "
                              "usable points (%.4g at x = %g, %.4g at x = %g)",
                              f0, grid[i0], f, grid[i]);
                add_check(ctx, f >= f0, buf);
            }
        }
    }
}

void run_decomposition(RunContext& ctx) {
    double xstar;
    if (ctx.cfg.decomp_x) {
        xstar = *ctx.cfg.decomp_x;
    } else {
        // Pilot pass: find the threshold whose empirical tail level is closest
        // to target-p, as the target-p quantile of the simulated sojourns.
        std::vector<double> all;
        all.reserve(ctx.cfg.reps);
        std::uint64_t drops = 0;
        struct Block {
            std::vector<double> vals;
            std::uint64_t drops = 0;
        };
        run_blocked<Block>(
            ctx.cfg.reps, ctx.workers,
            [&](std::uint64_t, std::uint64_t lo, std::uint64_t hi) {
                Block blk;
                blk.vals.reserve(hi - lo);
                TaggedTrace tr;
                const SimOptions opt = sim_options(ctx);
                for (std::uint64_t j = lo; j < hi; ++j) {
                    RandomStream rs(ctx.cfg.seed, j);
                    try {
                        simulate_tagged_first(ctx.params, ctx.c, rs, tr, opt);
                    } catch (const EventBudgetExceeded&) {
                        ++blk.drops;
                        continue;
                    }
                    blk.vals.push_back(tr.sojourn);
                }
                return blk;
            },
            [&](std::uint64_t, Block&& blk) {
                all.insert(all.end(), blk.vals.begin(), blk.vals.end());
                drops += blk.drops;
            });
        enforce_drop_limit(ctx, drops, ctx.cfg.reps);
        if (all.empty()) throw EmptySample("no usable pilot replications");
        std::uint64_t kth = static_cast<std::uint64_t>(
            std::llround(ctx.cfg.target_p * static_cast<double>(all.size())));
        kth = std::max<std::uint64_t>(1, std::min<std::uint64_t>(kth, all.size()));
        std::nth_element(all.begin(), all.begin() + (kth - 1), all.end(),
                         std::greater<>());
        xstar = all[kth - 1];
        ctx.result.dropped -= drops;  // the main pass re-encounters the same drops
    }

    DecompositionTable top(xstar, ctx.cfg.k_max, ctx.cfg.l_max, ctx.cfg.j_max, ctx.c);
    std::uint64_t drops = 0;
    struct Block {
        DecompositionTable table;
        std::uint64_t drops = 0;
    };
    run_blocked<Block>(
        ctx.cfg.reps, ctx.workers,
        [&](std::uint64_t, std::uint64_t lo, std::uint64_t hi) {
            Block blk{DecompositionTable(xstar, ctx.cfg.k_max, ctx.cfg.l_max,
                                         ctx.cfg.j_max, ctx.c),
                      0};
            TaggedTrace tr;
            SimOptions opt = sim_options(ctx);
            opt.record_cycle_services = true;
            for (std::uint64_t j = lo; j < hi; ++j) {
                RandomStream rs(ctx.cfg.seed, j);
                try {
                    simulate_tagged_first(ctx.params, ctx.c, rs, tr, opt);
                } catch (const EventBudgetExceeded&) {
                    ++blk.drops;
                    continue;
                }
                blk.table.add(tr);
            }
            return blk;
        },
        [&](std::uint64_t, Block&& blk) {
            top.merge(blk.table);
            drops += blk.drops;
        });
    enforce_drop_limit(ctx, drops, ctx.cfg.reps);

    std::uint64_t covered = 0;
    double model_sum = 0;
    std::uint64_t big_cells = 0;
    bool cells_ok = true;
    CsvBuilder b;
    standard_comments(b, ctx);
    b.comment("x_star", xstar);
    b.comment("big_jump_threshold", xstar * (1.0 - ctx.c.rho));
    b.comment("exceedances", std::to_string(top.exceed_total()));
    b.comment("dropped", std::to_string(drops));
    b.header({"k", "l", "i", "j", "count", "empirical_p", "model_p", "ratio"});
    for (int k = 1; k <= ctx.cfg.k_max; ++k)
        for (int l = 0; l <= ctx.cfg.l_max; ++l)
            for (int j = 0; j <= ctx.cfg.j_max; ++j)
                for (int i = 0; i <= j; ++i) {
                    const std::uint64_t count = top.cell(k, l, i, j);
                    if (count == 0) continue;
                    covered += count;
                    const double emp = static_cast<double>(count) /
                                       static_cast<double>(top.n());
                    const double mod = top.model(k, l, i, j, ctx.params, ctx.c);
                    const double ratio = mod > 0 ? emp / mod
                                                 : std::numeric_limits<double>::infinity();
                    b.begin_row();
                    b.cell(k);
                    b.cell(l);
                    b.cell(i);
                    b.cell(j);
                    b.cell(count);
                    b.cell(emp);
                    b.cell(mod);
                    b.cell(ratio);
                    b.end_row();
                    if (count >= 100) {
                        ++big_cells;
                        cells_ok = cells_ok && ratio >= 0.5 && ratio <= 2.0;
                    }
                }
    model_sum = top.model_total(ctx.params, ctx.c);
    emit(ctx, "cells.csv", b.str());

    const double coverage =
        top.exceed_total() > 0 ? static_cast<double>(covered) /
                                     static_cast<double>(top.exceed_total())
                               : 0.0;
    ctx.run["x_star"] = xstar;
    ctx.run["big_jump_threshold"] = xstar * (1.0 - ctx.c.rho);
    ctx.run["n"] = top.n();
    ctx.run["exceedances"] = top.exceed_total();
    ctx.run["covered"] = covered;
    ctx.run["coverage"] = coverage;
    ctx.run["model_total"] = model_sum;
    ctx.run["dropped"] = drops;
    if (ctx.cfg.check) {
        char buf[200];
        std::snprintf(buf, sizeof buf,
                      "decomposition: cells cover %.4g of %llu exceedances, at least 0.85",
                      coverage, static_cast<unsigned long long>(top.exceed_total()));
        add_check(ctx, top.exceed_total() > 0 && coverage >= 0.85, buf);
        std::snprintf(buf, sizeof buf,
                      "decomposition: %llu cells with 100+ counts all within a factor "
                      "2 of the model",
                      static_cast<unsigned long long>(big_cells));
        add_check(ctx, cells_ok, buf);
    }
}

void run_fluid_check(RunContext& ctx) {
    const double y = ctx.cfg.jump > 0 ? ctx.cfg.jump : 1e4 * ctx.c.b;
    const int ellmax = ctx.cfg.ell_max;
    ForcedJump forced;
    forced.cycle = 1;
    forced.position = 0;
    forced.value = y;
    forced.min_cycles = 1 + ellmax;
    struct Block {
        std::vector<MeanAccumulator> t;
        std::uint64_t drops = 0;
    };
    Block top;
    top.t.resize(ellmax + 1);
    run_blocked<Block>(
        ctx.cfg.reps, ctx.workers,
        [&](std::uint64_t, std::uint64_t lo, std::uint64_t hi) {
            Block blk;
            blk.t.resize(ellmax + 1);
            TaggedTrace tr;
            const SimOptions opt = sim_options(ctx);
            for (std::uint64_t j = lo; j < hi; ++j) {
                RandomStream rs(ctx.cfg.seed, j);
                try {
                    simulate_tagged_forced(ctx.params, ctx.c, forced, rs, tr, opt);
                } catch (const EventBudgetExceeded&) {
                    ++blk.drops;
                    continue;
                }
                for (int l = 0; l <= ellmax; ++l) blk.t[l].add(tr.T[l]);
            }
            return blk;
        },
        [&](std::uint64_t, Block&& blk) {
            for (int l = 0; l <= ellmax; ++l) top.t[l].merge(blk.t[l]);
            top.drops += blk.drops;
        });
    enforce_drop_limit(ctx, top.drops, ctx.cfg.reps);

    CsvBuilder b;
    standard_comments(b, ctx);
    b.comment("jump", y);
    b.comment("dropped", std::to_string(top.drops));
    b.header({"ell", "n", "mean_t", "se", "ratio", "predicted", "rel_err"});
    for (int l = 0; l <= ellmax; ++l) {
        const double mean_t = top.t[l].mean();
        const double se = top.t[l].n() >= 2 ? top.t[l].se() : 0.0;
        const double ratio = mean_t / y;
        const double predicted = 1.0 + fluid_multiplier(ctx.c, l);
        const double rel = ratio / predicted - 1.0;
        b.begin_row();
        b.cell(l);
        b.cell(top.t[l].n());
        b.cell(mean_t);
        b.cell(se);
        b.cell(ratio);
        b.cell(predicted);
        b.cell(rel);
        b.end_row();
        if (ctx.cfg.check) {
            char buf[160];
            std::snprintf(buf, sizeof buf,
                          "mean T_%d / jump = %.6g vs 1+m_%d = %.6g (off by %.3g%%) "
                          "within 5%%",
                          l + 1, ratio, l, predicted, 100.0 * std::fabs(rel));
            add_check(ctx, std::fabs(rel) <= 0.05, buf);
        }
    }
    emit(ctx, "fluid.csv", b.str());
    ctx.run["jump"] = y;
    ctx.run["n"] = ctx.cfg.reps - top.drops;
    ctx.run["dropped"] = top.drops;
}

}  // namespace

void validate_config(const ExperimentConfig& cfg) {
    if (!known_kind(cfg.kind)) throw ParseError("unknown experiment kind '" + cfg.kind + "'");
    ModelParams params{parse_distribution(cfg.arrival), parse_distribution(cfg.service),
                       cfg.feedback_p};
    derive_constants(params);  // validates the laws and feedback-p
    if (cfg.reps < 1) throw DomainError("reps must be at least 1");
    if (cfg.workers < 0 || cfg.workers > 4096)
        throw DomainError("workers must lie in [0, 4096]");
    if (cfg.out.empty()) throw DomainError("out must name a directory");
    if (cfg.event_cap < 1000) throw DomainError("event-cap must be at least 1000");
    if (!cfg.grid.points.empty()) {
        for (std::size_t i = 0; i + 1 < cfg.grid.points.size(); ++i)
            if (!(cfg.grid.points[i] < cfg.grid.points[i + 1]))
                throw DomainError("grid must be strictly increasing");
        if (!(cfg.grid.points.front() > 0))
            throw DomainError("grid thresholds must be positive");
    } else {
        if (!(cfg.grid.factor > 1.0)) throw DomainError("grid-factor must exceed 1");
        if (cfg.grid.count < 1 || cfg.grid.count > 200)
            throw DomainError("grid-points must lie in [1, 200]");
        if (cfg.grid.start < 0) throw DomainError("grid-start must be nonnegative");
    }
    if (cfg.prefactor && !(*cfg.prefactor >= 1.0))
        throw DomainError("prefactor must be at least 1");
    if (cfg.e_tau_h && !(*cfg.e_tau_h >= 1.0))
        throw DomainError("e-tau-h must be at least 1");
    if (cfg.tk_max < 1 || cfg.tk_max > 10)
        throw DomainError("tk-max must lie in [1, 10]");
    if (cfg.means_k_max < 1 || cfg.means_k_max > 20)
        throw DomainError("means-k-max must lie in [1, 20]");
    if (cfg.psbj_mode != "busy" && cfg.psbj_mode != "stationary")
        throw ParseError("mode must be 'busy' or 'stationary'");
    if (!(cfg.target_p > 0) || cfg.target_p > 0.5)
        throw DomainError("target-p must lie in (0, 0.5]");
    if (cfg.decomp_x && !(*cfg.decomp_x > 0)) throw DomainError("x must be positive");
    if (cfg.k_max < 1 || cfg.k_max > 12) throw DomainError("k-max must lie in [1, 12]");
    if (cfg.l_max < 0 || cfg.l_max > 12) throw DomainError("l-max must lie in [0, 12]");
    if (cfg.j_max < 0 || cfg.j_max > 200) throw DomainError("j-max must lie in [0, 200]");
    if (cfg.jump < 0) throw DomainError("jump must be nonnegative");
    if (cfg.ell_max < 0 || cfg.ell_max > 10)
        throw DomainError("ell-max must lie in [0, 10]");
}

std::vector<double> resolve_grid(const GridSpec& g, const DerivedConstants& c) {
    if (!g.points.empty()) return g.points;
    const double start = g.start > 0 ? g.start : 10.0 * c.b;
    std::vector<double> grid(g.count);
    for (int i = 0; i < g.count; ++i) grid[i] = start * std::pow(g.factor, i);
    return grid;
}

std::string config_to_json(const ExperimentConfig& cfg) {
    return config_json(cfg).dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& json_text) {
    ordered_json j;
    try {
        j = ordered_json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("config is not valid JSON: ") + e.what());
    }
    if (j.is_object() && j.contains("config")) return config_from(j["config"]);
    return config_from(j);
}

RunResult run_experiment(const ExperimentConfig& cfg) {
    validate_config(cfg);
    RunContext ctx{cfg};
    ctx.params = ModelParams{parse_distribution(cfg.arrival),
                             parse_distribution(cfg.service), cfg.feedback_p};
    ctx.c = derive_constants(ctx.params);
    require_stable(ctx.c);
    ctx.workers = resolve_workers(cfg.workers);
    ctx.result.check_performed = cfg.check;

    if (cfg.kind == "validate-means") run_validate_means(ctx);
    else if (cfg.kind == "busy-tail") run_busy_family(ctx, false);
    else if (cfg.kind == "count-tail") run_busy_family(ctx, true);
    else if (cfg.kind == "sojourn-tail") run_sojourn_tail(ctx);
    else if (cfg.kind == "finite-tk") run_finite_tk(ctx);
    else if (cfg.kind == "stationary-tail") run_stationary_tail(ctx);
    else if (cfg.kind == "psbj") run_psbj(ctx);
    else if (cfg.kind == "decomposition") run_decomposition(ctx);
    else run_fluid_check(ctx);

    ordered_json meta;
    meta["artifact"] = "tailq";
    meta["build"] = TAILQ_BUILD_ID;
    meta["config"] = config_json(cfg);
    meta["constants"] = {{"a", ctx.c.a},         {"b", ctx.c.b},   {"lambda", ctx.c.lambda},
                         {"p", ctx.c.p},         {"q", ctx.c.q},   {"r", ctx.c.r},
                         {"rho", ctx.c.rho},     {"b_h", ctx.c.b_h},
                         {"m_inf", ctx.c.m_inf}};
    meta["run"] = ctx.run;
    if (ctx.result.check_performed) {
        ordered_json checks = ordered_json::array();
        for (const CheckLine& line : ctx.result.checks)
            checks.push_back({{"check", line.text}, {"pass", line.pass}});
        meta["checks"] = checks;
    }
    ordered_json files = ordered_json::array();
    for (const std::string& f : ctx.result.files)
        files.push_back(std::filesystem::path(f).filename().string());
    meta["files"] = files;
    emit(ctx, "metadata.json", meta.dump(2) + "\n");
    return std::move(ctx.result);
}

}  // namespace tailq
