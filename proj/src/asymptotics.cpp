#include "tailq/asymptotics.hpp"

#include <cmath>

#include "tailq/errors.hpp"

namespace tailq {

double fluid_multiplier(const DerivedConstants& c, int k) {
    if (k <= 0) return 0.0;
    return c.lambda * c.b * (1.0 - std::pow(c.r, k)) / (1.0 - c.r);
}

double poisson_mean_queue(const DerivedConstants& c, int k, double mean_x1) {
    const double rk = std::pow(c.r, k - 1);
    return (1.0 - rk) / (1.0 - c.r) * c.lambda * c.b + mean_x1 * rk;
}

double poisson_prefactor(const DerivedConstants& c) {
    return c.q * (1.0 + c.p) / (1.0 - c.r * c.p);
}

double poisson_mean_total_services(const DerivedConstants& c, double mean_x0, double mean_u0) {
    const double lb = c.lambda * c.b;
    const double mean_x1 = c.lambda * (c.b + mean_u0) + c.p * mean_x0;
    return 1.0 / c.q + mean_x0 + lb * c.p / ((1.0 - c.r) * c.q) +
           ((1.0 - c.r) * mean_x1 - lb) * c.p / ((1.0 - c.r) * (1.0 - c.p * c.r));
}

double first_sojourn_tail(const ModelParams& params, const DerivedConstants& c,
                          double prefactor, double x, SeriesTruncation trunc) {
    require_stable(c);
    // sum_{k>=1} q p^(k-1) Gbar(x/(1+m_{k-1})); every later term is at most
    // Gbar(x/(1+m_inf)) p^N, which bounds the remainder.
    const double tail_cap = tail(params.service, x / (1.0 + c.m_inf));
    double sum = 0.0;
    double pk = 1.0;      // p^(k-1)
    double m = 0.0;       // m_{k-1}
    const double lb = c.lambda * c.b;
    for (int k = 1; k <= trunc.max_terms; ++k) {
        sum += c.q * pk * tail(params.service, x / (1.0 + m));
        pk *= c.p;
        if (pk * tail_cap <= trunc.rel_tol * sum) break;
        m = m * c.r + lb;  // m_k = r*m_{k-1} + lambda*b
    }
    return prefactor / c.q * sum;
}

RVConstants first_sojourn_rv(const ModelParams& params, const DerivedConstants& c,
                             SeriesTruncation trunc) {
    require_stable(c);
    const auto alpha = rv_alpha(params.service);
    if (!alpha)
        throw RVRequired(std::string("regular-variation constants need a pareto family "
                                     "service law, got ") +
                         family_name(params.service));
    const double expo = *alpha + 1.0;
    // sum_{k>=0} p^k ((1 - (p + r^k lambda b))/(1-r))^expo; the bracket rises
    // toward q/(1-r), so the remainder is under (q/(1-r))^expo p^N / q.
    const double cap = std::pow(c.q / (1.0 - c.r), expo);
    double sum = 0.0;
    double pk = 1.0;
    double rk = 1.0;
    const double lb = c.lambda * c.b;
    for (int k = 0; k < trunc.max_terms; ++k) {
        sum += pk * std::pow((1.0 - (c.p + rk * lb)) / (1.0 - c.r), expo);
        pk *= c.p;
        rk *= c.r;
        if (pk * cap / c.q <= trunc.rel_tol * sum) break;
    }
    RVConstants out;
    out.alpha = *alpha;
    out.mixture_factor = c.q * sum;
    out.sojourn_constant = poisson_prefactor(c) / c.q * out.mixture_factor;
    return out;
}

double completion_time_tail(const ModelParams& params, const DerivedConstants& c, int k,
                            const std::vector<double>& prefactors, double x,
                            const std::optional<DistributionSpec>& exceptional_first) {
    require_stable(c);
    if (k < 1) throw DomainError("completion_time_tail needs k >= 1");
    if (prefactors.size() < static_cast<size_t>(k))
        throw DomainError("completion_time_tail needs prefactors for indices 0..k-1");
    double sum = 0.0;
    for (int l = 0; l <= k - 1; ++l) {
        const double scaled = x / (1.0 + fluid_multiplier(c, l));
        // The l = k-1 term is the customer's own first service; an exceptional
        // first-service law replaces the tail only there.
        const double t = (exceptional_first && l == k - 1) ? tail(*exceptional_first, scaled)
                                                           : tail(params.service, scaled);
        sum += prefactors[static_cast<size_t>(k - l - 1)] * t;
    }
    return sum;
}

namespace {

double stationary_coef(const DerivedConstants& c) {
    // b(1-q)/(aq - b); the stable regime guarantees aq > b.
    return c.b * (1.0 - c.q) / (c.a * c.q - c.b);
}

}  // namespace

double stationary_sojourn_tail(const ModelParams& params, const DerivedConstants& c, double x,
                               SeriesTruncation trunc) {
    require_stable(c);
    const double coef = stationary_coef(c);
    const double ratio = c.a / c.b;
    // x_k decreases toward x(1-r), so terms are bounded by their k -> inf value.
    const double deepest = x * (1.0 - c.r);
    const double cap = integrated_tail(params.service, deepest) +
                       coef * integrated_tail(params.service, deepest * ratio);
    double sum = 0.0;
    double pk = 1.0;
    double rk = 1.0;
    for (int k = 1; k <= trunc.max_terms; ++k) {
        rk *= c.r;
        const double xk = x * (1.0 - c.r) / (1.0 - rk);
        sum += pk * (integrated_tail(params.service, xk) +
                     coef * integrated_tail(params.service, xk * ratio));
        pk *= c.p;
        if (pk * cap / c.q <= trunc.rel_tol * sum) break;
    }
    return c.q / (c.a - c.b) * sum;
}

double stationary_sojourn_rv(const ModelParams& params, const DerivedConstants& c, double x,
                             SeriesTruncation trunc) {
    require_stable(c);
    const auto alpha = rv_alpha(params.service);
    if (!alpha)
        throw RVRequired(std::string("regular-variation form needs a pareto family service "
                                     "law, got ") +
                         family_name(params.service));
    const double al = *alpha;
    double series = 0.0;
    double pk = 1.0;
    double rk = 1.0;
    for (int k = 1; k <= trunc.max_terms; ++k) {
        rk *= c.r;
        series += pk * std::pow(1.0 - rk, al);
        pk *= c.p;
        if (pk / c.q <= trunc.rel_tol * series) break;
    }
    const double coef = stationary_coef(c);
    const double front = sv_factor(params.service, x) / std::pow(x, al) * c.q *
                         std::pow(1.0 - c.r, -al) / (al * (c.a - c.b));
    return front * (1.0 + coef * std::pow(c.b / c.a, al)) * series;
}

double compound_service_tail(const ModelParams& params, const DerivedConstants& c, double y) {
    return std::min(1.0, tail(params.service, y) / c.q);
}

double poisson_mean_busy_count(const DerivedConstants& c) {
    require_stable(c);
    return 1.0 / (1.0 - c.rho);
}

double busy_period_tail(const ModelParams& params, const DerivedConstants& c, double e_tau_h,
                        double x) {
    require_stable(c);
    return e_tau_h * compound_service_tail(params, c, x * (1.0 - c.rho));
}

double busy_count_tail(const ModelParams& params, const DerivedConstants& c, double e_tau_h,
                       double x) {
    require_stable(c);
    return e_tau_h * compound_service_tail(params, c, x * (c.a - c.b_h));
}

double no_feedback_stationary_tail(const ModelParams& params, const DerivedConstants& c,
                                   double x) {
    require_stable(c);
    return c.lambda / (c.q * (1.0 - c.rho)) * integrated_tail(params.service, x);
}

double random_walk_max_tail(double drift_magnitude, const DistributionSpec& increment,
                            double x) {
    if (!(drift_magnitude > 0.0))
        throw DomainError("random_walk_max_tail needs a positive drift magnitude");
    return integrated_tail(increment, x) / drift_magnitude;
}

AsymptoteCurve first_sojourn_curve(const ModelParams& params, const DerivedConstants& c,
                                   double prefactor) {
    return {"first-sojourn-series",
            "single-big-service approximation; meaningful only deep in the tail",
            [params, c, prefactor](double x) {
                return first_sojourn_tail(params, c, prefactor, x);
            }};
}

AsymptoteCurve completion_time_curve(const ModelParams& params, const DerivedConstants& c,
                                     int k, std::vector<double> prefactors) {
    return {"completion-time-k" + std::to_string(k),
            "single-big-service approximation; meaningful only deep in the tail",
            [params, c, k, prefactors = std::move(prefactors)](double x) {
                return completion_time_tail(params, c, k, prefactors, x);
            }};
}

AsymptoteCurve stationary_sojourn_curve(const ModelParams& params, const DerivedConstants& c) {
    return {"stationary-sojourn-series",
            "integrated-tail series; meaningful only deep in the tail",
            [params, c](double x) { return stationary_sojourn_tail(params, c, x); }};
}

AsymptoteCurve busy_period_curve(const ModelParams& params, const DerivedConstants& c,
                                 double e_tau_h) {
    return {"busy-period",
            "compounded-service tail by geometric-sum substitution; values above the "
            "service support scale are clamped",
            [params, c, e_tau_h](double x) { return busy_period_tail(params, c, e_tau_h, x); }};
}

AsymptoteCurve busy_count_curve(const ModelParams& params, const DerivedConstants& c,
                                double e_tau_h) {
    return {"busy-count",
            "compounded-service tail by geometric-sum substitution; values above the "
            "service support scale are clamped",
            [params, c, e_tau_h](double x) { return busy_count_tail(params, c, e_tau_h, x); }};
}

}  // namespace tailq
