#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tailq/model.hpp"

namespace tailq {

// Stopping rule for the geometric series below: terms are added until the
// analytic bound on the remainder drops under rel_tol of the partial sum.
struct SeriesTruncation {
    double rel_tol = 1e-12;
    int max_terms = 10000;
};

// m_k = lambda*b*(1-r^k)/(1-r). When one service blows up to a huge value y,
// the k-th later completion of the same customer lands near (1+m_k)*y: the
// burst of work it triggers shrinks geometrically with ratio r.
double fluid_multiplier(const DerivedConstants& c, int k);

// Mean queue length behind the tagged customer at its k-th completion, Poisson
// input, as a function of the mean after the first completion. k >= 1.
double poisson_mean_queue(const DerivedConstants& c, int k, double mean_x1);

// E(1 + X_{K-1}) for Poisson input and a tagged customer arriving to an empty
// queue: q(1+p)/(1-rp). This weights the sojourn-tail asymptote.
double poisson_prefactor(const DerivedConstants& c);

// Mean number of services in a tagged customer's sojourn (its own passes plus
// everyone served ahead of it), Poisson input. mean_x0/mean_u0 describe the
// state found on arrival; both are 0 for an arrival to an empty queue.
double poisson_mean_total_services(const DerivedConstants& c, double mean_x0, double mean_u0);

// P(U > x) asymptote for the first sojourn time: prefactor/q times the
// geometric mixture sum_{k>=1} q p^(k-1) Gbar(x/(1+m_{k-1})). The prefactor is
// E(1 + X_{K-1}); pass poisson_prefactor(c) for Poisson input or an empirical
// estimate otherwise.
double first_sojourn_tail(const ModelParams& params, const DerivedConstants& c,
                          double prefactor, double x, SeriesTruncation trunc = {});

struct RVConstants {
    double alpha;             // service tail decays like sv/x^(alpha+1)
    double mixture_factor;    // P((1+m_{K-1}) sigma > x) ~ mixture_factor * sv(x)/x^(alpha+1)
    double sojourn_constant;  // P(U > x) ~ sojourn_constant * sv(x)/x^(alpha+1)
};

// Closed-form constants for a regularly varying service law (Pareto families).
// Throws RVRequired otherwise.
RVConstants first_sojourn_rv(const ModelParams& params, const DerivedConstants& c,
                             SeriesTruncation trunc = {});

// P(T_k > x): tail of the k-th completion time of the tagged customer, a
// finite sum over which cycle the big service lands in. prefactors[j] must
// hold E(1 + X_j) for j = 0..k-1 (so prefactors[0] = 1 when the customer
// arrives to an empty queue). When exceptional_first is set, the customer's
// own first service follows that law instead of the model's service law, and
// it replaces the l = k-1 term's tail.
double completion_time_tail(const ModelParams& params, const DerivedConstants& c, int k,
                            const std::vector<double>& prefactors, double x,
                            const std::optional<DistributionSpec>& exceptional_first = {});

// Stationary sojourn tail, integrated-tail series form:
//   (q/(a-b)) * sum_{k>=1} p^(k-1) [GI(x_k) + coef * GI(x_k * a/b)],
//   x_k = x(1-r)/(1-r^k),  coef = b(1-q)/(aq-b).
double stationary_sojourn_tail(const ModelParams& params, const DerivedConstants& c, double x,
                               SeriesTruncation trunc = {});

// Same quantity through the regular-variation closed form; requires a Pareto
// family service law.
double stationary_sojourn_rv(const ModelParams& params, const DerivedConstants& c, double x,
                             SeriesTruncation trunc = {});

// Tail of the compounded (total over all passes) service of one customer,
// geometric-sum substitution: min(1, (1/q) Gbar(y)).
double compound_service_tail(const ModelParams& params, const DerivedConstants& c, double y);

// Busy-period asymptotes. e_tau_h is the mean number of distinct customers
// served in one busy period: 1/(1-rho) for Poisson input (see
// poisson_mean_busy_count), otherwise inject a simulation estimate.
double poisson_mean_busy_count(const DerivedConstants& c);
double busy_period_tail(const ModelParams& params, const DerivedConstants& c, double e_tau_h,
                        double x);
double busy_count_tail(const ModelParams& params, const DerivedConstants& c, double e_tau_h,
                       double x);

// Stationary sojourn tail of the matched queue without feedback whose service
// law is the compounded service: lambda/(q(1-rho)) * GI(x). With p = 0 this is
// the classical integrated-tail formula.
double no_feedback_stationary_tail(const ModelParams& params, const DerivedConstants& c,
                                   double x);

// P(max of a negative-drift random walk > x) ~ (1/m) * FI(x), where m > 0 is
// the drift magnitude and FI the integrated tail of the increment law.
double random_walk_max_tail(double drift_magnitude, const DistributionSpec& increment,
                            double x);

// A predicted-tail curve bundled with provenance for reports.
struct AsymptoteCurve {
    std::string label;
    std::string validity_note;
    std::function<double(double)> eval;
};

AsymptoteCurve first_sojourn_curve(const ModelParams& params, const DerivedConstants& c,
                                   double prefactor);
AsymptoteCurve completion_time_curve(const ModelParams& params, const DerivedConstants& c,
                                     int k, std::vector<double> prefactors);
AsymptoteCurve stationary_sojourn_curve(const ModelParams& params, const DerivedConstants& c);
AsymptoteCurve busy_period_curve(const ModelParams& params, const DerivedConstants& c,
                                 double e_tau_h);
AsymptoteCurve busy_count_curve(const ModelParams& params, const DerivedConstants& c,
                                double e_tau_h);

}  // namespace tailq
