#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "tailq/random.hpp"

namespace tailq {

// Inter-arrival and service time laws.
//
// Conventions shared by every family:
//   tail(x)            P(X > x), strict exceedance, clamped to [0,1]
//   integrated_tail(x) min(1, integral of tail over (x, inf)); finite mean required
//   inverse_survival(u) x with tail(x) = u for u in (0,1]; u = 1 gives the left
//                       endpoint of the support, so sampling never produces a
//                       value outside it
//
// Closed forms are used wherever they exist; ParetoLog and Weibull fall back
// to Gauss-Kronrod quadrature (relative tolerance 1e-10) for moments and
// integrated tails, and ParetoLog inverts its survival function numerically.

struct Pareto {
    double shape = 0;  // tail exponent; must exceed 1 so the mean is finite
    double scale = 0;  // left endpoint of the support

    double mean() const;
    double tail(double x) const;
    double integrated_tail(double x) const;
    double inverse_survival(double u) const;
    bool operator==(const Pareto&) const = default;
};

// Pareto tail with a logarithmic correction:
//   tail(x) = scale^shape * (ln(e*x/scale))^log_power / x^shape  for x >= scale.
// At x = scale the log factor is 1, so the tail is continuous at the endpoint.
struct ParetoLog {
    double shape = 0;
    double scale = 0;
    double log_power = 0;  // must lie in [0, shape] or the tail would rise above one

    double mean() const;
    double tail(double x) const;
    double integrated_tail(double x) const;
    double inverse_survival(double u) const;
    bool operator==(const ParetoLog&) const = default;
};

struct Exponential {
    double rate = 0;

    double mean() const { return 1.0 / rate; }
    double tail(double x) const;
    double integrated_tail(double x) const;
    double inverse_survival(double u) const;
    bool operator==(const Exponential&) const = default;
};

struct Deterministic {
    double value = 0;

    double mean() const { return value; }
    double tail(double x) const { return x < value ? 1.0 : 0.0; }
    double integrated_tail(double x) const;
    double inverse_survival(double) const { return value; }
    bool operator==(const Deterministic&) const = default;
};

// Stretched exponential, shape in (0,1): heavier than any exponential but all
// moments finite. Diagnostic only; the power-law asymptotes do not apply.
struct Weibull {
    double shape = 0;
    double scale = 0;

    double mean() const;
    double tail(double x) const;
    double integrated_tail(double x) const;
    double inverse_survival(double u) const;
    bool operator==(const Weibull&) const = default;
};

// Diagnostic only, like Weibull.
struct Lognormal {
    double mu = 0;
    double sigma = 0;

    double mean() const;
    double tail(double x) const;
    double integrated_tail(double x) const;
    double inverse_survival(double u) const;
    bool operator==(const Lognormal&) const = default;
};

using DistributionSpec =
    std::variant<Pareto, ParetoLog, Exponential, Deterministic, Weibull, Lognormal>;

double mean(const DistributionSpec& d);
double tail(const DistributionSpec& d, double x);
double integrated_tail(const DistributionSpec& d, double x);
double inverse_survival(const DistributionSpec& d, double u);

// One uniform draw per variate, by inverse transform.
double sample(const DistributionSpec& d, RandomStream& rs);

// Smallest x with tail(x) < 1.
double left_endpoint(const DistributionSpec& d);

// alpha such that tail(x) = sv_factor(x) / x^(alpha+1) on [scale, inf) with
// sv_factor slowly varying. Present for Pareto and ParetoLog only.
std::optional<double> rv_alpha(const DistributionSpec& d);

// The slowly varying numerator above. Throws RVRequired for other families.
double sv_factor(const DistributionSpec& d, double x);

// True for the families whose tails are heavier than exponential but outside
// the power-law class the asymptotic formulas assume (Weibull, Lognormal).
bool diagnostic_only(const DistributionSpec& d);

// Throws DomainError with the offending parameter named.
void validate(const DistributionSpec& d);

// Text forms like "pareto(shape=2.5, scale=0.6)", "exp(rate=0.2)", "det(1.0)".
// Family and key names are case-insensitive, whitespace is ignored, and
// arguments may be positional in the declared order. parse(format(d)) == d.
DistributionSpec parse_distribution(std::string_view text);
std::string format_distribution(const DistributionSpec& d);

const char* family_name(const DistributionSpec& d);

}  // namespace tailq
