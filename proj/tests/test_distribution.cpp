#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "tailq/distribution.hpp"
#include "tailq/errors.hpp"
#include "tailq/random.hpp"

using namespace tailq;

namespace {

// Plain adaptive Simpson, independent of the quadrature the library uses, so
// the integrated-tail values are checked against a second method.
double simpson(const std::function<double(double)>& f, double a, double b) {
    const double c = 0.5 * (a + b);
    return (b - a) / 6.0 * (f(a) + 4.0 * f(c) + f(b));
}

double adaptive(const std::function<double(double)>& f, double a, double b, double whole,
                double tol, int depth) {
    const double c = 0.5 * (a + b);
    const double left = simpson(f, a, c);
    const double right = simpson(f, c, b);
    if (depth <= 0 || std::fabs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive(f, a, c, left, 0.5 * tol, depth - 1) +
           adaptive(f, c, b, right, 0.5 * tol, depth - 1);
}

double integrate_tail(const DistributionSpec& d, double from, double to) {
    auto f = [&](double s) { return tail(d, s); };
    return adaptive(f, from, to, simpson(f, from, to), 1e-12, 40);
}

}  // namespace

TEST_CASE("pareto closed forms") {
    const DistributionSpec d = Pareto{2.5, 0.6};
    CHECK(mean(d) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(tail(d, 6.0) == doctest::Approx(0.00316227766016838).epsilon(1e-14));
    CHECK(integrated_tail(d, 10.0) ==
          doctest::Approx(0.005878775382679627).epsilon(1e-14));
    CHECK(tail(d, 0.6) == 1.0);
    CHECK(tail(d, 0.3) == 1.0);
    CHECK(left_endpoint(d) == doctest::Approx(0.6));
}

TEST_CASE("exponential closed forms") {
    const DistributionSpec d = Exponential{0.2};
    CHECK(mean(d) == doctest::Approx(5.0));
    CHECK(tail(d, 10.0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-14));
    CHECK(integrated_tail(d, 0.0) == 1.0);  // the raw integral 5 is capped
    CHECK(integrated_tail(d, 20.0) ==
          doctest::Approx(5.0 * std::exp(-4.0)).epsilon(1e-13));
}

TEST_CASE("deterministic law") {
    const DistributionSpec d = Deterministic{2.0};
    CHECK(mean(d) == 2.0);
    CHECK(tail(d, 1.9) == 1.0);
    CHECK(tail(d, 2.0) == 0.0);
    CHECK(integrated_tail(d, 1.5) == doctest::Approx(0.5));
    CHECK(integrated_tail(d, 0.0) == 1.0);
    RandomStream rs(1, 0);
    for (int i = 0; i < 10; ++i) CHECK(sample(d, rs) == 2.0);
}

TEST_CASE("integrated tails agree with an independent quadrature") {
    const DistributionSpec laws[] = {
        Pareto{2.5, 0.6},
        ParetoLog{2.5, 0.6, 1.0},
        Exponential{0.2},
        Weibull{0.5, 2.0},
        Lognormal{0.0, 1.0},
    };
    for (const DistributionSpec& d : laws) {
        for (double x : {1.0, 3.0, 9.0}) {
            // Split the integral at a far point where the remaining tail
            // contributes almost nothing, Pareto being the slowest.
            const double far = 1e9;
            const double approx_far = integrated_tail(d, far);
            const double numeric =
                std::min(1.0, integrate_tail(d, x, far) + approx_far);
            CHECK(integrated_tail(d, x) ==
                  doctest::Approx(numeric).epsilon(1e-6));
        }
    }
}

TEST_CASE("mean equals left endpoint plus integrated tail over the support") {
    const DistributionSpec laws[] = {Pareto{2.5, 0.6}, ParetoLog{3.0, 1.0, 2.0},
                                     Weibull{0.5, 2.0}};
    for (const DistributionSpec& d : laws) {
        const double lo = left_endpoint(d);
        const double numeric = lo + integrate_tail(d, lo, 1e9);
        CHECK(mean(d) == doctest::Approx(numeric).epsilon(1e-5));
    }
}

TEST_CASE("inverse survival inverts the tail") {
    const DistributionSpec laws[] = {
        Pareto{2.5, 0.6},   ParetoLog{2.5, 0.6, 1.0}, Exponential{0.2},
        Weibull{0.5, 2.0},  Lognormal{0.0, 1.0},
    };
    for (const DistributionSpec& d : laws) {
        for (double u : {0.9, 0.5, 0.1, 1e-3, 1e-6}) {
            const double x = inverse_survival(d, u);
            CHECK(tail(d, x) == doctest::Approx(u).epsilon(1e-8));
        }
        // u = 1 lands on the left endpoint, so samples never leave the support
        CHECK(inverse_survival(d, 1.0) == left_endpoint(d));
        CHECK(tail(d, left_endpoint(d)) == 1.0);
    }
}

TEST_CASE("tails are nonincreasing") {
    const DistributionSpec laws[] = {Pareto{2.5, 0.6}, ParetoLog{2.5, 0.6, 2.0},
                                     Weibull{0.5, 2.0}, Lognormal{0.0, 1.0}};
    for (const DistributionSpec& d : laws) {
        double prev = 1.0;
        for (double x = 0.0; x < 50.0; x += 0.25) {
            const double t = tail(d, x);
            CHECK(t <= prev + 1e-15);
            CHECK(t >= 0.0);
            CHECK(t <= 1.0);
            prev = t;
        }
    }
}

TEST_CASE("sampling matches the law") {
    const DistributionSpec laws[] = {Pareto{2.5, 0.6}, Exponential{0.2},
                                     Weibull{0.5, 2.0}};
    int stream = 0;
    for (const DistributionSpec& d : laws) {
        RandomStream rs(2024, stream++);
        const int n = 100000;
        std::vector<double> u(n);
        const double lo = left_endpoint(d);
        for (int i = 0; i < n; ++i) {
            const double x = sample(d, rs);
            REQUIRE(x >= lo);
            u[i] = tail(d, x);  // should be uniform on (0,1]
        }
        std::sort(u.begin(), u.end());
        double ks = 0.0;
        for (int i = 0; i < n; ++i) {
            ks = std::max(ks, std::fabs(u[i] - (i + 1.0) / n));
            ks = std::max(ks, std::fabs(u[i] - static_cast<double>(i) / n));
        }
        CHECK(ks < 0.01);
    }
}

TEST_CASE("paretolog reduces to pareto at zero log power") {
    const DistributionSpec plain = Pareto{2.5, 0.6};
    const DistributionSpec logged = ParetoLog{2.5, 0.6, 0.0};
    for (double x : {0.7, 2.0, 40.0})
        CHECK(tail(plain, x) == doctest::Approx(tail(logged, x)).epsilon(1e-12));
}

TEST_CASE("regular variation index") {
    CHECK(rv_alpha(Pareto{2.5, 0.6}) == doctest::Approx(1.5));
    CHECK(rv_alpha(ParetoLog{3.0, 1.0, 1.0}) == doctest::Approx(2.0));
    CHECK_FALSE(rv_alpha(Exponential{1.0}).has_value());
    CHECK(sv_factor(Pareto{2.5, 0.6}, 100.0) ==
          doctest::Approx(std::pow(0.6, 2.5)).epsilon(1e-13));
    CHECK_THROWS_AS((void)sv_factor(Exponential{1.0}, 1.0), RVRequired);
    CHECK(diagnostic_only(Weibull{0.5, 1.0}));
    CHECK(diagnostic_only(Lognormal{0.0, 1.0}));
    CHECK_FALSE(diagnostic_only(Pareto{2.5, 0.6}));
}

TEST_CASE("text forms round trip") {
    const char* texts[] = {
        "pareto(shape=2.5, scale=0.6)",
        "paretolog(shape=2.5, scale=0.6, log_power=1)",
        "exp(rate=0.2)",
        "det(1)",
        "weibull(shape=0.5, scale=2)",
        "lognormal(mu=0, sigma=1)",
    };
    for (const char* t : texts) {
        const DistributionSpec d = parse_distribution(t);
        CHECK(format_distribution(d) == t);
        CHECK(parse_distribution(format_distribution(d)) == d);
    }
}

TEST_CASE("parsing is forgiving about case, spacing and argument order") {
    const DistributionSpec want = Pareto{2.5, 0.6};
    CHECK(parse_distribution("PARETO(Shape=2.5, SCALE=0.6)") == want);
    CHECK(parse_distribution("  pareto ( scale = 0.6 , shape = 2.5 )  ") == want);
    CHECK(parse_distribution("pareto(2.5, 0.6)") == want);
    CHECK(parse_distribution("exp(0.2)") == DistributionSpec{Exponential{0.2}});
}

TEST_CASE("parse rejects malformed text") {
    CHECK_THROWS_AS(parse_distribution("zeta(s=2)"), ParseError);
    CHECK_THROWS_AS(parse_distribution("pareto(shape=2.5)"), ParseError);
    CHECK_THROWS_AS(parse_distribution("pareto(shape=2.5, shape=3, scale=1)"), ParseError);
    CHECK_THROWS_AS(parse_distribution("pareto(shape=2.5, scale=0.6) extra"), ParseError);
    CHECK_THROWS_AS(parse_distribution("pareto(shape=2.5, scale=0.6"), ParseError);
    CHECK_THROWS_AS(parse_distribution(""), ParseError);
    CHECK_THROWS_AS(parse_distribution("pareto(wat=1, scale=2)"), ParseError);
}

TEST_CASE("parameter domains are enforced") {
    CHECK_THROWS_AS(parse_distribution("pareto(shape=1, scale=0.6)"), DomainError);
    CHECK_THROWS_AS(parse_distribution("pareto(shape=2.5, scale=0)"), DomainError);
    CHECK_THROWS_AS(parse_distribution("exp(rate=0)"), DomainError);
    CHECK_THROWS_AS(parse_distribution("det(0)"), DomainError);
    CHECK_THROWS_AS(parse_distribution("weibull(shape=1.5, scale=1)"), DomainError);
    CHECK_THROWS_AS(parse_distribution("paretolog(shape=2, scale=1, log_power=3)"),
                    DomainError);
    CHECK_THROWS_AS(parse_distribution("lognormal(mu=0, sigma=0)"), DomainError);
}

TEST_CASE("weibull and lognormal moments") {
    // scale * Gamma(1 + 1/shape): 2 * Gamma(3) = 4
    CHECK(mean(DistributionSpec{Weibull{0.5, 2.0}}) == doctest::Approx(4.0).epsilon(1e-9));
    CHECK(tail(DistributionSpec{Weibull{0.5, 2.0}}, 2.0) ==
          doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    CHECK(mean(DistributionSpec{Lognormal{0.0, 1.0}}) ==
          doctest::Approx(std::exp(0.5)).epsilon(1e-9));
    CHECK(tail(DistributionSpec{Lognormal{0.0, 1.0}}, 1.0) ==
          doctest::Approx(0.5).epsilon(1e-12));
}
