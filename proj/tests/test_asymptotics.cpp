#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "tailq/asymptotics.hpp"
#include "tailq/distribution.hpp"
#include "tailq/errors.hpp"
#include "tailq/model.hpp"

using namespace tailq;

namespace {

// The reference model used throughout: Poisson arrivals at rate 0.2, Pareto
// services with mean 1, feedback probability 1/2.
ModelParams reference() {
    return {Exponential{0.2}, Pareto{2.5, 0.6}, 0.5};
}

}  // namespace

TEST_CASE("derived constants of the reference model") {
    const DerivedConstants c = derive_constants(reference());
    CHECK(c.a == doctest::Approx(5.0).epsilon(1e-14));
    CHECK(c.b == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(c.lambda == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(c.q == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(c.r == doctest::Approx(0.7).epsilon(1e-14));
    CHECK(c.rho == doctest::Approx(0.4).epsilon(1e-14));
    CHECK(c.b_h == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(c.m_inf == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(c.stable);
}

TEST_CASE("fluid multipliers satisfy their closed identity") {
    const DerivedConstants c = derive_constants(reference());
    CHECK(fluid_multiplier(c, 0) == 0.0);
    CHECK(fluid_multiplier(c, 1) == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(fluid_multiplier(c, 2) == doctest::Approx(0.34).epsilon(1e-14));
    CHECK(fluid_multiplier(c, 3) == doctest::Approx(0.438).epsilon(1e-14));
    // (1 + m_k)(1 - r) = 1 - (p + r^k lambda b) for every k
    for (int k = 0; k <= 50; ++k) {
        const double lhs = (1.0 + fluid_multiplier(c, k)) * (1.0 - c.r);
        const double rhs = 1.0 - (c.p + std::pow(c.r, k) * c.lambda * c.b);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
    // monotone increase toward the limit; past k ~ 100 the increments fall
    // below one ulp of m_inf, so only non-decrease is representable
    double prev = -1;
    for (int k = 0; k <= 200; ++k) {
        const double m = fluid_multiplier(c, k);
        if (k <= 85)
            CHECK(m > prev);
        else
            CHECK(m >= prev);
        CHECK(m <= c.m_inf + 1e-12);
        prev = m;
    }
    CHECK(fluid_multiplier(c, 2000) == doctest::Approx(c.m_inf).epsilon(1e-12));
}

TEST_CASE("poisson mean helpers") {
    const DerivedConstants c = derive_constants(reference());
    const double lb = c.lambda * c.b;
    CHECK(poisson_prefactor(c) == doctest::Approx(1.1538461538461537).epsilon(1e-14));
    CHECK(poisson_mean_queue(c, 1, lb) == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(poisson_mean_queue(c, 3, lb) == doctest::Approx(0.438).epsilon(1e-14));
    // with mean_x1 = lambda*b the queue means coincide with the multipliers
    for (int k = 1; k <= 20; ++k)
        CHECK(poisson_mean_queue(c, k, lb) ==
              doctest::Approx(fluid_multiplier(c, k)).epsilon(1e-12));
    CHECK(poisson_mean_total_services(c, 0.0, 0.0) ==
          doctest::Approx(2.3076923076923075).epsilon(1e-14));
}

TEST_CASE("mean total services matches a direct series") {
    const DerivedConstants c = derive_constants(reference());
    // E(K + sum X_l) = sum_k q p^(k-1) (k + sum_{l<k} m_l), summed far enough
    // that the geometric weight is negligible
    double series = 0.0, pk = 1.0, msum = 0.0;
    for (int k = 1; k <= 400; ++k) {
        series += c.q * pk * (k + msum);
        msum += fluid_multiplier(c, k);
        pk *= c.p;
    }
    CHECK(poisson_mean_total_services(c, 0.0, 0.0) ==
          doctest::Approx(series).epsilon(1e-12));
}

TEST_CASE("first sojourn tail with no feedback is the plain service tail") {
    const ModelParams params{Exponential{0.2}, Pareto{2.5, 0.6}, 0.0};
    const DerivedConstants c = derive_constants(params);
    CHECK(poisson_prefactor(c) == doctest::Approx(1.0).epsilon(1e-14));
    for (double x : {1.0, 5.0, 50.0, 1e4})
        CHECK(first_sojourn_tail(params, c, 1.0, x) ==
              doctest::Approx(tail(params.service, x)).epsilon(1e-12));
}

TEST_CASE("first sojourn tail matches a direct series") {
    const ModelParams params = reference();
    const DerivedConstants c = derive_constants(params);
    const double pref = poisson_prefactor(c);
    for (double x : {5.0, 20.0, 200.0}) {
        double series = 0.0, pk = 1.0;
        for (int k = 1; k <= 2000; ++k) {
            series += c.q * pk * tail(params.service, x / (1.0 + fluid_multiplier(c, k - 1)));
            pk *= c.p;
        }
        CHECK(first_sojourn_tail(params, c, pref, x) ==
              doctest::Approx(pref / c.q * series).epsilon(1e-10));
    }
}

TEST_CASE("series truncation tolerance barely matters") {
    const ModelParams params = reference();
    const DerivedConstants c = derive_constants(params);
    const double loose = first_sojourn_tail(params, c, 1.0, 100.0, {1e-6, 10000});
    const double tight = first_sojourn_tail(params, c, 1.0, 100.0, {1e-12, 10000});
    CHECK(loose == doctest::Approx(tight).epsilon(1e-5));
}

TEST_CASE("regular-variation constants for the first sojourn") {
    const ModelParams params = reference();
    const DerivedConstants c = derive_constants(params);
    const RVConstants rv = first_sojourn_rv(params, c);
    CHECK(rv.alpha == doctest::Approx(1.5).epsilon(1e-14));
    CHECK(rv.sojourn_constant ==
          doctest::Approx(poisson_prefactor(c) / c.q * rv.mixture_factor).epsilon(1e-14));
    // the series form approaches the closed form deep in the tail
    const double x = 1e4;
    const double series = first_sojourn_tail(params, c, poisson_prefactor(c), x);
    const double closed =
        rv.sojourn_constant * sv_factor(params.service, x) / std::pow(x, rv.alpha + 1.0);
    CHECK(series / closed == doctest::Approx(1.0).epsilon(0.01));
    CHECK_THROWS_AS(
        (void)first_sojourn_rv({Exponential{0.2}, Exponential{1.0}, 0.5},
                               derive_constants({Exponential{0.2}, Exponential{1.0}, 0.5})),
        RVRequired);
}

TEST_CASE("completion time tails are finite sums with explicit weights") {
    const ModelParams params = reference();
    const DerivedConstants c = derive_constants(params);
    // k = 1: exactly one service
    for (double x : {2.0, 8.0, 64.0})
        CHECK(completion_time_tail(params, c, 1, {1.0}, x) ==
              doctest::Approx(tail(params.service, x)).epsilon(1e-14));
    // k = 2 with Poisson weights 1 and 1 + m_1 = 1.2
    for (double x : {2.0, 8.0, 64.0}) {
        const double want =
            1.2 * tail(params.service, x) + tail(params.service, x / 1.2);
        CHECK(completion_time_tail(params, c, 2, {1.0, 1.2}, x) ==
              doctest::Approx(want).epsilon(1e-14));
    }
    CHECK_THROWS_AS((void)completion_time_tail(params, c, 0, {}, 1.0), DomainError);
    CHECK_THROWS_AS((void)completion_time_tail(params, c, 2, {1.0}, 1.0), DomainError);
}

TEST_CASE("an exceptional first service replaces only its own term") {
    const ModelParams params = reference();
    const DerivedConstants c = derive_constants(params);
    const DistributionSpec eta = Deterministic{3.0};
    // k = 1: the whole tail is the exceptional law's
    CHECK(completion_time_tail(params, c, 1, {1.0}, 2.0, eta) == 1.0);
    CHECK(completion_time_tail(params, c, 1, {1.0}, 3.5, eta) == 0.0);
    // k = 2: others' term keeps the model law, the l = 1 own term switches
    for (double x : {2.0, 5.0}) {
        const double want = 1.2 * tail(params.service, x) + tail(eta, x / 1.2);
        CHECK(completion_time_tail(params, c, 2, {1.0, 1.2}, x, eta) ==
              doctest::Approx(want).epsilon(1e-14));
    }
}

TEST_CASE("stationary sojourn tail matches a direct series") {
    const ModelParams params = reference();
    const DerivedConstants c = derive_constants(params);
    const double coef = c.b * (1.0 - c.q) / (c.a * c.q - c.b);
    CHECK(coef == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    for (double x : {10.0, 100.0, 1e4}) {
        double series = 0.0, pk = 1.0;
        for (int k = 1; k <= 2000; ++k) {
            const double xk = x * (1.0 - c.r) / (1.0 - std::pow(c.r, k));
            series += pk * (integrated_tail(params.service, xk) +
                            coef * integrated_tail(params.service, xk * c.a / c.b));
            pk *= c.p;
        }
        CHECK(stationary_sojourn_tail(params, c, x) ==
              doctest::Approx(c.q / (c.a - c.b) * series).epsilon(1e-10));
    }
}

TEST_CASE("stationary series and closed form agree deep in the tail") {
    const ModelParams params = reference();
    const DerivedConstants c = derive_constants(params);
    const double x = 1e4;
    const double series = stationary_sojourn_tail(params, c, x);
    const double closed = stationary_sojourn_rv(params, c, x);
    CHECK(series / closed == doctest::Approx(1.0).epsilon(0.02));
    // the closed form's level: P(U > x) ~ 0.0967 x^(-1.5) for this model
    CHECK(closed * std::pow(x, 1.5) == doctest::Approx(0.0967).epsilon(0.005));
    CHECK_THROWS_AS(
        (void)stationary_sojourn_rv({Exponential{0.2}, Exponential{1.0}, 0.5},
                                    derive_constants({Exponential{0.2}, Exponential{1.0}, 0.5}),
                                    10.0),
        RVRequired);
}

TEST_CASE("busy period asymptotes") {
    const ModelParams params = reference();
    const DerivedConstants c = derive_constants(params);
    CHECK(poisson_mean_busy_count(c) == doctest::Approx(1.0 / 0.6).epsilon(1e-14));
    const ModelParams nofb{Exponential{0.2}, Pareto{2.5, 0.6}, 0.0};
    const DerivedConstants c0 = derive_constants(nofb);
    CHECK(poisson_mean_busy_count(c0) == doctest::Approx(1.25).epsilon(1e-14));
    // compounded service tail: geometric-sum substitution with cap at one
    CHECK(compound_service_tail(params, c, 0.1) == 1.0);
    CHECK(compound_service_tail(params, c, 6.0) ==
          doctest::Approx(2.0 * tail(params.service, 6.0)).epsilon(1e-14));
    const double e = poisson_mean_busy_count(c);
    for (double x : {5.0, 40.0}) {
        CHECK(busy_period_tail(params, c, e, x) ==
              doctest::Approx(e * compound_service_tail(params, c, x * 0.6)).epsilon(1e-14));
        CHECK(busy_count_tail(params, c, e, x) ==
              doctest::Approx(e * compound_service_tail(params, c, x * 3.0)).epsilon(1e-14));
    }
}

TEST_CASE("no-feedback stationary tail reduces to the classical formula") {
    const ModelParams params{Exponential{0.2}, Pareto{2.5, 0.6}, 0.0};
    const DerivedConstants c = derive_constants(params);
    for (double x : {5.0, 50.0})
        CHECK(no_feedback_stationary_tail(params, c, x) ==
              doctest::Approx(0.25 * integrated_tail(params.service, x)).epsilon(1e-14));
}

TEST_CASE("random walk maximum with exponential increments") {
    for (double x : {1.0, 5.0})
        CHECK(random_walk_max_tail(1.0, Exponential{1.0}, x) ==
              doctest::Approx(std::exp(-x)).epsilon(1e-12));
    CHECK(random_walk_max_tail(2.0, Exponential{1.0}, 1.0) ==
          doctest::Approx(0.5 * std::exp(-1.0)).epsilon(1e-12));
    CHECK_THROWS_AS((void)random_walk_max_tail(0.0, Exponential{1.0}, 1.0), DomainError);
}

TEST_CASE("curves wrap the formulas they advertise") {
    const ModelParams params = reference();
    const DerivedConstants c = derive_constants(params);
    const double pref = poisson_prefactor(c);
    const AsymptoteCurve sj = first_sojourn_curve(params, c, pref);
    CHECK_FALSE(sj.label.empty());
    CHECK_FALSE(sj.validity_note.empty());
    CHECK(sj.eval(37.0) ==
          doctest::Approx(first_sojourn_tail(params, c, pref, 37.0)).epsilon(1e-14));
    const AsymptoteCurve bp = busy_period_curve(params, c, 1.5);
    CHECK(bp.eval(20.0) ==
          doctest::Approx(busy_period_tail(params, c, 1.5, 20.0)).epsilon(1e-14));
    const AsymptoteCurve ct = completion_time_curve(params, c, 2, {1.0, 1.2});
    CHECK(ct.eval(8.0) ==
          doctest::Approx(completion_time_tail(params, c, 2, {1.0, 1.2}, 8.0))
              .epsilon(1e-14));
    const AsymptoteCurve st = stationary_sojourn_curve(params, c);
    CHECK(st.eval(30.0) ==
          doctest::Approx(stationary_sojourn_tail(params, c, 30.0)).epsilon(1e-14));
    // asymptote curves decrease over any reasonable grid
    double prev = 2.0;
    for (double x = 1.0; x < 300.0; x *= 1.5) {
        const double v = sj.eval(x);
        CHECK(v <= prev + 1e-15);
        prev = v;
    }
}

TEST_CASE("instability is refused with the offending load attached") {
    const ModelParams params{Exponential{0.5}, Pareto{2.5, 0.6}, 0.8};
    const DerivedConstants c = derive_constants(params);
    CHECK_FALSE(c.stable);
    try {
        require_stable(c);
        FAIL("expected InstabilityError");
    } catch (const InstabilityError& e) {
        CHECK(e.rho == doctest::Approx(2.5).epsilon(1e-12));
    }
    CHECK_THROWS_AS((void)first_sojourn_tail(params, c, 1.0, 10.0), InstabilityError);
    CHECK_THROWS_AS((void)stationary_sojourn_tail(params, c, 10.0), InstabilityError);
    CHECK_THROWS_AS((void)poisson_mean_busy_count(c), InstabilityError);
}
