#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <vector>

#include "tailq/errors.hpp"
#include "tailq/model.hpp"
#include "tailq/random.hpp"
#include "tailq/simulate.hpp"

using namespace tailq;

namespace {

ModelParams reference() {
    return {Exponential{0.2}, Pareto{2.5, 0.6}, 0.5};
}

struct Moments {
    std::uint64_t n = 0;
    double sum = 0, sumsq = 0;
    void add(double v) {
        ++n;
        sum += v;
        sumsq += v * v;
    }
    double mean() const { return sum / n; }
    double se() const {
        const double m = mean();
        return std::sqrt((sumsq / n - m * m) / n);
    }
};

}  // namespace

TEST_CASE("deterministic laws give a fully predictable trace") {
    const ModelParams params{Deterministic{2.0}, Deterministic{1.0}, 0.0};
    const DerivedConstants c = derive_constants(params);
    RandomStream rs(1, 0);
    TaggedTrace tr;
    simulate_tagged_first(params, c, rs, tr);
    CHECK(tr.K == 1);
    REQUIRE(tr.U.size() == 1);
    REQUIRE(tr.T.size() == 1);
    REQUIRE(tr.X.size() == 1);
    CHECK(tr.U[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(tr.T[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(tr.X[0] == 0);
    CHECK(tr.sojourn == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("no feedback means exactly one pass") {
    const ModelParams params{Exponential{0.2}, Pareto{2.5, 0.6}, 0.0};
    const DerivedConstants c = derive_constants(params);
    TaggedTrace tr;
    for (std::uint64_t j = 0; j < 200; ++j) {
        RandomStream rs(5, j);
        simulate_tagged_first(params, c, rs, tr);
        CHECK(tr.K == 1);
        CHECK(tr.sojourn == doctest::Approx(tr.T[0]));
    }
}

TEST_CASE("trace invariants hold rep after rep") {
    const ModelParams params = reference();
    const DerivedConstants c = derive_constants(params);
    TaggedTrace tr;
    for (std::uint64_t j = 0; j < 2000; ++j) {
        RandomStream rs(6, j);
        simulate_tagged_first(params, c, rs, tr);
        REQUIRE(tr.K >= 1);
        REQUIRE(tr.U.size() == static_cast<size_t>(tr.K));
        REQUIRE(tr.T.size() == static_cast<size_t>(tr.K));
        REQUIRE(tr.X.size() == static_cast<size_t>(tr.K));
        CHECK(tr.X[0] == 0);
        // completion times are the running sums of the cycle lengths
        double acc = 0;
        for (int k = 0; k < tr.K; ++k) {
            CHECK(tr.U[k] > 0);
            acc += tr.U[k];
            CHECK(tr.T[k] == doctest::Approx(acc).epsilon(1e-12));
        }
        CHECK(tr.sojourn == doctest::Approx(acc).epsilon(1e-12));
        CHECK(tr.events > 0);
    }
}

TEST_CASE("feedback pass counts are geometric") {
    const ModelParams params = reference();
    const DerivedConstants c = derive_constants(params);
    Moments k;
    TaggedTrace tr;
    for (std::uint64_t j = 0; j < 20000; ++j) {
        RandomStream rs(7, j);
        simulate_tagged_first(params, c, rs, tr);
        k.add(tr.K);
    }
    // E K = 1/q = 2
    CHECK(std::fabs(k.mean() - 2.0) < 3 * k.se());
}

TEST_CASE("queue behind the first completion has the poisson mean") {
    const ModelParams params = reference();
    const DerivedConstants c = derive_constants(params);
    Moments x1;
    TaggedTrace tr;
    for (std::uint64_t j = 0; j < 20000; ++j) {
        RandomStream rs(8, j);
        simulate_tagged_first(params, c, rs, tr);
        if (tr.K > 1) x1.add(tr.X[1]);
    }
    // E X_1 = lambda b = 0.2 for Poisson input
    CHECK(std::fabs(x1.mean() - 0.2) < 3 * x1.se());
}

TEST_CASE("recorded cycle services account for every cycle") {
    const ModelParams params = reference();
    const DerivedConstants c = derive_constants(params);
    SimOptions opt;
    opt.record_cycle_services = true;
    TaggedTrace tr;
    for (std::uint64_t j = 0; j < 2000; ++j) {
        RandomStream rs(9, j);
        simulate_tagged_first(params, c, rs, tr, opt);
        REQUIRE(tr.has_cycle_services);
        REQUIRE(tr.own.size() == static_cast<size_t>(tr.K));
        REQUIRE(tr.others_off.size() == static_cast<size_t>(tr.K) + 1);
        for (int k = 1; k <= tr.K; ++k) {
            const auto others = tr.others(k);
            // exactly the X_{k-1} customers ahead got served within cycle k
            CHECK(static_cast<int>(others.size()) == tr.X[k - 1]);
            // cycle length is at least the work done inside it
            double work = tr.own[k - 1];
            for (double s : others) work += s;
            CHECK(tr.U[k - 1] >= work - 1e-9);
        }
    }
}

TEST_CASE("busy period length equals the work it serves") {
    const ModelParams params = reference();
    const DerivedConstants c = derive_constants(params);
    BusyRecord rec;
    for (std::uint64_t j = 0; j < 2000; ++j) {
        RandomStream rs(10, j);
        simulate_busy_period(params, c, rs, rec);
        REQUIRE(rec.customers >= 1);
        REQUIRE(rec.compound.size() == rec.customers);
        double total = 0, maxc = 0;
        for (double v : rec.compound) {
            total += v;
            maxc = std::max(maxc, v);
        }
        CHECK(rec.length == doctest::Approx(total).epsilon(1e-9));
        CHECK(rec.max_compound_service == doctest::Approx(maxc).epsilon(1e-12));
        CHECK(rec.max_single_service <= rec.max_compound_service + 1e-12);
        CHECK(rec.max_single_service > 0);
        CHECK(rec.services >= rec.customers);
    }
}

TEST_CASE("busy period customer count matches the closed mean") {
    SUBCASE("with feedback") {
        const ModelParams params = reference();
        const DerivedConstants c = derive_constants(params);
        Moments n;
        BusyRecord rec;
        for (std::uint64_t j = 0; j < 20000; ++j) {
            RandomStream rs(11, j);
            simulate_busy_period(params, c, rs, rec);
            n.add(static_cast<double>(rec.customers));
        }
        // 1/(1 - rho) = 1/0.6
        CHECK(std::fabs(n.mean() - 1.0 / 0.6) < 3 * n.se());
    }
    SUBCASE("classical M/M/1") {
        const ModelParams params{Exponential{0.2}, Exponential{1.0}, 0.0};
        const DerivedConstants c = derive_constants(params);
        Moments n;
        BusyRecord rec;
        for (std::uint64_t j = 0; j < 20000; ++j) {
            RandomStream rs(12, j);
            simulate_busy_period(params, c, rs, rec);
            n.add(static_cast<double>(rec.customers));
        }
        CHECK(std::fabs(n.mean() - 1.25) < 3 * n.se());
    }
}

TEST_CASE("compounded service per customer has mean b/q") {
    const ModelParams params = reference();
    const DerivedConstants c = derive_constants(params);
    Moments s;
    BusyRecord rec;
    for (std::uint64_t j = 0; j < 5000; ++j) {
        RandomStream rs(13, j);
        simulate_busy_period(params, c, rs, rec);
        for (double v : rec.compound) s.add(v);
    }
    CHECK(std::fabs(s.mean() - 2.0) < 3 * s.se());
}

TEST_CASE("one cycle serves every customer to departure") {
    const ModelParams params = reference();
    const DerivedConstants c = derive_constants(params);
    SimOptions opt;
    opt.attribution = true;
    CycleRecord rec;
    for (std::uint64_t j = 0; j < 2000; ++j) {
        RandomStream rs(14, j);
        simulate_one_cycle(params, c, rs, rec, opt);
        REQUIRE(rec.customers >= 1);
        REQUIRE(rec.sojourns.size() == rec.customers);
        REQUIRE(rec.attribution.size() == rec.customers);
        for (std::uint32_t m = 0; m < rec.customers; ++m) {
            CHECK(rec.sojourns[m] > 0);
            CHECK(rec.sojourns[m] <= rec.cycle_length + 1e-9);
            CHECK(rec.attribution[m].offset <= m);
            CHECK(rec.attribution[m].adjusted_max > 0);
        }
    }
}

TEST_CASE("the regenerative wrapper replays single cycles exactly") {
    const ModelParams params = reference();
    const DerivedConstants c = derive_constants(params);
    std::vector<double> lengths_a;
    RandomStream rs_a(15, 0);
    simulate_regenerative_cycles(params, c, rs_a, 25,
                                 [&](const CycleRecord& rec) {
                                     lengths_a.push_back(rec.cycle_length);
                                 });
    REQUIRE(lengths_a.size() == 25);
    RandomStream rs_b(15, 0);
    CycleRecord rec;
    for (int i = 0; i < 25; ++i) {
        simulate_one_cycle(params, c, rs_b, rec);
        CHECK(rec.cycle_length == lengths_a[static_cast<size_t>(i)]);
    }
}

TEST_CASE("identical streams give identical traces") {
    const ModelParams params = reference();
    const DerivedConstants c = derive_constants(params);
    TaggedTrace a, b;
    RandomStream ra(16, 9), rb(16, 9);
    simulate_tagged_first(params, c, ra, a);
    simulate_tagged_first(params, c, rb, b);
    CHECK(a.K == b.K);
    CHECK(a.sojourn == b.sojourn);
    CHECK(a.T == b.T);
    CHECK(a.X == b.X);
    RandomStream rc(16, 10);
    TaggedTrace d;
    simulate_tagged_first(params, c, rc, d);
    CHECK((d.K != a.K || d.sojourn != a.sojourn));
}

TEST_CASE("the event budget is enforced, not silently truncated") {
    const ModelParams params = reference();
    const DerivedConstants c = derive_constants(params);
    SimOptions opt;
    opt.event_cap = 2;
    int threw = 0;
    TaggedTrace tr;
    for (std::uint64_t j = 0; j < 50; ++j) {
        RandomStream rs(17, j);
        try {
            simulate_tagged_first(params, c, rs, tr, opt);
        } catch (const EventBudgetExceeded&) {
            ++threw;
        }
    }
    CHECK(threw > 0);
}

TEST_CASE("unstable parameters are refused before any event") {
    const ModelParams params{Exponential{0.5}, Pareto{2.5, 0.6}, 0.8};
    const DerivedConstants c = derive_constants(params);
    RandomStream rs(18, 0);
    TaggedTrace tr;
    CHECK_THROWS_AS(simulate_tagged_first(params, c, rs, tr), InstabilityError);
    BusyRecord rec;
    CHECK_THROWS_AS(simulate_busy_period(params, c, rs, rec), InstabilityError);
}

TEST_CASE("a planted first service is taken verbatim") {
    const ModelParams params = reference();
    const DerivedConstants c = derive_constants(params);
    ForcedJump forced;
    forced.cycle = 1;
    forced.position = 0;
    forced.value = 777.0;
    TaggedTrace tr;
    for (std::uint64_t j = 0; j < 50; ++j) {
        RandomStream rs(19, j);
        simulate_tagged_forced(params, c, forced, rs, tr);
        // the customer arrives at an empty queue, so T_1 is its own service
        CHECK(tr.T[0] == 777.0);
    }
}

TEST_CASE("forced coins keep the customer long enough to watch") {
    const ModelParams params = reference();
    const DerivedConstants c = derive_constants(params);
    ForcedJump forced;
    forced.cycle = 1;
    forced.position = 0;
    forced.value = 100.0;
    forced.min_cycles = 3;
    TaggedTrace tr;
    for (std::uint64_t j = 0; j < 100; ++j) {
        RandomStream rs(20, j);
        simulate_tagged_forced(params, c, forced, rs, tr);
        CHECK(tr.K >= 3);
        CHECK(tr.T[0] == 100.0);
        // later completions come strictly later
        CHECK(tr.T[1] > tr.T[0]);
        CHECK(tr.T[2] > tr.T[1]);
    }
}

TEST_CASE("a forced position beyond the realized queue is an error") {
    const ModelParams params = reference();
    const DerivedConstants c = derive_constants(params);
    ForcedJump forced;
    forced.cycle = 1;
    forced.position = 3;  // nobody is ahead in cycle 1 after an arrival to empty
    forced.value = 10.0;
    RandomStream rs(21, 0);
    TaggedTrace tr;
    CHECK_THROWS_AS(simulate_tagged_forced(params, c, forced, rs, tr),
                    ForcedIndexUnreachable);
}

TEST_CASE("forced jump parameters are validated") {
    const ModelParams params = reference();
    const DerivedConstants c = derive_constants(params);
    RandomStream rs(22, 0);
    TaggedTrace tr;
    ForcedJump bad;
    bad.cycle = 0;
    bad.value = 1.0;
    CHECK_THROWS_AS(simulate_tagged_forced(params, c, bad, rs, tr), DomainError);
    bad.cycle = 1;
    bad.value = 0.0;
    CHECK_THROWS_AS(simulate_tagged_forced(params, c, bad, rs, tr), DomainError);
    bad.value = 1.0;
    bad.position = -1;
    CHECK_THROWS_AS(simulate_tagged_forced(params, c, bad, rs, tr), DomainError);
}
