#include "tailq/simulate.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <limits>

#include "tailq/errors.hpp"

namespace tailq {

void TaggedTrace::clear() {
    K = 0;
    U.clear();
    T.clear();
    X.clear();
    sojourn = 0;
    events = 0;
    has_cycle_services = false;
    own.clear();
    others_flat.clear();
    others_off.clear();
}

void BusyRecord::clear() {
    length = 0;
    customers = 0;
    services = 0;
    max_single_service = 0;
    max_compound_service = 0;
    compound.clear();
    events = 0;
}

void CycleRecord::clear() {
    cycle_length = 0;
    customers = 0;
    sojourns.clear();
    attribution.clear();
    events = 0;
}

namespace {

struct EventBudget {
    std::uint64_t used = 0;
    std::uint64_t cap = 0;

    void charge() {
        if (++used > cap) {
            char buf[80];
            std::snprintf(buf, sizeof buf, "replication exceeded the event budget of %llu",
                          static_cast<unsigned long long>(cap));
            throw EventBudgetExceeded(buf);
        }
    }
};

constexpr unsigned char kTagged = 1;
constexpr unsigned char kOther = 0;

void run_tagged(const ModelParams& P, const DerivedConstants& c, const ForcedJump* forced,
                RandomStream& rs, TaggedTrace& out, const SimOptions& opt) {
    require_stable(c);
    if (forced) {
        if (forced->cycle < 1) throw DomainError("forced cycle index must be >= 1");
        if (forced->position < 0) throw DomainError("forced position must be nonnegative");
        if (!(forced->value > 0)) throw DomainError("forced service value must be positive");
        // the tagged customer enters an empty queue, so cycle 1 serves it first
        if (forced->cycle == 1 && forced->position > 0) {
            char buf[96];
            std::snprintf(buf, sizeof buf,
                          "forced position %d unreachable: cycle 1 serves nobody ahead "
                          "of the tagged customer",
                          forced->position);
            throw ForcedIndexUnreachable(buf);
        }
    }
    const int min_k = forced ? std::max(forced->cycle, std::max(forced->min_cycles, 1)) : 1;
    const bool recording = opt.record_cycle_services;

    out.clear();
    out.has_cycle_services = recording;

    EventBudget budget{0, opt.event_cap};
    std::deque<unsigned char> fifo;
    int k = 1;       // current cycle of the tagged customer
    int ahead = 0;   // customers served ahead of it so far in this cycle
    double cycle_start = 0.0;
    bool serving_tagged = true;

    auto service_draw = [&](int cycle, int position) {
        if (forced && cycle == forced->cycle && position == forced->position)
            return forced->value;
        return sample(P.service, rs);
    };

    // The tagged customer arrives at t = 0 to an empty queue and starts at once.
    out.X.push_back(0);
    if (recording) out.others_off.push_back(0);
    {
        const double s = service_draw(1, 0);
        if (recording) out.own.push_back(s);
        double completion = s;
        double next_arrival = sample(P.arrival, rs);

        for (;;) {
            if (completion <= next_arrival) {  // departures first on ties
                const double now = completion;
                budget.charge();
                if (serving_tagged) {
                    out.U.push_back(now - cycle_start);
                    out.T.push_back(now);
                    if (recording)
                        out.others_off.push_back(
                            static_cast<std::uint32_t>(out.others_flat.size()));
                    // Conditioned coins stay without a draw until min_k passes.
                    const bool stay =
                        (forced && k < min_k) ? true : rs.next_bernoulli(c.p);
                    if (!stay) {
                        out.K = k;
                        out.sojourn = now;
                        out.events = budget.used;
                        return;
                    }
                    out.X.push_back(static_cast<int>(fifo.size()));
                    fifo.push_back(kTagged);
                    cycle_start = now;
                    ++k;
                    ahead = 0;
                } else if (rs.next_bernoulli(c.p)) {
                    fifo.push_back(kOther);
                }
                // The tagged customer is still in the system, so someone is
                // always waiting here.
                serving_tagged = fifo.front() == kTagged;
                fifo.pop_front();
                double s2;
                if (serving_tagged) {
                    if (forced && k == forced->cycle && forced->position > ahead) {
                        char buf[128];
                        std::snprintf(buf, sizeof buf,
                                      "forced position %d unreachable: cycle %d served only "
                                      "%d customers ahead of the tagged one",
                                      forced->position, k, ahead);
                        throw ForcedIndexUnreachable(buf);
                    }
                    s2 = service_draw(k, 0);
                    if (recording) out.own.push_back(s2);
                } else {
                    ++ahead;
                    s2 = service_draw(k, ahead);
                    if (recording) out.others_flat.push_back(s2);
                }
                completion = now + s2;
            } else {
                const double now = next_arrival;
                budget.charge();
                fifo.push_back(kOther);
                next_arrival = now + sample(P.arrival, rs);
            }
        }
    }
}

}  // namespace

void simulate_tagged_first(const ModelParams& params, const DerivedConstants& c,
                           RandomStream& rs, TaggedTrace& out, const SimOptions& opt) {
    run_tagged(params, c, nullptr, rs, out, opt);
}

void simulate_tagged_forced(const ModelParams& params, const DerivedConstants& c,
                            const ForcedJump& forced, RandomStream& rs, TaggedTrace& out,
                            const SimOptions& opt) {
    run_tagged(params, c, &forced, rs, out, opt);
}

void simulate_busy_period(const ModelParams& params, const DerivedConstants& c,
                          RandomStream& rs, BusyRecord& out, const SimOptions& opt) {
    require_stable(c);
    out.clear();
    EventBudget budget{0, opt.event_cap};
    std::deque<std::uint32_t> fifo;

    // Customer 0 arrives at t = 0 to an empty system.
    std::uint32_t serving = 0;
    const double first = sample(params.service, rs);
    out.compound.assign(1, first);
    out.max_single_service = first;
    double completion = first;
    double next_arrival = sample(params.arrival, rs);

    for (;;) {
        if (completion <= next_arrival) {  // departures first on ties
            const double now = completion;
            budget.charge();
            ++out.services;
            if (rs.next_bernoulli(c.p)) fifo.push_back(serving);
            if (fifo.empty()) {
                out.length = now;
                out.customers = out.compound.size();
                out.max_compound_service =
                    *std::max_element(out.compound.begin(), out.compound.end());
                out.events = budget.used;
                return;
            }
            serving = fifo.front();
            fifo.pop_front();
            const double s = sample(params.service, rs);
            out.compound[serving] += s;
            out.max_single_service = std::max(out.max_single_service, s);
            completion = now + s;
        } else {
            const double now = next_arrival;
            budget.charge();
            fifo.push_back(static_cast<std::uint32_t>(out.compound.size()));
            out.compound.push_back(0.0);
            next_arrival = now + sample(params.arrival, rs);
        }
    }
}

void simulate_one_cycle(const ModelParams& params, const DerivedConstants& c, RandomStream& rs,
                        CycleRecord& out, const SimOptions& opt) {
    require_stable(c);
    out.clear();
    EventBudget budget{0, opt.event_cap};
    std::deque<std::uint32_t> fifo;
    thread_local std::vector<double> compound;

    // sojourns holds arrival times until the final departure overwrites them.
    std::uint32_t serving = 0;
    const double first = sample(params.service, rs);
    out.sojourns.assign(1, 0.0);
    compound.assign(1, first);
    double completion = first;
    double next_arrival = sample(params.arrival, rs);

    for (;;) {
        if (completion <= next_arrival) {  // departures first on ties
            const double now = completion;
            budget.charge();
            if (rs.next_bernoulli(c.p)) {
                fifo.push_back(serving);
            } else {
                out.sojourns[serving] = now - out.sojourns[serving];
            }
            if (fifo.empty()) {
                // System is empty; the pending arrival opens the next cycle.
                out.cycle_length = next_arrival;
                out.customers = static_cast<std::uint32_t>(out.sojourns.size());
                if (opt.attribution) {
                    const double slope = c.a * (1.0 - c.rho);
                    out.attribution.resize(out.customers);
                    double best = -std::numeric_limits<double>::infinity();
                    std::uint32_t best_off = 0;
                    for (std::uint32_t m = 0; m < out.customers; ++m) {
                        best -= slope;
                        ++best_off;
                        if (compound[m] >= best) {
                            best = compound[m];
                            best_off = 0;
                        }
                        out.attribution[m] = {best, best_off};
                    }
                }
                out.events = budget.used;
                return;
            }
            serving = fifo.front();
            fifo.pop_front();
            const double s = sample(params.service, rs);
            compound[serving] += s;
            completion = now + s;
        } else {
            const double now = next_arrival;
            budget.charge();
            fifo.push_back(static_cast<std::uint32_t>(out.sojourns.size()));
            out.sojourns.push_back(now);
            compound.push_back(0.0);
            next_arrival = now + sample(params.arrival, rs);
        }
    }
}

void simulate_regenerative_cycles(const ModelParams& params, const DerivedConstants& c,
                                  RandomStream& rs, std::uint64_t n_cycles,
                                  const std::function<void(const CycleRecord&)>& sink,
                                  const SimOptions& opt) {
    CycleRecord rec;
    for (std::uint64_t i = 0; i < n_cycles; ++i) {
        simulate_one_cycle(params, c, rs, rec, opt);
        sink(rec);
    }
}

}  // namespace tailq
