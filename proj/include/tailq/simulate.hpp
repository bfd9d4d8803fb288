#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tailq/model.hpp"
#include "tailq/random.hpp"

namespace tailq {

struct SimOptions {
    // Hard cap on processed events per replication. Exceeding it throws
    // EventBudgetExceeded; callers count such replications, they are never
    // silently kept as truncated samples.
    std::uint64_t event_cap = 100'000'000;
    // TaggedTrace: also record every service time, grouped by cycle.
    bool record_cycle_services = false;
    // CycleRecord: fill the per-customer big-jump attribution.
    bool attribution = false;
};

// One customer followed from its arrival at an empty queue until it leaves for
// good. Cycle k is the stretch between its (k-1)-th and k-th service
// completions; during cycle k the queue ahead of it holds X_{k-1} customers.
struct TaggedTrace {
    int K = 0;                // number of service passes
    std::vector<double> U;    // U[k-1]: duration of cycle k
    std::vector<double> T;    // T[k-1]: time of the k-th completion
    std::vector<int> X;       // X[k]: queue ahead after completion k; X[0] = 0 on entry
    double sojourn = 0;       // T[K-1], total time in system
    std::uint64_t events = 0;

    // Filled when record_cycle_services is set. own[k-1] is the customer's own
    // k-th service; others(k) lists the services of the X_{k-1} customers
    // served ahead of it in cycle k, in service order.
    bool has_cycle_services = false;
    std::vector<double> own;
    std::span<const double> others(int k) const {
        return {others_flat.data() + others_off[static_cast<size_t>(k) - 1],
                others_flat.data() + others_off[static_cast<size_t>(k)]};
    }

    std::vector<double> others_flat;
    std::vector<std::uint32_t> others_off;
    void clear();
};

// One busy period started by an arrival to an empty system.
struct BusyRecord {
    double length = 0;                 // time until the system empties
    std::uint64_t customers = 0;       // distinct customers served
    std::uint64_t services = 0;        // completions including feedback passes
    double max_single_service = 0;     // largest individual service time
    double max_compound_service = 0;   // largest per-customer total
    std::vector<double> compound;      // per-customer total service, arrival order
    std::uint64_t events = 0;
    void clear();
};

// Per-customer big-jump witness: adjusted_max is
//   max over n of (compound service of the n-th earlier customer - n*a*(1-rho)),
// so "some earlier customer's compounded service beats (x + n*a)*(1-rho)" is
// exactly adjusted_max > x*(1-rho). offset is the maximizing n.
struct CycleAttribution {
    double adjusted_max = 0;
    std::uint32_t offset = 0;
};

// One regeneration cycle: from an arrival to an empty system until just before
// the next such arrival. Every customer of the cycle departs within it.
struct CycleRecord {
    double cycle_length = 0;
    std::uint32_t customers = 0;
    std::vector<double> sojourns;                 // arrival order; time to final departure
    std::vector<CycleAttribution> attribution;    // filled when enabled
    std::uint64_t events = 0;
    void clear();
};

// A huge service planted into a tagged-customer replication, with the
// customer's feedback coins conditioned to keep it around long enough to watch
// the aftermath.
struct ForcedJump {
    int cycle = 1;       // which of the tagged customer's cycles carries the jump
    int position = 0;    // 0: its own service; i >= 1: the i-th customer served ahead
    double value = 0;    // the planted service time
    int min_cycles = 0;  // condition the coins so K >= max(cycle, min_cycles)
};

// All simulators demand stable constants (require_stable) and draw every
// variate from the given stream in event order, ties resolved departures
// first. A replication is reproduced exactly by (params, seed, stream index).

void simulate_tagged_first(const ModelParams& params, const DerivedConstants& c,
                           RandomStream& rs, TaggedTrace& out, const SimOptions& opt = {});

// Throws ForcedIndexUnreachable when the forced cycle has fewer customers
// ahead than forced.position.
void simulate_tagged_forced(const ModelParams& params, const DerivedConstants& c,
                            const ForcedJump& forced, RandomStream& rs, TaggedTrace& out,
                            const SimOptions& opt = {});

void simulate_busy_period(const ModelParams& params, const DerivedConstants& c,
                          RandomStream& rs, BusyRecord& out, const SimOptions& opt = {});

void simulate_one_cycle(const ModelParams& params, const DerivedConstants& c, RandomStream& rs,
                        CycleRecord& out, const SimOptions& opt = {});

// Convenience wrapper: n_cycles consecutive cycles from one stream, invoking
// sink with a reused record after each. Parallel callers use simulate_one_cycle
// directly with one stream per cycle.
void simulate_regenerative_cycles(const ModelParams& params, const DerivedConstants& c,
                                  RandomStream& rs, std::uint64_t n_cycles,
                                  const std::function<void(const CycleRecord&)>& sink,
                                  const SimOptions& opt = {});

}  // namespace tailq
