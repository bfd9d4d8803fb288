#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "tailq/asymptotics.hpp"
#include "tailq/model.hpp"
#include "tailq/simulate.hpp"

// Counting tail estimators, mean accumulators, big-jump attribution counts,
// and the sojourn decomposition table.  Everything here merges pairwise so the
// blocked parallel driver can combine partial results in deterministic order.

namespace tailq {

// Exceedance counts over a fixed threshold grid.  Feed observations with
// add(), combine partials with merge(), then finalize() once to fill the
// probability and confidence columns.  Exceedance is strict: a value equal to
// a threshold does not count.
class TailEstimate {
public:
    TailEstimate() = default;
    explicit TailEstimate(std::vector<double> x_grid);

    void add(double value);
    void merge(const TailEstimate& other);
    void finalize();

    const std::vector<double>& grid() const { return x_grid_; }
    std::uint64_t n() const { return n_; }
    const std::vector<std::uint64_t>& hits() const { return hits_; }
    const std::vector<double>& p_hat() const { return p_hat_; }
    const std::vector<double>& ci_low() const { return ci_low_; }
    const std::vector<double>& ci_high() const { return ci_high_; }

    // Filled by ratio_curve; empty otherwise.
    std::vector<double> predicted;
    std::vector<double> ratio;
    std::vector<double> ratio_low;
    std::vector<double> ratio_high;

private:
    std::vector<double> x_grid_;
    std::vector<std::uint64_t> bucket_;  // per-interval counts until finalize
    std::vector<std::uint64_t> hits_;
    std::uint64_t n_ = 0;
    bool finalized_ = false;
    std::vector<double> p_hat_, ci_low_, ci_high_;
};

TailEstimate estimate_tail(const std::vector<double>& values,
                           const std::vector<double>& x_grid);

// Streaming mean with standard error.
class MeanAccumulator {
public:
    void add(double value);
    void merge(const MeanAccumulator& other);
    std::uint64_t n() const { return n_; }
    double sum() const { return sum_; }
    double mean() const;  // EmptySample when no values were added
    double se() const;    // EmptySample when fewer than two values

private:
    std::uint64_t n_ = 0;
    double sum_ = 0;
    double sumsq_ = 0;
};

// Observation of 1 + X_{K-1} from one trace started at an empty queue; its
// mean over traces is the prefactor in the first-sojourn tail curve.
double prefactor_observation(const TaggedTrace& trace);

// Mean and standard error of the prefactor over a finished accumulator.
std::pair<double, double> estimate_prefactor(const MeanAccumulator& acc);

// Per-threshold attribution counts: how many tail exceedances came with a
// single big jump, per the single-big-jump picture the asymptotes rest on.
//
// Busy flavour: an exceedance {length > x} is attributed when one individual
// service exceeded x(1-rho).  Stationary flavour: an exceedance
// {sojourn of customer m > x} is attributed when some customer m-n of the
// same cycle accumulated total service above (x + n*a)(1-rho); the offset n
// of the witness is histogrammed per threshold.
class AttributionCounts {
public:
    AttributionCounts() = default;
    AttributionCounts(std::vector<double> x_grid, const DerivedConstants& c);

    void add(const BusyRecord& rec);
    void add(const CycleRecord& rec);  // MissingAttribution without attribution data
    void merge(const AttributionCounts& other);

    const std::vector<double>& grid() const { return x_grid_; }
    const std::vector<std::uint64_t>& exceed() const { return exceed_; }
    const std::vector<std::uint64_t>& attributed() const { return attributed_; }
    // fraction attributed, or nullopt where nothing exceeded
    std::optional<double> fraction(std::size_t i) const;
    // offsets()[i][n] counts stationary exceedances of grid[i] whose witness
    // arrived n customers earlier
    const std::vector<std::vector<std::uint64_t>>& offsets() const { return offsets_; }

private:
    std::vector<double> x_grid_;
    double one_minus_rho_ = 0;
    std::vector<std::uint64_t> exceed_;
    std::vector<std::uint64_t> attributed_;
    std::vector<std::vector<std::uint64_t>> offsets_;
};

// Joint decomposition of first-sojourn exceedances by (k, l, i, j): the trace
// left after cycle K = k+l, saw j others ahead in cycle k, and service i of
// cycle k (0 = the customer's own, 1..j the others in service order) was the
// big one, i.e. exceeded x(1-rho).  The model column pairs the empirical
// cycle-count law P(K = k+l, X_{k-1} = j) with the exact single-service tail
// P((1+m_l) * sigma > x).
class DecompositionTable {
public:
    DecompositionTable() = default;
    DecompositionTable(double x, int k_max, int l_max, int j_max,
                       const DerivedConstants& c);

    // Needs traces recorded with per-cycle service times.
    void add(const TaggedTrace& trace);
    void merge(const DecompositionTable& other);

    double x() const { return x_; }
    int k_max() const { return k_max_; }
    int l_max() const { return l_max_; }
    int j_max() const { return j_max_; }
    std::uint64_t n() const { return n_; }
    std::uint64_t exceed_total() const { return exceed_total_; }

    // k in 1..k_max, l in 0..l_max, i in 0..j, j in 0..j_max
    std::uint64_t cell(int k, int l, int i, int j) const;
    std::uint64_t joint(int k, int l, int j) const;

    // Model value for one cell; empirical comparator is cell(...)/n().
    double model(int k, int l, int i, int j, const ModelParams& params,
                 const DerivedConstants& c) const;
    // Sum of the model column over all stored cells.
    double model_total(const ModelParams& params, const DerivedConstants& c) const;

private:
    std::size_t joint_index(int k, int l, int j) const;
    std::size_t cell_index(int k, int l, int i, int j) const;

    double x_ = 0;
    double threshold_ = 0;  // x * (1 - rho)
    int k_max_ = 0, l_max_ = 0, j_max_ = 0;
    std::uint64_t n_ = 0;
    std::uint64_t exceed_total_ = 0;
    std::vector<std::uint64_t> joint_;
    std::vector<std::uint64_t> cells_;
};

// Divides the empirical tail by the curve's prediction, with the confidence
// interval carried along.  The estimate must be finalized.
void ratio_curve(TailEstimate& est, const AsymptoteCurve& curve);

}  // namespace tailq
