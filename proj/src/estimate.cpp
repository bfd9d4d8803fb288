#include "tailq/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "tailq/errors.hpp"

namespace tailq {

namespace {

constexpr double kZ95 = 1.959963984540054;

void check_grid(const std::vector<double>& grid) {
    if (grid.empty()) throw EmptyGrid("threshold grid is empty");
    for (std::size_t i = 0; i + 1 < grid.size(); ++i)
        if (!(grid[i] < grid[i + 1]))
            throw DomainError("threshold grid must be strictly increasing");
    if (!(grid.front() > 0) || !std::isfinite(grid.back()))
        throw DomainError("thresholds must be finite and positive");
}

// 95% interval for a binomial proportion: Wilson score, switching to the
// plain normal approximation once the count is comfortably large.
void interval95(std::uint64_t hits, std::uint64_t n, double& low, double& high) {
    const double nn = static_cast<double>(n);
    const double p = static_cast<double>(hits) / nn;
    if (hits > 50) {
        const double half = kZ95 * std::sqrt(p * (1.0 - p) / nn);
        low = std::max(0.0, p - half);
        high = std::min(1.0, p + half);
        return;
    }
    const double z2 = kZ95 * kZ95;
    const double denom = 1.0 + z2 / nn;
    const double center = (p + z2 / (2.0 * nn)) / denom;
    const double half =
        (kZ95 / denom) * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
    low = std::max(0.0, center - half);
    high = std::min(1.0, center + half);
}

}  // namespace

TailEstimate::TailEstimate(std::vector<double> x_grid) : x_grid_(std::move(x_grid)) {
    check_grid(x_grid_);
    bucket_.assign(x_grid_.size(), 0);
}

void TailEstimate::add(double value) {
    ++n_;
    // Number of thresholds strictly below the value; the highest of them is
    // the bucket this observation tops out at.
    const auto it = std::lower_bound(x_grid_.begin(), x_grid_.end(), value);
    const std::size_t below = static_cast<std::size_t>(it - x_grid_.begin());
    if (below > 0) ++bucket_[below - 1];
}

void TailEstimate::merge(const TailEstimate& other) {
    if (x_grid_ != other.x_grid_)
        throw DomainError("cannot merge tail estimates over different grids");
    n_ += other.n_;
    for (std::size_t i = 0; i < bucket_.size(); ++i) bucket_[i] += other.bucket_[i];
}

void TailEstimate::finalize() {
    if (finalized_) return;
    if (n_ == 0) throw EmptySample("tail estimate over an empty sample");
    hits_.assign(x_grid_.size(), 0);
    std::uint64_t acc = 0;
    for (std::size_t i = x_grid_.size(); i-- > 0;) {
        acc += bucket_[i];
        hits_[i] = acc;
    }
    p_hat_.resize(x_grid_.size());
    ci_low_.resize(x_grid_.size());
    ci_high_.resize(x_grid_.size());
    for (std::size_t i = 0; i < x_grid_.size(); ++i) {
        p_hat_[i] = static_cast<double>(hits_[i]) / static_cast<double>(n_);
        interval95(hits_[i], n_, ci_low_[i], ci_high_[i]);
    }
    finalized_ = true;
}

TailEstimate estimate_tail(const std::vector<double>& values,
                           const std::vector<double>& x_grid) {
    TailEstimate est(x_grid);
    for (double v : values) est.add(v);
    est.finalize();
    return est;
}

void MeanAccumulator::add(double value) {
    ++n_;
    sum_ += value;
    sumsq_ += value * value;
}

void MeanAccumulator::merge(const MeanAccumulator& other) {
    n_ += other.n_;
    sum_ += other.sum_;
    sumsq_ += other.sumsq_;
}

double MeanAccumulator::mean() const {
    if (n_ == 0) throw EmptySample("mean of an empty sample");
    return sum_ / static_cast<double>(n_);
}

double MeanAccumulator::se() const {
    if (n_ < 2) throw EmptySample("standard error needs at least two values");
    const double nn = static_cast<double>(n_);
    const double m = sum_ / nn;
    double var = (sumsq_ - nn * m * m) / (nn - 1.0);
    if (var < 0) var = 0;  // rounding guard
    return std::sqrt(var / nn);
}

double prefactor_observation(const TaggedTrace& trace) {
    return 1.0 + static_cast<double>(trace.X.back());
}

std::pair<double, double> estimate_prefactor(const MeanAccumulator& acc) {
    if (acc.n() == 0) throw EmptySample("prefactor estimate over an empty sample");
    const double se = acc.n() < 2 ? 0.0 : acc.se();
    return {acc.mean(), se};
}

AttributionCounts::AttributionCounts(std::vector<double> x_grid, const DerivedConstants& c)
    : x_grid_(std::move(x_grid)), one_minus_rho_(1.0 - c.rho) {
    check_grid(x_grid_);
    exceed_.assign(x_grid_.size(), 0);
    attributed_.assign(x_grid_.size(), 0);
    offsets_.assign(x_grid_.size(), {});
}

void AttributionCounts::add(const BusyRecord& rec) {
    for (std::size_t i = 0; i < x_grid_.size(); ++i) {
        if (!(rec.length > x_grid_[i])) break;  // grid ascends, so later ones fail too
        ++exceed_[i];
        if (rec.max_single_service > x_grid_[i] * one_minus_rho_) ++attributed_[i];
    }
}

void AttributionCounts::add(const CycleRecord& rec) {
    if (rec.attribution.size() != rec.customers)
        throw MissingAttribution("cycle record lacks attribution data; simulate with "
                                 "attribution enabled");
    for (std::uint32_t m = 0; m < rec.customers; ++m) {
        const double sojourn = rec.sojourns[m];
        const CycleAttribution& att = rec.attribution[m];
        for (std::size_t i = 0; i < x_grid_.size(); ++i) {
            if (!(sojourn > x_grid_[i])) break;
            ++exceed_[i];
            if (att.adjusted_max > x_grid_[i] * one_minus_rho_) {
                ++attributed_[i];
                auto& hist = offsets_[i];
                if (hist.size() <= att.offset) hist.resize(att.offset + 1, 0);
                ++hist[att.offset];
            }
        }
    }
}

void AttributionCounts::merge(const AttributionCounts& other) {
    if (x_grid_ != other.x_grid_)
        throw DomainError("cannot merge attribution counts over different grids");
    for (std::size_t i = 0; i < x_grid_.size(); ++i) {
        exceed_[i] += other.exceed_[i];
        attributed_[i] += other.attributed_[i];
        if (offsets_[i].size() < other.offsets_[i].size())
            offsets_[i].resize(other.offsets_[i].size(), 0);
        for (std::size_t k = 0; k < other.offsets_[i].size(); ++k)
            offsets_[i][k] += other.offsets_[i][k];
    }
}

std::optional<double> AttributionCounts::fraction(std::size_t i) const {
    if (exceed_[i] == 0) return std::nullopt;
    return static_cast<double>(attributed_[i]) / static_cast<double>(exceed_[i]);
}

DecompositionTable::DecompositionTable(double x, int k_max, int l_max, int j_max,
                                       const DerivedConstants& c)
    : x_(x), threshold_(x * (1.0 - c.rho)), k_max_(k_max), l_max_(l_max), j_max_(j_max) {
    if (!(x > 0)) throw DomainError("decomposition threshold must be positive");
    if (k_max < 1 || l_max < 0 || j_max < 0)
        throw DomainError("decomposition bounds out of range");
    joint_.assign(static_cast<std::size_t>(k_max) * (l_max + 1) * (j_max + 1), 0);
    cells_.assign(static_cast<std::size_t>(k_max) * (l_max + 1) * (j_max + 1) *
                      (j_max + 1),
                  0);
}

std::size_t DecompositionTable::joint_index(int k, int l, int j) const {
    return (static_cast<std::size_t>(k - 1) * (l_max_ + 1) + l) * (j_max_ + 1) + j;
}

std::size_t DecompositionTable::cell_index(int k, int l, int i, int j) const {
    return (joint_index(k, l, j)) * (j_max_ + 1) + i;
}

void DecompositionTable::add(const TaggedTrace& trace) {
    if (!trace.has_cycle_services)
        throw TraceTooLean("decomposition needs traces with per-cycle service times");
    ++n_;
    const bool exceeded = trace.sojourn > x_;
    if (exceeded) ++exceed_total_;
    for (int k = 1; k <= std::min<int>(trace.K, k_max_); ++k) {
        const int l = trace.K - k;
        if (l > l_max_) continue;
        const int j = trace.X[k - 1];
        if (j > j_max_) continue;
        ++joint_[joint_index(k, l, j)];
        if (!exceeded) continue;
        // service 0 of cycle k is the customer's own; 1..j are the others
        if (trace.own[k - 1] > threshold_) ++cells_[cell_index(k, l, 0, j)];
        const auto others = trace.others(k);
        for (int i = 0; i < static_cast<int>(others.size()); ++i)
            if (others[i] > threshold_) ++cells_[cell_index(k, l, i + 1, j)];
    }
}

void DecompositionTable::merge(const DecompositionTable& other) {
    if (x_ != other.x_ || k_max_ != other.k_max_ || l_max_ != other.l_max_ ||
        j_max_ != other.j_max_)
        throw DomainError("cannot merge decomposition tables with different shapes");
    n_ += other.n_;
    exceed_total_ += other.exceed_total_;
    for (std::size_t i = 0; i < joint_.size(); ++i) joint_[i] += other.joint_[i];
    for (std::size_t i = 0; i < cells_.size(); ++i) cells_[i] += other.cells_[i];
}

std::uint64_t DecompositionTable::cell(int k, int l, int i, int j) const {
    return cells_[cell_index(k, l, i, j)];
}

std::uint64_t DecompositionTable::joint(int k, int l, int j) const {
    return joint_[joint_index(k, l, j)];
}

double DecompositionTable::model(int k, int l, int i, int j, const ModelParams& params,
                                 const DerivedConstants& c) const {
    if (i > j) return 0.0;  // at most j others were ahead
    if (n_ == 0) throw EmptySample("decomposition table holds no traces");
    const double pj = static_cast<double>(joint_[joint_index(k, l, j)]) /
                      static_cast<double>(n_);
    return pj * tail(params.service, x_ / (1.0 + fluid_multiplier(c, l)));
}

double DecompositionTable::model_total(const ModelParams& params,
                                       const DerivedConstants& c) const {
    double total = 0;
    for (int k = 1; k <= k_max_; ++k)
        for (int l = 0; l <= l_max_; ++l)
            for (int j = 0; j <= j_max_; ++j) {
                if (joint_[joint_index(k, l, j)] == 0) continue;
                // every one of the 1+j services in cycle k contributes a cell
                const double one = model(k, l, 0, j, params, c);
                total += one * (1.0 + j);
            }
    return total;
}

void ratio_curve(TailEstimate& est, const AsymptoteCurve& curve) {
    est.finalize();
    const auto& grid = est.grid();
    est.predicted.resize(grid.size());
    est.ratio.resize(grid.size());
    est.ratio_low.resize(grid.size());
    est.ratio_high.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double pred = curve.eval(grid[i]);
        if (!(pred > 0)) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "curve '%s' predicts zero at x = %g",
                          curve.label.c_str(), grid[i]);
            throw ZeroPrediction(buf);
        }
        est.predicted[i] = pred;
        est.ratio[i] = est.p_hat()[i] / pred;
        est.ratio_low[i] = est.ci_low()[i] / pred;
        est.ratio_high[i] = est.ci_high()[i] / pred;
    }
}

}  // namespace tailq
