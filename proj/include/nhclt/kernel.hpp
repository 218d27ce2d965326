#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

namespace nhclt {

/// Row-sum tolerance for every stochastic object in the library.
inline constexpr double kRowSumTolerance = 1e-12;

class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Finite, strictly increasing set of real state values.
class StateGrid {
public:
    explicit StateGrid(std::vector<double> points);

    /// Evenly spaced grid lo, lo+step, ..., containing `count` points.
    static StateGrid uniform(double lo, double step, std::size_t count);

    std::size_t size() const { return points_.size(); }
    double operator[](std::size_t i) const { return points_[i]; }
    const std::vector<double>& points() const { return points_; }

    /// Index of the grid point nearest to x (ties go to the lower index).
    std::size_t nearest(double x) const;

    bool operator==(const StateGrid& other) const { return points_ == other.points_; }

private:
    std::vector<double> points_;
};

using GridPtr = std::shared_ptr<const StateGrid>;

/// Dense row-stochastic matrix on a StateGrid; row = source, column = destination.
class StochasticKernel {
public:
    /// Validates non-negativity and row sums; throws DomainError on violation.
    StochasticKernel(GridPtr grid, std::vector<double> row_major);

    static StochasticKernel identity(GridPtr grid);

    std::size_t size() const { return n_; }
    const GridPtr& grid() const { return grid_; }

    double operator()(std::size_t from, std::size_t to) const { return p_[from * n_ + to]; }
    std::span<const double> row(std::size_t from) const { return {p_.data() + from * n_, n_}; }
    const std::vector<double>& data() const { return p_; }

    /// (K h)(x) = sum_y K(x, y) h(y).
    std::vector<double> apply(std::span<const double> h) const;
    /// (mu K)(y) = sum_x mu(x) K(x, y).
    std::vector<double> push(std::span<const double> mu) const;

private:
    GridPtr grid_;
    std::size_t n_;
    std::vector<double> p_;
};

using KernelPtr = std::shared_ptr<const StochasticKernel>;

bool same_grid(const GridPtr& a, const GridPtr& b);

/// Kernels K_{1,2}, ..., K_{n+m-1,n+m} of a row of a non-homogeneous chain.
/// Identical kernels may be shared between steps.
class KernelSequence {
public:
    KernelSequence(GridPtr grid, std::size_t horizon, std::size_t lookahead,
                   std::vector<KernelPtr> kernels);

    const GridPtr& grid() const { return grid_; }
    std::size_t horizon() const { return n_; }
    std::size_t lookahead() const { return m_; }
    std::size_t length() const { return kernels_.size(); }

    /// One-step kernel K_{i,i+1}; steps are 1-based.
    const StochasticKernel& step(std::size_t i) const;
    const KernelPtr& step_ptr(std::size_t i) const;
    const std::vector<KernelPtr>& kernels() const { return kernels_; }

private:
    GridPtr grid_;
    std::size_t n_;
    std::size_t m_;
    std::vector<KernelPtr> kernels_;
};

struct CoefficientReport {
    std::vector<double> per_step_delta;  // every stored step, for diagnostics
    double alpha_n = 1.0;                // 1 - max delta over steps 1..n-1
};

/// Total-variation distance between two probability rows.
/// Returns exactly 1 for disjoint supports and exactly 0 for equal rows.
double tv_distance(std::span<const double> a, std::span<const double> b);

/// Dobrushin contraction coefficient: max over row pairs of the TV distance.
double dobrushin_delta(const StochasticKernel& k);

/// As dobrushin_delta, restricted to source rows with active[x] != 0.
double dobrushin_delta(const StochasticKernel& k, const std::vector<char>& active);

StochasticKernel compose(const StochasticKernel& first, const StochasticKernel& second);

/// K_{i,j} = K_{i,i+1} ... K_{j-1,j}; requires 1 <= i < j <= n + m.
StochasticKernel multistep(const KernelSequence& seq, std::size_t i, std::size_t j);

/// alpha_n over steps 1..n-1 (the last m+1 transitions never enter).
CoefficientReport minimal_ergodic_coefficient(const KernelSequence& seq);

/// Same, but each step only compares rows flagged in support[i-1].
CoefficientReport minimal_ergodic_coefficient(const KernelSequence& seq,
                                              const std::vector<std::vector<char>>& support);

double oscillation(std::span<const double> h);

/// Oscillation over the entries with active[x] != 0 (0 if none).
double oscillation(std::span<const double> h, const std::vector<char>& active);

}  // namespace nhclt
