#include "nhclt/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <utility>

namespace nhclt {

StateGrid::StateGrid(std::vector<double> points) : points_(std::move(points)) {
    if (points_.empty()) throw DomainError("state grid must be nonempty");
    for (std::size_t i = 0; i < points_.size(); ++i) {
        if (!std::isfinite(points_[i])) throw DomainError("state grid points must be finite");
        if (i > 0 && !(points_[i] > points_[i - 1]))
            throw DomainError("state grid must be strictly increasing");
    }
}

StateGrid StateGrid::uniform(double lo, double step, std::size_t count) {
    if (!(step > 0.0)) throw DomainError("grid step must be positive");
    std::vector<double> pts(count);
    for (std::size_t i = 0; i < count; ++i) pts[i] = lo + static_cast<double>(i) * step;
    return StateGrid(std::move(pts));
}

std::size_t StateGrid::nearest(double x) const {
    auto it = std::lower_bound(points_.begin(), points_.end(), x);
    if (it == points_.begin()) return 0;
    if (it == points_.end()) return points_.size() - 1;
    std::size_t hi = static_cast<std::size_t>(it - points_.begin());
    return (points_[hi] - x < x - points_[hi - 1]) ? hi : hi - 1;
}

StochasticKernel::StochasticKernel(GridPtr grid, std::vector<double> row_major)
    : grid_(std::move(grid)), n_(grid_ ? grid_->size() : 0), p_(std::move(row_major)) {
    if (!grid_) throw DomainError("kernel requires a grid");
    if (p_.size() != n_ * n_) throw DomainError("kernel must be square with dimension = grid size");
    for (std::size_t x = 0; x < n_; ++x) {
        double s = 0.0;
        for (std::size_t y = 0; y < n_; ++y) {
            double v = p_[x * n_ + y];
            if (!(v >= 0.0) || !std::isfinite(v))
                throw DomainError("kernel entries must be finite and nonnegative (row " +
                                  std::to_string(x) + ")");
            s += v;
        }
        if (std::abs(s - 1.0) > kRowSumTolerance)
            throw DomainError("kernel row " + std::to_string(x) + " sums to " +
                              std::to_string(s) + ", not 1");
    }
}

StochasticKernel StochasticKernel::identity(GridPtr grid) {
    std::size_t n = grid->size();
    std::vector<double> p(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) p[i * n + i] = 1.0;
    return StochasticKernel(std::move(grid), std::move(p));
}

std::vector<double> StochasticKernel::apply(std::span<const double> h) const {
    if (h.size() != n_) throw DomainError("function length does not match kernel");
    std::vector<double> out(n_, 0.0);
    for (std::size_t x = 0; x < n_; ++x) {
        const double* r = p_.data() + x * n_;
        double s = 0.0;
        for (std::size_t y = 0; y < n_; ++y) s += r[y] * h[y];
        out[x] = s;
    }
    return out;
}

std::vector<double> StochasticKernel::push(std::span<const double> mu) const {
    if (mu.size() != n_) throw DomainError("distribution length does not match kernel");
    std::vector<double> out(n_, 0.0);
    for (std::size_t x = 0; x < n_; ++x) {
        double w = mu[x];
        if (w == 0.0) continue;
        const double* r = p_.data() + x * n_;
        for (std::size_t y = 0; y < n_; ++y) out[y] += w * r[y];
    }
    return out;
}

bool same_grid(const GridPtr& a, const GridPtr& b) {
    return a == b || (a && b && *a == *b);
}

KernelSequence::KernelSequence(GridPtr grid, std::size_t horizon, std::size_t lookahead,
                               std::vector<KernelPtr> kernels)
    : grid_(std::move(grid)), n_(horizon), m_(lookahead), kernels_(std::move(kernels)) {
    if (!grid_) throw DomainError("kernel sequence requires a grid");
    if (n_ < 1) throw DomainError("horizon must be at least 1");
    std::size_t expected = n_ + m_ - 1;
    if (kernels_.size() != expected)
        throw DomainError("kernel sequence needs n+m-1 = " + std::to_string(expected) +
                          " kernels, got " + std::to_string(kernels_.size()));
    for (const auto& k : kernels_) {
        if (!k) throw DomainError("null kernel in sequence");
        if (!same_grid(k->grid(), grid_)) throw DomainError("all kernels must share one grid");
    }
}

const StochasticKernel& KernelSequence::step(std::size_t i) const { return *step_ptr(i); }

const KernelPtr& KernelSequence::step_ptr(std::size_t i) const {
    if (i < 1 || i > kernels_.size())
        throw DomainError("step index " + std::to_string(i) + " out of range");
    return kernels_[i - 1];
}

double tv_distance(std::span<const double> a, std::span<const double> b) {
    double overlap = 0.0;
    double l1 = 0.0;
    for (std::size_t y = 0; y < a.size(); ++y) {
        overlap += std::min(a[y], b[y]);
        l1 += std::abs(a[y] - b[y]);
    }
    if (overlap == 0.0) return 1.0;
    return std::clamp(0.5 * l1, 0.0, 1.0);
}

namespace {

// Indices of pairwise distinct rows among the active ones.
std::vector<std::size_t> distinct_rows(const StochasticKernel& k, const std::vector<char>* active) {
    std::vector<std::size_t> idx;
    for (std::size_t x = 0; x < k.size(); ++x)
        if (!active || (*active)[x]) idx.push_back(x);
    auto less = [&](std::size_t a, std::size_t b) {
        auto ra = k.row(a), rb = k.row(b);
        return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
    };
    auto eq = [&](std::size_t a, std::size_t b) {
        auto ra = k.row(a), rb = k.row(b);
        return std::equal(ra.begin(), ra.end(), rb.begin());
    };
    std::sort(idx.begin(), idx.end(), less);
    idx.erase(std::unique(idx.begin(), idx.end(), eq), idx.end());
    return idx;
}

double delta_impl(const StochasticKernel& k, const std::vector<char>* active) {
    auto rows = distinct_rows(k, active);
    double best = 0.0;
    for (std::size_t a = 0; a < rows.size(); ++a) {
        for (std::size_t b = a + 1; b < rows.size(); ++b) {
            best = std::max(best, tv_distance(k.row(rows[a]), k.row(rows[b])));
            if (best == 1.0) return 1.0;
        }
    }
    return best;
}

}  // namespace

double dobrushin_delta(const StochasticKernel& k) { return delta_impl(k, nullptr); }

double dobrushin_delta(const StochasticKernel& k, const std::vector<char>& active) {
    if (active.size() != k.size()) throw DomainError("support mask length does not match kernel");
    return delta_impl(k, &active);
}

StochasticKernel compose(const StochasticKernel& first, const StochasticKernel& second) {
    if (!same_grid(first.grid(), second.grid())) throw DomainError("cannot compose kernels on different grids");
    std::size_t n = first.size();
    std::vector<double> out(n * n, 0.0);
    for (std::size_t x = 0; x < n; ++x) {
        double* o = out.data() + x * n;
        for (std::size_t z = 0; z < n; ++z) {
            double w = first(x, z);
            if (w == 0.0) continue;
            auto r = second.row(z);
            for (std::size_t y = 0; y < n; ++y) o[y] += w * r[y];
        }
        // Products of stochastic rows drift by O(n eps); renormalize only that drift.
        double s = std::accumulate(o, o + n, 0.0);
        if (std::abs(s - 1.0) <= kRowSumTolerance && s != 1.0)
            for (std::size_t y = 0; y < n; ++y) o[y] /= s;
    }
    return StochasticKernel(first.grid(), std::move(out));
}

StochasticKernel multistep(const KernelSequence& seq, std::size_t i, std::size_t j) {
    if (!(i >= 1 && i < j && j <= seq.length() + 1))
        throw DomainError("multistep requires 1 <= i < j <= n+m");
    StochasticKernel acc = seq.step(i);
    for (std::size_t t = i + 1; t < j; ++t) acc = compose(acc, seq.step(t));
    return acc;
}

namespace {

CoefficientReport coefficient_impl(const KernelSequence& seq,
                                   const std::vector<std::vector<char>>* support) {
    if (seq.horizon() < 2) throw DomainError("minimal ergodic coefficient needs horizon n >= 2");
    CoefficientReport rep;
    rep.per_step_delta.resize(seq.length());
    std::map<const StochasticKernel*, std::vector<std::pair<const std::vector<char>*, double>>> by_mask;
    for (std::size_t i = 1; i <= seq.length(); ++i) {
        const StochasticKernel* k = seq.step_ptr(i).get();
        const std::vector<char>* mask = support ? &(*support)[i - 1] : nullptr;
        double d = -1.0;
        // Shared kernels with identical masks are evaluated once.
        for (auto& [m, v] : by_mask[k]) {
            if (m == mask || (m && mask && *m == *mask)) {
                d = v;
                break;
            }
        }
        if (d < 0.0) {
            d = mask ? dobrushin_delta(*k, *mask) : dobrushin_delta(*k);
            by_mask[k].emplace_back(mask, d);
        }
        rep.per_step_delta[i - 1] = d;
    }
    double worst = 0.0;
    for (std::size_t i = 1; i < seq.horizon(); ++i) worst = std::max(worst, rep.per_step_delta[i - 1]);
    rep.alpha_n = 1.0 - worst;
    return rep;
}

}  // namespace

CoefficientReport minimal_ergodic_coefficient(const KernelSequence& seq) {
    return coefficient_impl(seq, nullptr);
}

CoefficientReport minimal_ergodic_coefficient(const KernelSequence& seq,
                                              const std::vector<std::vector<char>>& support) {
    if (support.size() < seq.length()) throw DomainError("support masks must cover every step");
    return coefficient_impl(seq, &support);
}

double oscillation(std::span<const double> h) {
    if (h.empty()) return 0.0;
    auto [lo, hi] = std::minmax_element(h.begin(), h.end());
    return *hi - *lo;
}

double oscillation(std::span<const double> h, const std::vector<char>& active) {
    double lo = 0.0, hi = 0.0;
    bool any = false;
    for (std::size_t x = 0; x < h.size(); ++x) {
        if (!active[x]) continue;
        if (!any) {
            lo = hi = h[x];
            any = true;
        } else {
            lo = std::min(lo, h[x]);
            hi = std::max(hi, h[x]);
        }
    }
    return any ? hi - lo : 0.0;
}

}  // namespace nhclt
