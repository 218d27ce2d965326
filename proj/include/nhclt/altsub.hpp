#pragma once

#include <string>
#include <vector>

#include "nhclt/decomposition.hpp"

namespace nhclt {

/// Thresholds of the online alternating-subsequence problem in reflected coordinates.
/// Grid points x_j = j / G, j = 0..G; observation cells [l/G, (l+1)/G), l = 0..G-1.
struct AltSubSolution {
    std::size_t n = 0;
    std::size_t G = 0;
    /// threshold[k-1][j] = smallest accepted cell index at x_j with k observations left (G = reject all).
    std::vector<std::vector<std::size_t>> threshold;
    /// u[k][j]: optimal expected number of further selections, k = 0..n.
    std::vector<std::vector<double>> u;

    double step() const { return 1.0 / static_cast<double>(G); }
    double g(std::size_t k, std::size_t j) const {
        return static_cast<double>(threshold[k - 1][j]) / static_cast<double>(G);
    }
    /// Reflected state 1 - Y for Y in cell l, moved one point up if it would coincide with x_j.
    std::size_t reflect(std::size_t j, std::size_t l) const {
        std::size_t r = G - 1 - l;
        return r == j ? r + 1 : r;
    }
    /// Rows "k,x,g_k(x)".
    std::string thresholds_csv(std::size_t k_max) const;
};

/// Optimality recursion u_k(x) = E[max{u_{k-1}(x), 1 + u_{k-1}(1 - Y)} 1(Y >= x)] + x u_{k-1}(x).
/// Throws DomainError if a threshold property fails by more than 2 grid steps.
AltSubSolution solve_alt_thresholds(std::size_t n, std::size_t grid_points = 401);

struct ThresholdPropertyReport {
    bool pass = true;
    bool identity_exact = true;      // g_k(x) = x for x >= 1/3, k <= k_identity
    double identity_max_error = 0.0;
    double min_threshold = 1.0;      // min over k >= 3, x of g_k(x)
    bool lower_bound = true;         // min_threshold >= 1/6 - 2 step
    bool monotone_values = true;     // u_k nondecreasing in k
    bool upper_sets = true;          // acceptance regions are {l >= threshold}
};

ThresholdPropertyReport altsub_threshold_properties(const AltSubSolution& sol, std::size_t k_identity = 50);

struct AltSubChain {
    ChainLaw law;
    RewardFunctionArray rewards;  // f(x, y) = 1(y != x)
    /// Per period i, the threshold vector of g_{n-i+1}.
    std::vector<const std::vector<std::size_t>*> thresholds;
};

/// X_1 = 0, X_{i+1} = X_i on rejection and 1 - Y_i on acceptance of Y_i >= g_{n-i+1}(X_i).
AltSubChain build_altsub_chain(const AltSubSolution& sol, std::size_t n);

struct AltSubAlphaCertificate {
    bool pass = true;
    std::size_t steps = 0;        // steps 1..n-3 enter
    double max_delta = 0.0;
    double alpha = 1.0;
    double max_reachable_state = 0.0;  // over times 1..n-2
    double tolerance = 0.0;       // 2 grid steps
};

/// delta(K_i) <= 5/6 + tol on reachable rows for i <= n-3 and alpha_{n-2} >= 1/6 - tol.
AltSubAlphaCertificate altsub_alpha_certificate(const AltSubChain& chain, double step);

/// Selections along one stream of observation cells, counted two ways: acceptances of the
/// threshold policy, and the chain reward sum of 1(X_{i+1} != X_i).
struct AltSubPathCount {
    std::size_t accepted = 0;
    double reward_sum = 0.0;
};
AltSubPathCount altsub_count_path(const AltSubSolution& sol, const AltSubChain& chain,
                                  const std::vector<std::size_t>& cells);

}  // namespace nhclt
