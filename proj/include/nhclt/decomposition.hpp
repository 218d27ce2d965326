#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "nhclt/kernel.hpp"

namespace nhclt {

/// Thrown when the exact engine is asked for a look-ahead window it cannot represent.
class WindowBlowupError : public DomainError {
public:
    using DomainError::DomainError;
};

/// Tolerances of the exact engine.
inline constexpr double kConditionalMeanTolerance = 1e-10;
inline constexpr double kIdentityRelativeTolerance = 1e-9;
/// Window values with probability below this are treated as unreachable.
inline constexpr double kReachableMass = 1e-14;

/// Initial distribution plus kernel sequence of one row of the chain.
class ChainLaw {
public:
    ChainLaw(std::vector<double> initial, KernelSequence seq);

    const std::vector<double>& initial() const { return initial_; }
    const KernelSequence& seq() const { return seq_; }
    const GridPtr& grid() const { return seq_.grid(); }
    std::size_t horizon() const { return seq_.horizon(); }
    std::size_t lookahead() const { return seq_.lookahead(); }
    std::size_t states() const { return seq_.grid()->size(); }

private:
    std::vector<double> initial_;
    KernelSequence seq_;
};

using Tensor = std::shared_ptr<const std::vector<double>>;

/// f_{n,i}(x_i, ..., x_{i+m}) = tensor_i[x_i, ..., x_{i+m}] - offset_i, stored
/// row-major with the earliest coordinate slowest. Tensors may be shared across i.
class RewardFunctionArray {
public:
    RewardFunctionArray(std::size_t states, std::size_t horizon, std::size_t lookahead,
                        std::vector<Tensor> tensors, std::vector<double> offsets = {});

    std::size_t states() const { return s_; }
    std::size_t horizon() const { return n_; }
    std::size_t lookahead() const { return m_; }

    /// 1-based period i; window holds the 1+m grid indices X_i..X_{i+m}.
    double operator()(std::size_t i, std::span<const std::size_t> window) const;
    double at(std::size_t i, std::size_t x) const { return (*tensors_[i - 1])[x] - offsets_[i - 1]; }
    double at(std::size_t i, std::size_t x, std::size_t y) const {
        return (*tensors_[i - 1])[x * s_ + y] - offsets_[i - 1];
    }

    /// Exact C_n = max_i max |f_{n,i}|.
    double bound() const;

    const std::vector<Tensor>& tensors() const { return tensors_; }
    const std::vector<double>& offsets() const { return offsets_; }

    /// Same array with offset_i += shift[i-1].
    RewardFunctionArray shifted(std::span<const double> shift) const;

private:
    std::size_t s_, n_, m_;
    std::vector<Tensor> tensors_;
    std::vector<double> offsets_;
    std::vector<double> tensor_min_, tensor_max_;
};

/// Forward marginals mu_1..mu_{n+m} (index t-1 holds the law of X_{n,t}).
std::vector<std::vector<double>> marginals(const ChainLaw& law);

/// Reachability masks derived from marginals.
std::vector<std::vector<char>> support_masks(const std::vector<std::vector<double>>& mu);

/// E[Z_{n,i}] for i = 1..n, from the joint window laws (m <= 1).
std::vector<double> reward_means(const ChainLaw& law, const RewardFunctionArray& rewards);

/// Subtracts E[Z_{n,i}] from every period reward.
RewardFunctionArray center_rewards(const ChainLaw& law, const RewardFunctionArray& rewards);

struct Moments {
    double mean = 0.0;
    double variance = 0.0;
};

/// Exact E[S_n] and Var[S_n] by a forward sweep over the window state.
Moments moments_exact(const ChainLaw& law, const RewardFunctionArray& rewards);

/// Exact variance of sum_t g_t(X_{n,t}) for grid functions g_t (t = 1-based time).
double state_functional_variance(const ChainLaw& law,
                                 const std::vector<std::pair<std::size_t, std::vector<double>>>& terms);

struct DecompositionReport {
    std::size_t n = 0;
    std::size_t m = 0;
    bool centered = true;
    std::vector<double> original_means;  // E[Z_{n,i}] before centering
    double mean_Sn = 0.0;
    double var_Sn = 0.0;
    double C_n = 0.0;      // bound of the centered rewards
    double alpha_n = 1.0;  // over steps 1..n-1, reachable rows only

    /// V[i - m] is V_{n,i} as a grid function of X_{n,i}, i = m..n+m.
    /// For m = 0 the entry V_{n,0} is a constant vector.
    std::vector<std::vector<double>> V;
    /// d_second_moments[i - 1 - m] = E[d_{n,i}^2], i = 1+m..n+m.
    std::vector<double> d_second_moments;
    /// eta[i - 1 - m] = E[d_{n,i}^2 | X_{n,i-1}] as a grid function.
    std::vector<std::vector<double>> eta;
    /// Largest |E[d_{n,i} | X_{n,i-1}]| over reachable conditioning states.
    double max_conditional_mean = 0.0;
    double e_vm_squared = 0.0;
    double delta_n_second_moment = 0.0;

    std::vector<std::vector<double>> marginals;
    std::vector<std::vector<char>> support;
    std::shared_ptr<const RewardFunctionArray> centered_rewards;

    const std::vector<double>& value(std::size_t i) const { return V[i - m]; }
    double sum_d_second_moments() const;
};

/// Value-to-go, martingale differences, exact moments and E[Delta_n^2].
/// Throws WindowBlowupError for m > 1.
DecompositionReport decompose(const ChainLaw& law, const RewardFunctionArray& rewards);

/// d_{n,i} evaluated at X_{n,i-1} = prev, X_{n,i} = cur (prev ignored for m = 0, i = 1).
double mds_value(const DecompositionReport& rep, std::size_t i, std::size_t prev, std::size_t cur);

/// S_n - V_{n,m} - sum d_{n,i} along a path (centered rewards), path.size() == n+m.
double pathwise_residual(const DecompositionReport& rep, std::span<const std::size_t> path);

struct CheckResult {
    std::string name;
    bool pass = true;
    double lhs = 0.0;
    double rhs = 0.0;
    /// Largest observed lhs/rhs (inf if rhs == 0 < lhs).
    double worst_ratio = 0.0;
    std::size_t instances = 0;
};

struct VarianceIdentityResult {
    bool pass = true;
    double lhs = 0.0;       // E[S_n^2] of the centered sum
    double rhs = 0.0;       // E[V_{n,m}^2] + sum E[d^2]
    double residual = 0.0;  // |lhs - rhs| / scale
    CheckResult sandwich;   // Var - (m+2)^2 C^2 alpha^-2 <= sum E[d^2] <= Var
};

VarianceIdentityResult variance_identity_check(const DecompositionReport& rep);

/// m = 0 only: (1/4) alpha_n sum Var[f_i(X_i)] <= Var[S_n].
CheckResult dobrushin_lower_bound_check(const ChainLaw& law, const RewardFunctionArray& rewards);

/// Explicit constant for E[Delta_n^2] <= M C^2 alpha^-2 Var[S_n].
double delta_n_constant(std::size_t m);
CheckResult delta_n_l2_check(const DecompositionReport& rep);

struct OscillationSuiteResult {
    bool pass = true;
    std::vector<CheckResult> checks;
};

/// Every conditional-moment, cross-moment, L-infinity and oscillation inequality,
/// instantiated over all admissible index tuples.
OscillationSuiteResult oscillation_bound_suite(const ChainLaw& law, const RewardFunctionArray& rewards);
OscillationSuiteResult oscillation_bound_suite(const ChainLaw& law, const DecompositionReport& rep);

/// Explicit constant of Osc(sum_{j>i} E[d_j^2 | F_i]) <= M C^2 alpha^-2.
double sum_d_squared_oscillation_constant(std::size_t m);

nlohmann::json to_json(const DecompositionReport& rep);
/// Rows "i,E[d_i^2],sup|V_i|".
std::string decomposition_csv(const DecompositionReport& rep);
nlohmann::json to_json(const CheckResult& c);

}  // namespace nhclt
