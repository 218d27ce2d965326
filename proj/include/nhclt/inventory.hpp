#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "nhclt/decomposition.hpp"

namespace nhclt {

/// Demand law with a density on [0, J].
class DemandModel {
public:
    enum class Kind { Uniform, Beta, TruncatedExponential, Table };

    static DemandModel uniform(double J);
    /// Beta(a, b) rescaled to [0, J]; a, b >= 1 keeps the density bounded.
    static DemandModel beta(double a, double b, double J);
    /// Density proportional to exp(-rate w) on [0, J].
    static DemandModel truncated_exponential(double rate, double J);
    /// Piecewise-constant density with the given weights on equal bins of [0, J].
    static DemandModel table(std::vector<double> weights, double J);

    Kind kind() const { return kind_; }
    double support_bound() const { return J_; }
    const std::vector<double>& params() const { return params_; }

    double pdf(double w) const;
    double cdf(double w) const;
    double quantile(double p) const;
    /// sup of the density.
    double pdf_max() const;

    nlohmann::json to_json() const;
    static DemandModel from_json(const nlohmann::json& doc);

private:
    DemandModel(Kind kind, std::vector<double> params, double J);

    Kind kind_;
    std::vector<double> params_;
    double J_;
    std::vector<double> table_cdf_;  // Table kind: cdf at bin edges
};

struct InventoryModel {
    double c = 0.0;    // purchase cost rate
    double c_h = 0.0;  // holding cost rate
    double c_p = 0.0;  // penalty rate
    DemandModel demand;
    double h = 0.0;  // lattice step

    InventoryModel(double c, double c_h, double c_p, DemandModel demand, double h = 0.0);

    /// L(x) = c_h x for x >= 0 and -c_p x for x < 0.
    double carrying_cost(double x) const { return x >= 0.0 ? c_h * x : -c_p * x; }
    /// Psi^{-1}((c_p - c)/(c_h + c_p)) and Psi^{-1}(c_p/(c_h + c_p)).
    double s1_quantile() const;
    double s_inf_quantile() const;
    /// Demand lattice size N = J / h.
    std::size_t lattice_cells() const;
};

struct BaseStockSolution {
    std::size_t n = 0;
    double h = 0.0;
    /// levels[k-1] = s_k, k = 1..n; level_index[k-1] is the same in lattice units.
    std::vector<double> levels;
    std::vector<long> level_index;
    double s_inf = 0.0;
    /// DP lattice x_j = j h, j = -N..N, and v_k on it for k = 0..n.
    std::vector<double> dp_points;
    std::vector<std::vector<double>> values;
    /// Demand atoms: pmf[k] = P(D = k h), k = 0..N.
    std::vector<double> demand_pmf;

    std::string levels_csv() const;
    /// v_k interpolated at any x (linear extrapolation with slope -c below the lattice).
    double value(std::size_t k, double x) const;
    /// s_{n-i+1}, the level used at period i.
    double level_at_period(std::size_t i) const { return levels[n - i]; }
};

/// Backward recursion for v_k and the base-stock levels s_1..s_n.
BaseStockSolution solve_base_stock(const InventoryModel& model, std::size_t n);

/// P(D = k h) for the lattice demand: the mass of every cell [kh, (k+1)h] is split
/// equally between its two end points.
std::vector<double> lattice_demand(const DemandModel& demand, double h);

struct TypicalClassCertificate {
    bool is_typical = true;
    std::map<double, double> crossing_points;  // eps -> w_hat(eps)
    std::vector<double> failing_eps;
};

TypicalClassCertificate typical_class_check(const DemandModel& demand, const std::vector<double>& probe_eps,
                                            double h);

struct InventoryChain {
    ChainLaw law;
    RewardFunctionArray rewards;
    long lattice_lo = 0;  // grid point j has value (lattice_lo + j) h
    std::size_t start_index = 0;
    /// gamma_{n,i} as grid indices, shared between periods with the same level.
    std::vector<std::shared_ptr<const std::vector<std::size_t>>> gamma;
};

/// Chain X_{i+1} = gamma_i(X_i) - D_i on the lattice [-J, ceil(s_inf / h) h], with m = 1 rewards
/// f_i(x, y) = c (gamma_i(x) - x) + L(y).
InventoryChain build_inventory_chain(const InventoryModel& model, const BaseStockSolution& sol, std::size_t n,
                                     double start_state = 0.0);

struct InventoryStructureReport {
    bool pass = true;
    double s1 = 0.0, s1_quantile = 0.0;
    double sn = 0.0, s_inf_quantile = 0.0;
    bool monotone = true;
    bool convex = true;
    double min_second_difference = 0.0;
    double max_reachable_state = 0.0;
};

InventoryStructureReport inventory_structure_check(const InventoryModel& model, const BaseStockSolution& sol,
                                                   const InventoryChain& chain);

struct AlphaCertificate {
    bool pass = true;
    double alpha_n = 0.0;
    double bound = 0.0;  // min{c_h, c_p - c} / (c_h + c_p)
    double tolerance = 0.0;
    double max_tv_error = 0.0;     // |row TV - P(w_hat <= D <= w_hat + eps)| over sampled pairs
    double max_row_tv = 0.0;
    double probability_bound = 0.0;  // max{c_p, c_h + c} / (c_h + c_p)
    std::size_t pairs = 0;
};

/// Throws DomainError when the demand density is not certified typical.
AlphaCertificate inventory_alpha_certificate(const InventoryModel& model, const InventoryChain& chain);

struct BivariateReport {
    bool pass = true;
    std::size_t step = 0;
    double delta_hat = 0.0;
    double alpha_hat = 1.0;
    double rho_hat = 0.0;
    double witness_residual = 0.0;
    /// Grid indices of the two product states (x, y), (x', y') that realise delta = 1.
    std::size_t x = 0, y = 0, x2 = 0, y2 = 0;
};

/// Enlarged chain (X_i, X_{i+1}): exact delta = 1 witness and the rho = 1 witness g = X_i - E[X_i].
BivariateReport bivariate_degeneracy_demo(const InventoryChain& chain);

/// Dense kernel of the enlarged chain at step i, on the product grid indexed a * S + b.
/// Only for small grids.
StochasticKernel bivariate_kernel(const KernelSequence& seq, std::size_t i);

struct VarianceGrowthReport {
    bool pass = true;  // slope > 0, doubling_ok and rigorous_bound_holds
    std::vector<std::size_t> n_list;
    std::vector<double> variance;
    std::vector<double> doubling_ratio;  // Var[n_{k+1}] / Var[n_k]
    double slope = 0.0;
    double beta = 0.0;           // the closed form as displayed
    double beta_rigorous = 0.0;  // beta * (c_h - c)^2 / 2
    bool doubling_ok = true;           // ratios in [1.5, 2.5] wherever n doubles
    bool beta_bound_holds = true;      // Var >= beta n, beta as displayed
    bool rigorous_bound_holds = true;  // Var >= beta_rigorous n
};

/// (s1^2 / 9) inf_{w in [s1, s_inf]} {Psi(w - 2 s1/3) - Psi(w - s1)} {Psi(w) - Psi(w - s1/3)}.
double inventory_beta(const InventoryModel& model, std::size_t scan_points = 10000);

VarianceGrowthReport inventory_variance_growth(const InventoryModel& model, const std::vector<std::size_t>& n_list,
                                               double start_state = 0.0);

}  // namespace nhclt
