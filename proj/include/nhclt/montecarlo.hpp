#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "nhclt/decomposition.hpp"

namespace nhclt {

/// Environment variable that overrides the default worker count.
inline constexpr const char* kWorkersEnv = "NHCLT_WORKERS";

/// requested > 0 wins; otherwise NHCLT_WORKERS, otherwise hardware concurrency.
std::size_t resolve_workers(std::size_t requested);

struct SampleBatch {
    std::uint64_t master_seed = 0;
    std::size_t n = 0;
    std::size_t m = 0;
    std::vector<double> totals;  // S_n per path, in path-index order

    std::size_t replications() const { return totals.size(); }
};

/// Inverse-CDF sampler of whole paths X_1..X_{n+m}; cumulative rows cached per distinct kernel.
class PathSampler {
public:
    explicit PathSampler(const ChainLaw& law);

    std::size_t length() const { return step_table_.size() + 1; }
    void draw(std::mt19937_64& rng, std::span<std::size_t> path) const;

private:
    std::size_t s_;
    std::vector<double> initial_cum_;
    std::vector<std::vector<double>> tables_;  // S x S cumulative rows
    std::vector<std::size_t> step_table_;      // step i -> tables_ index
};

/// Path p uses mt19937_64 seeded with substream_seed(seed, p). Throws DomainError for N = 0.
std::vector<std::vector<std::size_t>> sample_paths(const ChainLaw& law, std::uint64_t seed, std::size_t N,
                                                   std::size_t workers = 0);

/// S_n = sum_i f_i(X_i, ..., X_{i+m}) along one path (uncentered rewards).
double path_total(const RewardFunctionArray& rewards, std::span<const std::size_t> path);

SampleBatch total_reward_samples(const std::vector<std::vector<std::size_t>>& paths,
                                 const RewardFunctionArray& rewards, std::uint64_t seed);

/// Streamed equivalent of total_reward_samples(sample_paths(...)); bitwise identical totals.
SampleBatch sample_totals(const ChainLaw& law, const RewardFunctionArray& rewards, std::uint64_t seed,
                          std::size_t N, std::size_t workers = 0);

double normal_cdf(double x);

/// sup_x |F_N(x) - Phi(x)| of an already standardized sample.
double ks_distance_normal(std::vector<double> z);

struct CltReport {
    std::size_t n = 0;
    std::size_t N = 0;
    std::uint64_t seed = 0;
    double sample_mean = 0.0;
    double sample_var = 0.0;
    bool standardized_by_exact = false;
    double mean_used = 0.0;
    double var_used = 0.0;
    bool degenerate = false;
    std::optional<double> ks_distance;  // empty when degenerate
    double condition_ratio = 0.0;      // C^2 alpha^-2 / Var (inf for zero variance)
};

/// Throws DomainError for N < 100.
CltReport normality_report(const SampleBatch& batch, std::optional<Moments> exact, double C_n, double alpha_n);

/// (x - mean) / sd with the moments the report standardized by; empty when degenerate.
std::vector<double> standardized_sample(const SampleBatch& batch, const CltReport& rep);

struct ConditionRow {
    std::size_t n = 0;
    double C_n = 0.0;
    double alpha_n = 1.0;
    double variance = 0.0;
    double ratio = 0.0;
};

struct ConditionReport {
    std::vector<ConditionRow> rows;
    bool finite = true;
    bool decreasing = true;
    double slope = 0.0;  // least-squares slope of log ratio against log n
    bool pass = true;
};

/// Verdict: every ratio finite, strictly decreasing in n, and log-log slope <= -1/2.
ConditionReport clt_condition_report(std::vector<ConditionRow> rows);

inline constexpr double kConditionSlopeMax = -0.5;

/// "path,total" rows.
std::string totals_csv(const SampleBatch& batch);
/// "bin_center,empirical_density,normal_density" over [-4, 4].
std::string histogram_csv(const std::vector<double>& z, std::size_t bins = 40);

nlohmann::json to_json(const CltReport& r);
nlohmann::json to_json(const ConditionReport& r);

}  // namespace nhclt
