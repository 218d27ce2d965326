#include <doctest.h>

#include <cstdlib>
#include <map>
#include <random>

#include "nhclt/inventory.hpp"
#include "nhclt/montecarlo.hpp"
#include "nhclt/reference_models.hpp"
#include "oracles.hpp"

using namespace nhclt;

TEST_CASE("totals are bitwise reproducible and independent of worker count") {
    auto b = random_instance(5, 4, 30, 1);
    auto one = sample_totals(b.law, b.rewards, 99, 2000, 1);
    auto four = sample_totals(b.law, b.rewards, 99, 2000, 4);
    auto again = sample_totals(b.law, b.rewards, 99, 2000, 3);
    CHECK(one.totals == four.totals);
    CHECK(one.totals == again.totals);
    auto paths = sample_paths(b.law, 99, 2000, 2);
    CHECK(total_reward_samples(paths, b.rewards, 99).totals == one.totals);
    auto other = sample_totals(b.law, b.rewards, 100, 2000, 1);
    CHECK(other.totals != one.totals);
    CHECK_THROWS_AS(sample_paths(b.law, 1, 0), DomainError);
}

TEST_CASE("point-mass chain gives identical paths") {
    auto g = std::make_shared<const StateGrid>(std::vector<double>{0, 1, 2});
    auto k = std::make_shared<const StochasticKernel>(g, std::vector<double>{0, 1, 0, 0, 0, 1, 1, 0, 0});
    ChainLaw law({0, 0, 1}, KernelSequence(g, 5, 0, {k, k, k, k}));
    auto paths = sample_paths(law, 3, 50);
    for (const auto& p : paths) CHECK(p == std::vector<std::size_t>{2, 0, 1, 2, 0});
}

TEST_CASE("path frequencies match enumerated probabilities") {
    auto b = random_instance(12, 2, 3, 0);
    const std::size_t N = 100000;
    auto paths = sample_paths(b.law, 4, N);
    std::map<std::vector<std::size_t>, double> freq;
    for (const auto& p : paths) freq[p] += 1.0;
    oracle::enumerate_paths(b.law, [&](const std::vector<std::size_t>& p, double w) {
        double sd = std::sqrt(w * (1.0 - w) / static_cast<double>(N));
        CHECK(std::abs(freq[p] / static_cast<double>(N) - w) <= 4.0 * sd);
    });
}

TEST_CASE("zero rewards and parity totals") {
    auto b = random_instance(2, 3, 6, 1);
    auto zero = std::make_shared<const std::vector<double>>(9, 0.0);
    RewardFunctionArray f(3, 6, 1, std::vector<Tensor>(6, zero));
    for (double t : sample_totals(b.law, f, 1, 200).totals) CHECK(t == 0.0);

    auto even = parity_counterexample(10, {0.0, 0.3, 1.0});
    for (double t : sample_totals(even.law, even.rewards, 7, 500).totals) CHECK(t == 0.0);
}

TEST_CASE("sample mean within four standard errors of the exact mean") {
    InventoryModel model(0.1, 0.2, 0.9, DemandModel::uniform(1.0));
    auto sol = solve_base_stock(model, 50);
    auto chain = build_inventory_chain(model, sol, 50);
    auto exact = moments_exact(chain.law, chain.rewards);
    auto batch = sample_totals(chain.law, chain.rewards, 17, 10000);
    auto rep = normality_report(batch, std::nullopt, 1.0, 1.0);
    CHECK(std::abs(rep.sample_mean - exact.mean) <= 4.0 * std::sqrt(rep.sample_var / 10000.0));
    CHECK_FALSE(rep.standardized_by_exact);
}

TEST_CASE("normal cdf accuracy") {
    CHECK(normal_cdf(0.0) == 0.5);
    CHECK(std::abs(normal_cdf(1.959963984540054) - 0.975) <= 1e-12);
    CHECK(std::abs(normal_cdf(-1.0) - 0.15865525393145707) <= 1e-12);
    double prev = 0.0;
    for (int a = 0; a <= 10000; ++a) {
        double x = -8.0 + 16.0 * a / 10000.0;
        double p = normal_cdf(x);
        CHECK(std::abs(p + normal_cdf(-x) - 1.0) <= 1e-12);
        CHECK(p >= prev);
        prev = p;
    }
}

TEST_CASE("KS distance diagnostics") {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> z;
    std::vector<double> normal(100000);
    for (auto& v : normal) v = z(rng);
    CHECK(ks_distance_normal(normal) < 0.01);

    // Standardized uniform: sup |F_U - Phi| is about 0.0571.
    std::vector<double> uni(100000);
    for (std::size_t a = 0; a < uni.size(); ++a)
        uni[a] = (static_cast<double>(a) + 0.5) / static_cast<double>(uni.size()) * std::sqrt(12.0) - std::sqrt(3.0);
    double d = ks_distance_normal(uni);
    CHECK(d >= 0.04);
    CHECK(d == doctest::Approx(0.0571).epsilon(0.02));
    CHECK(ks_distance_normal({0.0}) == 0.5);
}

TEST_CASE("normality report") {
    auto odd = parity_counterexample(11, {0.0, 1.0});
    auto batch = sample_totals(odd.law, odd.rewards, 5, 1000);
    auto rep = normality_report(batch, moments_exact(odd.law, odd.rewards), 0.5, 1.0);
    CHECK_FALSE(rep.degenerate);
    REQUIRE(rep.ks_distance.has_value());
    CHECK(*rep.ks_distance > 0.2);
    CHECK(rep.condition_ratio == doctest::Approx(1.0));

    auto even = parity_counterexample(10, {0.0, 1.0});
    auto eb = sample_totals(even.law, even.rewards, 5, 1000);
    auto er = normality_report(eb, moments_exact(even.law, even.rewards), 0.5, 1.0);
    CHECK(er.degenerate);
    CHECK_FALSE(er.ks_distance.has_value());
    CHECK(std::isinf(er.condition_ratio));
    CHECK(to_json(er).at("ks").is_null());

    SampleBatch small;
    small.totals.assign(99, 1.0);
    CHECK_THROWS_AS(normality_report(small, std::nullopt, 1.0, 1.0), DomainError);
}

TEST_CASE("condition report verdicts") {
    auto good = clt_condition_report({{100, 1.0, 0.5, 10.0, 0}, {200, 1.0, 0.5, 20.0, 0}, {400, 1.0, 0.5, 40.0, 0}});
    CHECK(good.pass);
    CHECK(good.slope == doctest::Approx(-1.0));
    auto flat = clt_condition_report({{11, 1.0, 1.0, 0.25, 0}, {21, 1.0, 1.0, 0.25, 0}});
    CHECK_FALSE(flat.pass);
    auto zero = clt_condition_report({{10, 1.0, 1.0, 0.0, 0}, {20, 1.0, 1.0, 0.25, 0}});
    CHECK_FALSE(zero.finite);
    CHECK_FALSE(zero.pass);
}

TEST_CASE("worker count from the environment") {
    CHECK(resolve_workers(3) == 3);
    setenv(kWorkersEnv, "5", 1);
    CHECK(resolve_workers(0) == 5);
    CHECK(resolve_workers(2) == 2);
    unsetenv(kWorkersEnv);
    CHECK(resolve_workers(0) >= 1);
}

TEST_CASE("csv exports") {
    SampleBatch b;
    b.totals = {1.5, -2.0};
    CHECK(totals_csv(b) == "path,total\n0,1.5\n1,-2\n");
    auto h = histogram_csv({0.0, 0.1, -0.1}, 8);
    CHECK(std::count(h.begin(), h.end(), '\n') == 9);
}
