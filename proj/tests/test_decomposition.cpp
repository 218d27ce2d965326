#include <doctest.h>

#include "nhclt/decomposition.hpp"
#include "nhclt/reference_models.hpp"
#include "nhclt/rng.hpp"
#include "oracles.hpp"

using namespace nhclt;

namespace {

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("exact moments and E[d^2] agree with path enumeration") {
    for (std::size_t m : {0u, 1u})
        for (std::size_t states : {2u, 3u})
            for (std::size_t n = 1; n + m <= 5; ++n) {
                auto b = random_instance(substream_seed(500 + m, states * 10 + n), states, n, m);
                auto rep = decompose(b.law, b.rewards);
                auto mom = moments_exact(b.law, b.rewards);
                auto ref = oracle::enumerate_moments(b.law, b.rewards);
                CHECK(close(mom.mean, ref.mean, 1e-12));
                CHECK(close(mom.variance, ref.variance, 1e-12));
                CHECK(close(rep.var_Sn, ref.variance, 1e-12));

                auto paths = oracle::doob_paths(b.law, b.rewards);
                for (std::size_t i = 1 + m; i <= n + m; ++i) {
                    double e = 0.0;
                    for (const auto& p : paths) {
                        double d = p.doob[i] - p.doob[i - 1];
                        e += p.p * d * d;
                        double engine = mds_value(rep, i, i >= 2 ? p.path[i - 2] : 0, p.path[i - 1]);
                        CHECK(std::abs(engine - d) <= 1e-10);
                    }
                    CHECK(close(rep.d_second_moments[i - 1 - m], e, 1e-12));
                }
                for (const auto& p : paths) CHECK(std::abs(pathwise_residual(rep, p.path)) <= 1e-10);
            }
}

TEST_CASE("variance identity and sandwich") {
    for (std::uint64_t s = 0; s < 10; ++s) {
        auto b = random_instance(substream_seed(3, s), 3, 8, s % 2);
        auto rep = decompose(b.law, b.rewards);
        auto vi = variance_identity_check(rep);
        CHECK(vi.pass);
        CHECK(vi.sandwich.pass);
        CHECK(rep.max_conditional_mean <= kConditionalMeanTolerance);
        CHECK(delta_n_l2_check(rep).pass);
    }
}

TEST_CASE("m = 0 variance lower bound") {
    for (std::uint64_t s = 0; s < 20; ++s) {
        auto b = random_instance(substream_seed(4, s), 4, 10, 0);
        CHECK(dobrushin_lower_bound_check(b.law, b.rewards).pass);
    }
    auto b1 = random_instance(1, 3, 5, 1);
    CHECK_THROWS_AS(dobrushin_lower_bound_check(b1.law, b1.rewards), DomainError);
}

TEST_CASE("state functional variance matches enumeration") {
    auto b = random_instance(17, 3, 4, 0);
    std::vector<std::pair<std::size_t, std::vector<double>>> terms = {{1, {1.0, -2.0, 0.5}}, {3, {0.0, 1.0, 4.0}}};
    double e1 = 0.0, e2 = 0.0;
    oracle::enumerate_paths(b.law, [&](const std::vector<std::size_t>& p, double w) {
        double v = terms[0].second[p[0]] + terms[1].second[p[2]];
        e1 += w * v;
        e2 += w * v * v;
    });
    CHECK(close(state_functional_variance(b.law, terms), e2 - e1 * e1, 1e-12));
}

TEST_CASE("inequality suite on random instances") {
    for (std::uint64_t s = 0; s < 6; ++s) {
        auto b = random_instance(substream_seed(8, s), 3, 7, s % 2);
        auto suite = oscillation_bound_suite(b.law, b.rewards);
        CHECK(suite.pass);
        for (const auto& c : suite.checks) {
            INFO(c.name);
            CHECK(c.pass);
            bool window_only = c.name.rfind("cross_moment_range", 0) == 0 && c.name != "cross_moment_range4";
            if (s % 2 == 1 || !window_only) CHECK(c.instances > 0);
        }
    }
}

TEST_CASE("window blowup for m > 1") {
    auto g = std::make_shared<const StateGrid>(std::vector<double>{0.0, 1.0});
    auto k = std::make_shared<const StochasticKernel>(g, std::vector<double>{0.5, 0.5, 0.5, 0.5});
    KernelSequence seq(g, 2, 2, {k, k, k});
    ChainLaw law({0.5, 0.5}, seq);
    auto t = std::make_shared<const std::vector<double>>(8, 1.0);
    RewardFunctionArray f(2, 2, 2, {t, t});
    CHECK_THROWS_AS(decompose(law, f), WindowBlowupError);
    CHECK_THROWS_AS(moments_exact(law, f), WindowBlowupError);
}

TEST_CASE("centering and constant bound") {
    auto b = random_instance(23, 3, 5, 1, 2.0);
    auto c = center_rewards(b.law, b.rewards);
    for (double mu : reward_means(b.law, c)) CHECK(std::abs(mu) <= 1e-14);
    CHECK(b.rewards.bound() <= 2.0);
    auto rep = decompose(b.law, b.rewards);
    CHECK(rep.C_n == c.bound());
}

TEST_CASE("report exports") {
    auto b = random_instance(31, 2, 4, 1);
    auto rep = decompose(b.law, b.rewards);
    auto j = to_json(rep);
    CHECK(j.at("n") == 4);
    CHECK(j.at("V").size() == rep.V.size());
    auto csv = decomposition_csv(rep);
    CHECK(csv.rfind("i,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + static_cast<long>(rep.d_second_moments.size()));
}
