#include <doctest.h>

#include <numeric>

#include "nhclt/inventory.hpp"
#include "oracles.hpp"

using namespace nhclt;

namespace {

InventoryModel reference_model(double h = 1.0 / 400.0) {
    return InventoryModel(0.1, 0.2, 0.9, DemandModel::uniform(1.0), h);
}

}  // namespace

TEST_CASE("demand models") {
    auto u = DemandModel::uniform(2.0);
    CHECK(u.cdf(1.0) == doctest::Approx(0.5));
    CHECK(u.quantile(0.25) == doctest::Approx(0.5));
    auto b = DemandModel::beta(2.0, 3.0, 1.0);
    for (double p : {0.1, 0.5, 0.727, 0.9}) {
        double ref = oracle::bisect_quantile([&](double w) { return b.cdf(w); }, p, 0.0, 1.0);
        CHECK(b.quantile(p) == doctest::Approx(ref).epsilon(1e-9));
    }
    auto e = DemandModel::truncated_exponential(2.0, 1.0);
    CHECK(e.cdf(1.0) == doctest::Approx(1.0));
    CHECK(e.pdf(0.0) == doctest::Approx(2.0 / (1.0 - std::exp(-2.0))));
    auto t = DemandModel::table({0.25, 0.75}, 1.0);
    CHECK(t.cdf(0.5) == doctest::Approx(0.25));
    CHECK(t.pdf(0.75) == doctest::Approx(1.5));
    CHECK_THROWS_AS(DemandModel::beta(0.5, 2.0, 1.0), DomainError);
    CHECK_THROWS_AS(DemandModel::table({0.5, 0.6}, 1.0), DomainError);
    auto back = DemandModel::from_json(b.to_json());
    CHECK(back.cdf(0.3) == b.cdf(0.3));
}

TEST_CASE("model invariants") {
    CHECK_THROWS_AS(InventoryModel(0.9, 0.2, 0.9, DemandModel::uniform(1.0)), DomainError);
    CHECK_THROWS_AS(InventoryModel(0.1, 0.0, 0.9, DemandModel::uniform(1.0)), DomainError);
    CHECK(InventoryModel(0.1, 0.2, 0.9, DemandModel::uniform(1.0)).h == doctest::Approx(1.0 / 400.0));
}

TEST_CASE("lattice demand splits cell mass between end points") {
    auto pmf = lattice_demand(DemandModel::uniform(1.0), 0.25);
    REQUIRE(pmf.size() == 5);
    CHECK(pmf[0] == doctest::Approx(0.125));
    CHECK(pmf[2] == doctest::Approx(0.25));
    CHECK(pmf[4] == doctest::Approx(0.125));
    auto pb = lattice_demand(DemandModel::beta(2.0, 2.0, 1.0), 0.01);
    CHECK(std::accumulate(pb.begin(), pb.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("single-period level minimizes the newsvendor cost") {
    // G(y) = c y + c_h y^2/2 + c_p (1-y)^2/2 for uniform demand; brute-force minimizer on a fine scan.
    auto model = reference_model();
    double best = 0.0, best_val = 1e300;
    for (int a = 0; a <= 100000; ++a) {
        double y = a / 100000.0;
        double g = 0.1 * y + 0.2 * y * y / 2.0 + 0.9 * (1.0 - y) * (1.0 - y) / 2.0;
        if (g < best_val) best_val = g, best = y;
    }
    auto sol = solve_base_stock(model, 5);
    CHECK(std::abs(sol.levels[0] - best) <= 2.0 * model.h);
    CHECK(model.s1_quantile() == doctest::Approx(8.0 / 11.0));
    CHECK(model.s_inf_quantile() == doctest::Approx(9.0 / 11.0));
}

TEST_CASE("base-stock structure for the reference model") {
    auto model = reference_model();
    auto sol = solve_base_stock(model, 200);
    auto chain = build_inventory_chain(model, sol, 200);
    auto st = inventory_structure_check(model, sol, chain);
    CHECK(st.pass);
    CHECK(std::abs(st.s1 - 0.72727) <= 2.0 * model.h);
    CHECK(st.sn <= 0.81818 + 2.0 * model.h);
    CHECK(st.monotone);
    CHECK(sol.level_at_period(200) == sol.levels[0]);
    CHECK(sol.level_at_period(1) == sol.levels[199]);
    auto csv = sol.levels_csv();
    CHECK(csv.rfind("k,s_k\n1,", 0) == 0);
}

TEST_CASE("expected cost from the chain equals the dynamic program value") {
    auto model = reference_model(1.0 / 100.0);
    for (std::size_t n : {1u, 3u, 8u}) {
        auto sol = solve_base_stock(model, n);
        for (double x0 : {0.0, 0.3}) {
            auto chain = build_inventory_chain(model, sol, n, x0);
            double mean = moments_exact(chain.law, chain.rewards).mean;
            CHECK(mean == doctest::Approx(sol.value(n, x0)).epsilon(1e-10));
        }
    }
}

TEST_CASE("typical class") {
    CHECK(typical_class_check(DemandModel::uniform(1.0), {0.1, 0.5}, 0.01).is_typical);
    CHECK(typical_class_check(DemandModel::beta(2.0, 5.0, 1.0), {0.05, 0.2, 0.6}, 0.005).is_typical);
    auto bimodal = DemandModel::table({0.4, 0.1, 0.1, 0.4}, 1.0);
    auto cert = typical_class_check(bimodal, {0.25}, 0.01);
    CHECK_FALSE(cert.is_typical);
    CHECK(cert.failing_eps.size() == 1);
}

TEST_CASE("alpha certificate and bivariate degeneracy") {
    auto model = reference_model();
    auto sol = solve_base_stock(model, 30);
    auto chain = build_inventory_chain(model, sol, 30);
    auto ac = inventory_alpha_certificate(model, chain);
    CHECK(ac.pass);
    CHECK(ac.bound == doctest::Approx(0.2 / 1.1));
    CHECK(ac.alpha_n >= 0.18182 - 2.0 * model.h);
    auto bv = bivariate_degeneracy_demo(chain);
    CHECK(bv.pass);
    CHECK(bv.alpha_hat == 0.0);
    CHECK(bv.rho_hat == 1.0);
    CHECK(bv.delta_hat == 1.0);
}

TEST_CASE("dense bivariate kernel on a coarse lattice") {
    auto model = InventoryModel(0.1, 0.2, 0.9, DemandModel::uniform(1.0), 0.25);
    auto sol = solve_base_stock(model, 4);
    auto chain = build_inventory_chain(model, sol, 4);
    auto k = bivariate_kernel(chain.law.seq(), 1);
    CHECK(dobrushin_delta(k) == 1.0);
}

TEST_CASE("closed-form beta for uniform demand") {
    // For uniform demand both Psi differences equal s1/3, so beta = s1^4 / 81.
    auto model = reference_model();
    double s1 = 8.0 / 11.0;
    CHECK(inventory_beta(model) == doctest::Approx(std::pow(s1, 4) / 81.0).epsilon(1e-9));
}

TEST_CASE("variance growth") {
    auto rep = inventory_variance_growth(reference_model(), {10, 20, 40});
    CHECK(rep.doubling_ok);
    CHECK(rep.rigorous_bound_holds);
    CHECK(rep.pass);
    for (double r : rep.doubling_ratio) CHECK((r >= 1.5 && r <= 2.5));
    // The displayed beta exceeds the per-period variance of this model (see README).
    CHECK_FALSE(rep.beta_bound_holds);
}
