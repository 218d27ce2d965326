#include "nhclt/altsub.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace nhclt {

std::string AltSubSolution::thresholds_csv(std::size_t k_max) const {
    std::ostringstream out;
    out.precision(17);
    out << "k,x,g_k\n";
    for (std::size_t k = 1; k <= std::min(k_max, n); ++k)
        for (std::size_t j = 0; j <= G; ++j)
            out << k << ',' << static_cast<double>(j) / static_cast<double>(G) << ',' << g(k, j) << '\n';
    return out.str();
}

ThresholdPropertyReport altsub_threshold_properties(const AltSubSolution& sol, std::size_t k_identity) {
    ThresholdPropertyReport r;
    const std::size_t G = sol.G;
    const double step = sol.step();
    // First grid index with x_j >= 1/3.
    std::size_t third = (G + 2) / 3;
    for (std::size_t k = 1; k <= sol.n; ++k) {
        const auto& t = sol.threshold[k - 1];
        for (std::size_t j = third; j <= G; ++j) {
            double err = std::abs(sol.g(k, j) - static_cast<double>(j) / static_cast<double>(G));
            r.identity_max_error = std::max(r.identity_max_error, err);
            if (k <= k_identity && t[j] != std::min(j, G)) r.identity_exact = false;
        }
        if (k >= 3)
            for (std::size_t j = 0; j <= G; ++j) r.min_threshold = std::min(r.min_threshold, sol.g(k, j));
        for (std::size_t j = 0; j <= G; ++j)
            if (sol.u[k][j] < sol.u[k - 1][j]) r.monotone_values = false;
        // Acceptance region must be {l >= t}.
        const auto& prev = sol.u[k - 1];
        for (std::size_t j = 0; j <= G && r.upper_sets; ++j)
            for (std::size_t l = std::max(t[j], j); l < G; ++l)
                if (1.0 + prev[sol.reflect(j, l)] < prev[j]) {
                    r.upper_sets = false;
                    break;
                }
    }
    r.lower_bound = sol.n < 3 || r.min_threshold >= 1.0 / 6.0 - 2.0 * step;
    r.pass = r.identity_exact && r.lower_bound && r.monotone_values && r.upper_sets;
    return r;
}

AltSubSolution solve_alt_thresholds(std::size_t n, std::size_t grid_points) {
    if (n < 1) throw DomainError("horizon must be at least 1");
    if (grid_points < 7) throw DomainError("alternating-subsequence grid needs at least 7 points");
    AltSubSolution sol;
    sol.n = n;
    sol.G = grid_points - 1;
    const std::size_t G = sol.G;
    const double cell = 1.0 / static_cast<double>(G);
    sol.u.assign(1, std::vector<double>(G + 1, 0.0));
    for (std::size_t k = 1; k <= n; ++k) {
        const auto& prev = sol.u[k - 1];
        std::vector<double> next(G + 1);
        std::vector<std::size_t> t(G + 1, G);
        for (std::size_t j = 0; j <= G; ++j) {
            // Cells l < j are infeasible (Y < x): the observation is rejected.
            double acc = static_cast<double>(j) * prev[j];
            bool found = false;
            for (std::size_t l = j; l < G; ++l) {
                double take = 1.0 + prev[sol.reflect(j, l)];
                if (!found && take >= prev[j]) {
                    t[j] = l;
                    found = true;
                }
                acc += std::max(prev[j], take);
            }
            next[j] = acc * cell;
        }
        sol.u.push_back(std::move(next));
        sol.threshold.push_back(std::move(t));
    }
    auto props = altsub_threshold_properties(sol, n);
    double step = sol.step();
    if (props.identity_max_error > 2.0 * step || !props.lower_bound || !props.upper_sets)
        throw DomainError("threshold reconstruction violates a structural property (identity error " +
                          std::to_string(props.identity_max_error) + ", min threshold " +
                          std::to_string(props.min_threshold) + ")");
    return sol;
}

AltSubChain build_altsub_chain(const AltSubSolution& sol, std::size_t n) {
    if (n < 1 || n > sol.n) throw DomainError("chain horizon must not exceed the solved horizon");
    const std::size_t G = sol.G;
    const std::size_t S = G + 1;
    const double cell = 1.0 / static_cast<double>(G);
    auto grid = std::make_shared<const StateGrid>(StateGrid::uniform(0.0, cell, S));
    std::map<std::vector<std::size_t>, KernelPtr> by_value;
    std::vector<KernelPtr> kernels;
    std::vector<const std::vector<std::size_t>*> thr;
    for (std::size_t i = 1; i <= n; ++i) {
        const auto& t = sol.threshold[n - i];
        auto it = by_value.find(t);
        if (it == by_value.end()) {
            std::vector<double> rows(S * S, 0.0);
            for (std::size_t j = 0; j < S; ++j) {
                rows[j * S + j] += static_cast<double>(t[j]) * cell;
                for (std::size_t l = t[j]; l < G; ++l) rows[j * S + sol.reflect(j, l)] += cell;
            }
            it = by_value.emplace(t, std::make_shared<const StochasticKernel>(grid, std::move(rows))).first;
        }
        kernels.push_back(it->second);
        thr.push_back(&t);
    }
    std::vector<double> initial(S, 0.0);
    initial[0] = 1.0;
    auto f = std::make_shared<std::vector<double>>(S * S, 1.0);
    for (std::size_t j = 0; j < S; ++j) (*f)[j * S + j] = 0.0;
    return AltSubChain{ChainLaw(std::move(initial), KernelSequence(grid, n, 1, std::move(kernels))),
                       RewardFunctionArray(S, n, 1, std::vector<Tensor>(n, f)), std::move(thr)};
}

AltSubAlphaCertificate altsub_alpha_certificate(const AltSubChain& chain, double step) {
    AltSubAlphaCertificate cert;
    const auto& seq = chain.law.seq();
    const std::size_t n = seq.horizon();
    cert.tolerance = 2.0 * step;
    auto mu = marginals(chain.law);
    auto support = support_masks(mu);
    const auto& grid = *chain.law.grid();
    for (std::size_t t = 1; t + 2 <= n; ++t)
        for (std::size_t x = 0; x < grid.size(); ++x)
            if (support[t - 1][x]) cert.max_reachable_state = std::max(cert.max_reachable_state, grid[x]);
    cert.steps = n >= 3 ? n - 3 : 0;
    std::map<std::pair<const StochasticKernel*, std::vector<char>>, double> cache;
    for (std::size_t i = 1; i <= cert.steps; ++i) {
        auto key = std::make_pair(seq.step_ptr(i).get(), support[i - 1]);
        auto it = cache.find(key);
        if (it == cache.end()) it = cache.emplace(key, dobrushin_delta(seq.step(i), support[i - 1])).first;
        cert.max_delta = std::max(cert.max_delta, it->second);
    }
    cert.alpha = 1.0 - cert.max_delta;
    cert.pass = cert.max_delta <= 5.0 / 6.0 + cert.tolerance && cert.alpha >= 1.0 / 6.0 - cert.tolerance &&
                cert.max_reachable_state <= 5.0 / 6.0 + cert.tolerance;
    return cert;
}

AltSubPathCount altsub_count_path(const AltSubSolution& sol, const AltSubChain& chain,
                                  const std::vector<std::size_t>& cells) {
    const std::size_t n = chain.law.horizon();
    if (cells.size() != n) throw DomainError("need one observation cell per period");
    AltSubPathCount out;
    std::size_t x = 0;
    std::vector<std::size_t> path{0};
    for (std::size_t i = 1; i <= n; ++i) {
        std::size_t l = cells[i - 1];
        const auto& t = *chain.thresholds[i - 1];
        if (l >= t[x]) {
            ++out.accepted;
            x = sol.reflect(x, l);
        }
        path.push_back(x);
    }
    for (std::size_t i = 1; i <= n; ++i) out.reward_sum += chain.rewards.at(i, path[i - 1], path[i]);
    return out;
}

}  // namespace nhclt
