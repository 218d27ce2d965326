#include "nhclt/reference_models.hpp"

#include <cmath>
#include <string>

#include "nhclt/kernel_io.hpp"
#include "nhclt/rng.hpp"

namespace nhclt {

namespace {

// Flat Dirichlet(1, ..., 1) via normalized exponentials.
std::vector<double> dirichlet(std::mt19937_64& rng, std::size_t k) {
    std::vector<double> w(k);
    double s = 0.0;
    for (auto& v : w) {
        v = -std::log1p(-uniform01(rng));
        s += v;
    }
    for (auto& v : w) v /= s;
    return w;
}

StochasticKernel kernel_from_rng(std::mt19937_64& rng, const GridPtr& grid, double floor) {
    std::size_t s = grid->size();
    double free = 1.0 - floor * static_cast<double>(s);
    if (!(floor >= 0.0) || free <= 0.0) throw DomainError("kernel floor times grid size must be below 1");
    std::vector<double> p(s * s);
    for (std::size_t x = 0; x < s; ++x) {
        auto w = dirichlet(rng, s);
        double sum = 0.0;
        for (std::size_t y = 0; y < s; ++y) {
            p[x * s + y] = floor + free * w[y];
            sum += p[x * s + y];
        }
        for (std::size_t y = 0; y < s; ++y) p[x * s + y] /= sum;
    }
    return StochasticKernel(grid, std::move(p));
}

}  // namespace

InstanceBundle parity_counterexample(std::size_t n, const std::vector<double>& grid_points,
                                     std::vector<double> probs) {
    if (grid_points.size() < 2) throw DomainError("parity counterexample needs a grid with at least 2 points");
    auto grid = std::make_shared<const StateGrid>(grid_points);
    std::size_t s = grid->size();
    if (probs.empty()) probs.assign(s, 1.0 / static_cast<double>(s));
    if (probs.size() != s) throw DomainError("distribution length must equal grid length");
    double mean = 0.0, second = 0.0;
    for (std::size_t x = 0; x < s; ++x) {
        mean += probs[x] * grid_points[x];
        second += probs[x] * grid_points[x] * grid_points[x];
    }
    if (!(second - mean * mean > 0.0)) throw DomainError("parity counterexample needs a law with positive variance");

    std::vector<double> rows(s * s);
    for (std::size_t x = 0; x < s; ++x)
        for (std::size_t y = 0; y < s; ++y) rows[x * s + y] = probs[y];
    auto k = std::make_shared<const StochasticKernel>(grid, std::move(rows));
    KernelSequence seq(grid, n, 1, std::vector<KernelPtr>(n, k));

    auto even = std::make_shared<std::vector<double>>(s * s);
    auto odd = std::make_shared<std::vector<double>>(s * s);
    for (std::size_t x = 0; x < s; ++x)
        for (std::size_t y = 0; y < s; ++y) {
            (*even)[x * s + y] = grid_points[x];
            (*odd)[x * s + y] = -grid_points[y];
        }
    std::vector<Tensor> tensors(n);
    for (std::size_t i = 1; i <= n; ++i) tensors[i - 1] = (i % 2 == 0) ? Tensor(even) : Tensor(odd);
    return InstanceBundle{ChainLaw(probs, std::move(seq)), RewardFunctionArray(s, n, 1, std::move(tensors)),
                          "counterexample"};
}

StochasticKernel random_kernel(std::uint64_t seed, const GridPtr& grid, double floor) {
    std::mt19937_64 rng(splitmix64(seed));
    return kernel_from_rng(rng, grid, floor);
}

InstanceBundle random_instance(std::uint64_t seed, std::size_t states, std::size_t n, std::size_t m,
                               double reward_scale) {
    if (states < 2) throw DomainError("random instance needs at least 2 states");
    if (m > 1) throw DomainError("random instances support m in {0, 1}");
    if (!(reward_scale >= 0.0) || !std::isfinite(reward_scale)) throw DomainError("reward scale must be finite and >= 0");
    std::mt19937_64 rng(splitmix64(seed));
    auto grid = std::make_shared<const StateGrid>(StateGrid::uniform(0.0, 1.0, states));
    std::vector<KernelPtr> kernels;
    for (std::size_t i = 0; i + 1 < n + m; ++i)
        kernels.push_back(std::make_shared<const StochasticKernel>(kernel_from_rng(rng, grid, kRandomKernelFloor)));
    auto initial = dirichlet(rng, states);
    std::size_t cells = m == 0 ? states : states * states;
    std::vector<Tensor> tensors;
    for (std::size_t i = 0; i < n; ++i) {
        auto t = std::make_shared<std::vector<double>>(cells);
        for (auto& v : *t) v = reward_scale * (2.0 * uniform01(rng) - 1.0);
        tensors.push_back(std::move(t));
    }
    return InstanceBundle{ChainLaw(std::move(initial), KernelSequence(grid, n, m, std::move(kernels))),
                          RewardFunctionArray(states, n, m, std::move(tensors)),
                          "random(" + std::to_string(seed) + ")"};
}

nlohmann::json bundle_to_json(const InstanceBundle& b) {
    nlohmann::json doc = kernel_sequence_to_json(b.law.seq());
    doc["initial"] = b.law.initial();
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& t : b.rewards.tensors()) tensors.push_back(*t);
    doc["rewards"] = {{"tensors", std::move(tensors)}, {"offsets", b.rewards.offsets()}};
    doc["provenance"] = b.provenance;
    return doc;
}

InstanceBundle bundle_from_json(const nlohmann::json& doc) {
    auto seq = kernel_sequence_from_json(doc);
    for (const char* key : {"initial", "rewards"})
        if (!doc.contains(key)) throw DomainError(std::string("bundle document missing field '") + key + "'");
    std::size_t s = seq.grid()->size(), n = seq.horizon(), m = seq.lookahead();
    std::vector<Tensor> tensors;
    for (const auto& t : doc.at("rewards").at("tensors"))
        tensors.push_back(std::make_shared<const std::vector<double>>(t.get<std::vector<double>>()));
    std::vector<double> offsets;
    if (doc.at("rewards").contains("offsets")) offsets = doc.at("rewards").at("offsets").get<std::vector<double>>();
    ChainLaw law(doc.at("initial").get<std::vector<double>>(), std::move(seq));
    return InstanceBundle{std::move(law), RewardFunctionArray(s, n, m, std::move(tensors), std::move(offsets)),
                          doc.value("provenance", std::string("file"))};
}

}  // namespace nhclt
