#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "nhclt/decomposition.hpp"

namespace nhclt {

struct InstanceBundle {
    ChainLaw law;
    RewardFunctionArray rewards;
    std::string provenance;  // "counterexample" or "random(<seed>)"
};

/// I.i.d. chain with law `probs` on `grid` (uniform when probs is empty), m = 1,
/// f_i(x, y) = x for even i and -y for odd i.
InstanceBundle parity_counterexample(std::size_t n, const std::vector<double>& grid,
                                     std::vector<double> probs = {});

/// Entry floor of random kernels.
inline constexpr double kRandomKernelFloor = 0.05;

/// Kernels with every entry >= kRandomKernelFloor, Dirichlet initial law,
/// rewards uniform in [-reward_scale, reward_scale]. Grid is 0..states-1.
InstanceBundle random_instance(std::uint64_t seed, std::size_t states, std::size_t n, std::size_t m,
                               double reward_scale = 1.0);

/// Random kernel on `grid` with entries >= floor (floor * size < 1).
StochasticKernel random_kernel(std::uint64_t seed, const GridPtr& grid, double floor = kRandomKernelFloor);

nlohmann::json bundle_to_json(const InstanceBundle& b);
InstanceBundle bundle_from_json(const nlohmann::json& doc);

}  // namespace nhclt
