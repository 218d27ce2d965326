#pragma once

#include <string>

#include <json.hpp>

#include "nhclt/kernel.hpp"

namespace nhclt {

/// {grid: [...], m, n, kernels: [[row-major entries], ...]}
nlohmann::json kernel_sequence_to_json(const KernelSequence& seq);
KernelSequence kernel_sequence_from_json(const nlohmann::json& doc);

/// Serializes with every double written in round-trip (shortest exact) form.
std::string dump_json(const nlohmann::json& doc, int indent = 2);

}  // namespace nhclt
