#include "nhclt/kernel_io.hpp"

#include <map>

namespace nhclt {

using nlohmann::json;

json kernel_sequence_to_json(const KernelSequence& seq) {
    json doc;
    doc["grid"] = seq.grid()->points();
    doc["m"] = seq.lookahead();
    doc["n"] = seq.horizon();
    json kernels = json::array();
    for (const auto& k : seq.kernels()) kernels.push_back(k->data());
    doc["kernels"] = std::move(kernels);
    return doc;
}

KernelSequence kernel_sequence_from_json(const json& doc) {
    for (const char* key : {"grid", "m", "n", "kernels"})
        if (!doc.contains(key)) throw DomainError(std::string("kernel document missing field '") + key + "'");
    auto grid = std::make_shared<const StateGrid>(doc.at("grid").get<std::vector<double>>());
    auto n = doc.at("n").get<std::size_t>();
    auto m = doc.at("m").get<std::size_t>();
    std::vector<KernelPtr> kernels;
    // Repeated matrices in the document are shared in memory.
    std::map<std::vector<double>, KernelPtr> seen;
    for (const auto& k : doc.at("kernels")) {
        auto data = k.get<std::vector<double>>();
        auto it = seen.find(data);
        if (it == seen.end()) {
            auto ptr = std::make_shared<const StochasticKernel>(grid, data);
            it = seen.emplace(std::move(data), std::move(ptr)).first;
        }
        kernels.push_back(it->second);
    }
    return KernelSequence(grid, n, m, std::move(kernels));
}

std::string dump_json(const json& doc, int indent) { return doc.dump(indent); }

}  // namespace nhclt
