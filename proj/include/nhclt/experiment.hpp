#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace nhclt {

enum class ExperimentKind { Coeff, Decompose, Inventory, AltSub, Clt, Counterexample };

inline constexpr const char* kAllowedKinds = "coeff, decompose, inventory, altsub, clt, counterexample";

std::string kind_name(ExperimentKind k);
std::optional<ExperimentKind> kind_from_name(const std::string& s);

/// Exit codes of run_experiment and the CLI.
enum ExitCode : int { kExitPass = 0, kExitCertificateFail = 1, kExitConfigError = 2, kExitRuntimeError = 3 };

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::Coeff;
    nlohmann::json original;  // the document as given
    nlohmann::json resolved;  // with defaults applied and overrides merged
    std::uint64_t seed = 1;
    std::size_t workers = 0;  // 0: NHCLT_WORKERS or hardware concurrency; never written to reports
    std::filesystem::path out_dir;
};

struct ConfigParse {
    std::optional<ExperimentConfig> config;
    std::vector<std::string> errors;  // every violation found, not just the first
};

/// Parses and validates JSON text; `kind_override` (from the CLI subcommand) must agree with
/// a "kind" field when both are present. `seed_override` replaces the config seed.
ConfigParse parse_config(const std::string& text, std::optional<std::string> kind_override = std::nullopt,
                         std::optional<std::uint64_t> seed_override = std::nullopt);

struct ExperimentResult {
    int exit_code = kExitPass;
    nlohmann::json report;
    std::vector<std::string> files;  // written, relative to out_dir
    std::string summary;             // human-readable, one line per certificate
};

/// Runs the experiment and writes report.json (+ CSV series) atomically into out_dir.
/// Numerical or domain failures give kExitRuntimeError with an error report.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Writes `text` to `path` through a temporary file and rename.
void write_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace nhclt
