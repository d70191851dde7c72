#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gpert/dataio.hpp"
#include "gpert/embedding.hpp"
#include "gpert/perturb.hpp"
#include "gpert/types.hpp"

namespace gpert {

inline constexpr std::string_view kToolVersion = "0.1.0";

// Test double for model inference: answers with the gold answer when a seeded
// coin (biased per condition) lands, otherwise echoes the prompt it was given.
// Emits responses for every item, condition, the original prompt (-1) and each
// perturbation index.
std::vector<ResponseRecord> stub_echo_responses(std::span<const QAItem> items,
                                                const std::map<std::string, PerturbationSet>& sets,
                                                std::span<const std::string> conditions, std::uint64_t seed,
                                                const std::string& model = "echo");

// Entry point of the gpert CLI; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace gpert
