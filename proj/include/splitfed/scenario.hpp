#pragma once

// Scenario files: flat `key = value` text, one pair per line, `#` starts a
// comment. A scenario gives either the raw symbols (K, N, p, q, eta) or a
// model (layer widths + cut index) plus K and p, never both.
//
//   name = golden
//   layers = 4,3,2
//   cut = 1
//   clients = 2
//   dataset_size = 6
//   grid.clients = 1:100:x10     # optional sweep axis

#include "splitfed/cost_model.hpp"
#include "splitfed/nn.hpp"
#include "splitfed/protocol.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace splitfed::scenario {

struct ModelForm {
    nn::ModelSpec spec;
    nn::CutPoint cut;
};

struct ScenarioFile {
    std::string name = "scenario";
    cost::ScenarioParams params;          // raw, or derived from `model`
    std::optional<ModelForm> model;
    std::string variant = "sync";         // sync | nosync | sync-batch
    std::uint64_t seed = 0;
    double lr = 0.01;
    std::optional<sim::MessageKind> inject_fault;   // test fixture hook for simulate

    std::optional<std::vector<std::uint64_t>> grid_clients;
    std::optional<std::vector<std::uint64_t>> grid_model_params;
    std::optional<std::vector<std::uint64_t>> grid_dataset_size;
    std::optional<std::vector<std::uint64_t>> grid_smashed_size;
    std::optional<std::vector<cost::ClientFraction>> grid_client_fraction;

    bool has_grid() const;
    /// Grid axes, falling back to the scenario's single value per axis.
    cost::SweepGrid grid() const;
};
/// Throws ConfigError on syntax or form errors and DomainError when a
/// value is out of range (K = 0, eta > 1, a cut outside the model).
/// model-derived form is invalid (e.g. a cut out of range).
ScenarioFile parse_scenario(std::string_view text);
ScenarioFile load_scenario(const std::filesystem::path& path);

/// Value lists: "1,10,100", an arithmetic range "A:B:STEP" or a geometric
/// range "A:B:xFACTOR" (both inclusive of B when hit). Throws InvalidParam.
std::vector<std::uint64_t> parse_range(std::string_view text);

/// Built-in suites: "smartwatch", "hospital", "biobank" (use cases with
/// parameters picked inside the ranges the use cases describe) and
/// "golden" plus the "small" suite (model-derived scenarios small enough
/// to simulate). A case name such as "hospital-case-3" selects a single
/// scenario. Throws ConfigError.
std::vector<ScenarioFile> builtin(std::string_view name);
std::vector<std::string> builtin_names();

} // namespace splitfed::scenario
