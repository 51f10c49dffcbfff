#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gplm/model/network.hpp"
#include "gplm/model/panel.hpp"
#include "gplm/optim/optim.hpp"

namespace gplm::io {

// Versioned fitted-model bundle. Doubles are serialized in shortest
// round-trip form, so save -> load -> save is byte-stable.
struct ModelArtifact {
    static constexpr int kFormatVersion = 1;

    model::OutcomeFamily family;
    model::NetworkTopology topology;
    std::optional<model::DropoutSpec> dropout;
    std::vector<std::string> provider_ids;  // dense index order
    model::NetworkParams params;

    struct Training {
        std::string algorithm = "amsgrad";
        std::string sampling = "stratified";
        double train_fraction = 0.8;
        double batch_fraction = 0.1;
        double learning_rate = 1e-3;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double rms_beta = 0.9;
        double epsilon = 1e-8;
        std::uint64_t patience = 5;
        std::uint64_t max_iterations = 10000;
        std::uint64_t validate_every = 1;
        std::uint64_t seed = 0;
        std::uint64_t iterations = 0;
        double validation_loss = 0.0;
        std::string config_hash;
    } training;
};

void save_artifact(const ModelArtifact& artifact, const std::filesystem::path& path);
ModelArtifact load_artifact(const std::filesystem::path& path);

std::string config_hash(const optim::TrainConfig& config);

}  // namespace gplm::io
