#include "gplm/io/artifact.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gplm/io/csv.hpp"

namespace gplm::io {

using nlohmann::json;

namespace {

json topology_to_json(const model::NetworkTopology& t) {
    json j;
    j["layer_sizes"] = t.layer_sizes;
    std::vector<std::string> acts;
    for (auto a : t.activations) acts.push_back(model::to_string(a));
    j["activations"] = acts;
    return j;
}

model::NetworkTopology topology_from_json(const json& j) {
    model::NetworkTopology t;
    t.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    for (const auto& a : j.at("activations"))
        t.activations.push_back(model::activation_from_string(a.get<std::string>()));
    t.validate();
    return t;
}

}  // namespace

void save_artifact(const ModelArtifact& artifact, const std::filesystem::path& path) {
    json j;
    j["format_version"] = ModelArtifact::kFormatVersion;
    j["family"]["kind"] = model::to_string(artifact.family.kind);
    if (artifact.family.kind == model::Family::gaussian)
        j["family"]["sigma2_hat"] = artifact.family.sigma2_hat;
    j["topology"] = topology_to_json(artifact.topology);
    if (artifact.dropout)
        j["dropout"]["retention_prob"] = artifact.dropout->retention_prob;
    j["provider_ids"] = artifact.provider_ids;

    const auto& params = artifact.params;
    j["params"]["gamma"] =
        std::vector<double>(params.gamma().begin(), params.gamma().end());
    json weights = json::array();
    json biases = json::array();
    const auto& sizes = artifact.topology.layer_sizes;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        weights.push_back(std::vector<double>(
            params.weight(l), params.weight(l) + sizes[l + 1] * sizes[l]));
        biases.push_back(
            std::vector<double>(params.bias(l), params.bias(l) + sizes[l + 1]));
    }
    j["params"]["weights"] = std::move(weights);
    j["params"]["biases"] = std::move(biases);

    const auto& tr = artifact.training;
    json t;
    t["algorithm"] = tr.algorithm;
    t["sampling"] = tr.sampling;
    t["train_fraction"] = tr.train_fraction;
    t["batch_fraction"] = tr.batch_fraction;
    t["learning_rate"] = tr.learning_rate;
    t["beta1"] = tr.beta1;
    t["beta2"] = tr.beta2;
    t["rms_beta"] = tr.rms_beta;
    t["epsilon"] = tr.epsilon;
    t["patience"] = tr.patience;
    t["max_iterations"] = tr.max_iterations;
    t["validate_every"] = tr.validate_every;
    t["seed"] = tr.seed;
    t["iterations"] = tr.iterations;
    t["validation_loss"] = tr.validation_loss;
    t["config_hash"] = tr.config_hash;
    j["training"] = std::move(t);

    atomic_write(path, j.dump(2) + "\n");
}

ModelArtifact load_artifact(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model artifact: " + path.string());
    json j;
    in >> j;

    if (j.at("format_version").get<int>() != ModelArtifact::kFormatVersion)
        throw std::runtime_error("unsupported model artifact version in " + path.string());

    ModelArtifact artifact;
    artifact.family.kind =
        model::family_from_string(j.at("family").at("kind").get<std::string>());
    if (j.at("family").contains("sigma2_hat"))
        artifact.family.sigma2_hat = j["family"]["sigma2_hat"].get<double>();
    artifact.topology = topology_from_json(j.at("topology"));
    if (j.contains("dropout"))
        artifact.dropout =
            model::DropoutSpec{j["dropout"].at("retention_prob").get<double>()};
    artifact.provider_ids = j.at("provider_ids").get<std::vector<std::string>>();

    artifact.params = model::NetworkParams(artifact.topology, artifact.provider_ids.size());
    const auto gamma = j.at("params").at("gamma").get<std::vector<double>>();
    if (gamma.size() != artifact.provider_ids.size())
        throw std::runtime_error("artifact gamma length does not match provider ids");
    std::copy(gamma.begin(), gamma.end(), artifact.params.gamma().begin());
    const auto& sizes = artifact.topology.layer_sizes;
    const auto& weights = j.at("params").at("weights");
    const auto& biases = j.at("params").at("biases");
    if (weights.size() != sizes.size() - 1 || biases.size() != sizes.size() - 1)
        throw std::runtime_error("artifact layer count mismatch");
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const auto w = weights[l].get<std::vector<double>>();
        const auto b = biases[l].get<std::vector<double>>();
        if (w.size() != sizes[l + 1] * sizes[l] || b.size() != sizes[l + 1])
            throw std::runtime_error("artifact layer shape mismatch at layer " +
                                     std::to_string(l));
        std::copy(w.begin(), w.end(), artifact.params.weight(l));
        std::copy(b.begin(), b.end(), artifact.params.bias(l));
    }

    const auto& t = j.at("training");
    auto& tr = artifact.training;
    tr.algorithm = t.at("algorithm").get<std::string>();
    tr.sampling = t.at("sampling").get<std::string>();
    tr.train_fraction = t.at("train_fraction").get<double>();
    tr.batch_fraction = t.at("batch_fraction").get<double>();
    tr.learning_rate = t.at("learning_rate").get<double>();
    tr.beta1 = t.at("beta1").get<double>();
    tr.beta2 = t.at("beta2").get<double>();
    tr.rms_beta = t.at("rms_beta").get<double>();
    tr.epsilon = t.at("epsilon").get<double>();
    tr.patience = t.at("patience").get<std::uint64_t>();
    tr.max_iterations = t.at("max_iterations").get<std::uint64_t>();
    tr.validate_every = t.at("validate_every").get<std::uint64_t>();
    tr.seed = t.at("seed").get<std::uint64_t>();
    tr.iterations = t.at("iterations").get<std::uint64_t>();
    tr.validation_loss = t.at("validation_loss").get<double>();
    tr.config_hash = t.at("config_hash").get<std::string>();
    return artifact;
}

std::string config_hash(const optim::TrainConfig& config) {
    std::ostringstream os;
    os << to_string(config.algorithm) << '|' << to_string(config.sampling) << '|'
       << fmt_exact(config.train_fraction) << '|' << fmt_exact(config.batch_fraction)
       << '|' << fmt_exact(config.learning_rate) << '|' << fmt_exact(config.beta1) << '|'
       << fmt_exact(config.beta2) << '|' << fmt_exact(config.rms_beta) << '|'
       << fmt_exact(config.epsilon) << '|' << config.patience << '|'
       << config.max_iterations << '|' << config.validate_every << '|'
       << (config.dropout ? fmt_exact(config.dropout->retention_prob) : "none") << '|'
       << config.rng_seed;
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a(os.str())));
    return buf;
}

}  // namespace gplm::io
