#ifndef DUET_CONFIG_HPP
#define DUET_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "duet/attack.hpp"
#include "duet/model.hpp"

namespace duet {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DetectorSpec {
    std::string name;
    ClassifierArch arch;
    std::uint64_t seed = 0;
};

struct TrainSection {
    std::vector<DetectorSpec> detectors;
    double learning_rate = 0.05;
    int epochs = 20;
    int batch_size = 16;
};

struct CorpusSection {
    int n_real = 32;
    int n_fake = 32;
    int size = 16;
};

struct ReportFlags {
    bool csv = true;
    bool json = true;
};

struct RunConfig {
    std::filesystem::path corpus_dir = "corpus";
    std::filesystem::path models_dir = "models";
    std::filesystem::path output_dir = "out";
    std::uint64_t seed = 0;
    int workers = 1;

    CorpusSection corpus;
    TrainSection train;
    std::vector<std::string> surrogates;
    std::vector<std::string> targets;
    std::vector<std::string> selection_classifiers; // defaults to targets
    AttackConfig attack;
    PreprocessConfig preprocess;
    ReportFlags report;

    /// Structural checks that do not touch the filesystem: non-empty model
    /// lists where required, unique detector names, surrogate/target
    /// disjointness, selection classifiers drawn from targets only.
    void validate() const;
};

/// Parses a JSON config file. Unknown keys anywhere are errors.
RunConfig load_run_config(const std::filesystem::path& path);

/// Effective config (defaults filled in) as a JSON document, used for the
/// report's config echo. Field order is fixed so serialization is stable.
std::string serialize_run_config(const RunConfig& cfg);

} // namespace duet

#endif // DUET_CONFIG_HPP
