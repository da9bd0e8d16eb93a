#include "duet/config.hpp"

#include <fstream>
#include <set>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace duet {

namespace {

using json = nlohmann::ordered_json;

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& context) {
    for (const auto& item : j.items()) {
        if (!allowed.count(item.key())) {
            throw ConfigError("config: unknown key \"" + item.key() + "\" in " + context);
        }
    }
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: bad value for \"") + key + "\": " + e.what());
    }
}

void read_optional_double(const json& j, const char* key, std::optional<double>& out) {
    if (!j.contains(key) || j.at(key).is_null()) return;
    if (!j.at(key).is_number()) {
        throw ConfigError(std::string("config: \"") + key + "\" must be a number or null");
    }
    out = j.at(key).get<double>();
}

void read_optional_int(const json& j, const char* key, std::optional<int>& out) {
    if (!j.contains(key) || j.at(key).is_null()) return;
    if (!j.at(key).is_number_integer()) {
        throw ConfigError(std::string("config: \"") + key + "\" must be an integer or null");
    }
    out = j.at(key).get<int>();
}

void read_path(const json& j, const char* key, std::filesystem::path& out) {
    std::string s = out.string();
    read_field(j, key, s);
    out = s;
}

PreprocessPlacement parse_placement(const std::string& s) {
    if (s == "before") return PreprocessPlacement::Before;
    if (s == "after") return PreprocessPlacement::After;
    if (s == "both") return PreprocessPlacement::Both;
    if (s == "off") return PreprocessPlacement::Off;
    throw ConfigError("config: preprocess.placement must be before|after|both|off, got \"" + s +
                      "\"");
}

const char* placement_name(PreprocessPlacement p) {
    switch (p) {
    case PreprocessPlacement::Before: return "before";
    case PreprocessPlacement::After: return "after";
    case PreprocessPlacement::Both: return "both";
    default: return "off";
    }
}

void parse_corpus(const json& j, CorpusSection& out) {
    reject_unknown_keys(j, {"n_real", "n_fake", "size"}, "corpus");
    read_field(j, "n_real", out.n_real);
    read_field(j, "n_fake", out.n_fake);
    read_field(j, "size", out.size);
}

void parse_detector(const json& j, DetectorSpec& out) {
    reject_unknown_keys(j, {"name", "conv1_channels", "conv2_channels", "pool", "seed"},
                        "train.detectors[]");
    if (!j.contains("name")) throw ConfigError("config: detector entry missing \"name\"");
    read_field(j, "name", out.name);
    read_field(j, "conv1_channels", out.arch.conv1_channels);
    read_field(j, "conv2_channels", out.arch.conv2_channels);
    read_field(j, "pool", out.arch.pool);
    read_field(j, "seed", out.seed);
}

void parse_train(const json& j, TrainSection& out) {
    reject_unknown_keys(j, {"detectors", "learning_rate", "epochs", "batch_size"}, "train");
    if (j.contains("detectors")) {
        if (!j.at("detectors").is_array()) {
            throw ConfigError("config: train.detectors must be an array");
        }
        out.detectors.clear();
        for (const json& d : j.at("detectors")) {
            DetectorSpec spec;
            parse_detector(d, spec);
            out.detectors.push_back(std::move(spec));
        }
    }
    read_field(j, "learning_rate", out.learning_rate);
    read_field(j, "epochs", out.epochs);
    read_field(j, "batch_size", out.batch_size);
}

void parse_attack(const json& j, AttackConfig& out) {
    reject_unknown_keys(j,
                        {"alpha", "iterations", "mu", "ti_kernel_size", "ti_sigma",
                         "di_probability", "di_scale_min", "di_scale_max", "lambda_ssim",
                         "ssim_window", "epsilon", "apw_enabled", "apw_every_iteration",
                         "apw_temperature", "sg_surrogate_index", "epsilon_grid",
                         "bisection_steps", "variance_ref", "variance_scale_min",
                         "variance_scale_max"},
                        "attack");
    read_optional_double(j, "alpha", out.alpha);
    read_field(j, "iterations", out.iterations);
    read_field(j, "mu", out.mu);
    read_field(j, "ti_kernel_size", out.ti_kernel_size);
    read_field(j, "ti_sigma", out.ti_sigma);
    read_field(j, "di_probability", out.di_probability);
    read_field(j, "di_scale_min", out.di_scale_min);
    read_field(j, "di_scale_max", out.di_scale_max);
    read_field(j, "lambda_ssim", out.lambda_ssim);
    read_field(j, "ssim_window", out.ssim_window);
    read_optional_double(j, "epsilon", out.epsilon);
    read_field(j, "apw_enabled", out.apw_enabled);
    read_field(j, "apw_every_iteration", out.apw_every_iteration);
    read_field(j, "apw_temperature", out.apw_temperature);
    read_optional_int(j, "sg_surrogate_index", out.sg_surrogate_index);
    read_field(j, "epsilon_grid", out.epsilon_grid);
    read_field(j, "bisection_steps", out.bisection_steps);
    read_field(j, "variance_ref", out.variance_ref);
    read_field(j, "variance_scale_min", out.variance_scale_min);
    read_field(j, "variance_scale_max", out.variance_scale_max);
}

void parse_preprocess(const json& j, PreprocessConfig& out) {
    reject_unknown_keys(
        j, {"contrast", "brightness", "perlin_grid_cells", "perlin_amplitude", "placement"},
        "preprocess");
    read_field(j, "contrast", out.contrast);
    read_field(j, "brightness", out.brightness);
    read_field(j, "perlin_grid_cells", out.perlin_grid_cells);
    read_field(j, "perlin_amplitude", out.perlin_amplitude);
    if (j.contains("placement")) out.placement = parse_placement(j.at("placement").get<std::string>());
}

void parse_report(const json& j, ReportFlags& out) {
    reject_unknown_keys(j, {"csv", "json"}, "report");
    read_field(j, "csv", out.csv);
    read_field(j, "json", out.json);
}

} // namespace

void RunConfig::validate() const {
    if (workers < 1) throw ConfigError("config: workers must be at least 1");

    std::unordered_set<std::string> names;
    for (const DetectorSpec& d : train.detectors) {
        if (d.name.empty()) throw ConfigError("config: detector name must be non-empty");
        if (!names.insert(d.name).second) {
            throw ConfigError("config: duplicate detector name \"" + d.name + "\"");
        }
    }

    std::unordered_set<std::string> surrogate_set(surrogates.begin(), surrogates.end());
    for (const std::string& t : targets) {
        if (surrogate_set.count(t)) {
            throw ConfigError("config: \"" + t + "\" is listed as both surrogate and target");
        }
    }
    std::unordered_set<std::string> target_set(targets.begin(), targets.end());
    for (const std::string& s : selection_classifiers) {
        if (surrogate_set.count(s)) {
            throw ConfigError("config: selection classifier \"" + s +
                              "\" is a surrogate; selection must stay black-box");
        }
        if (!target_set.count(s)) {
            throw ConfigError("config: selection classifier \"" + s +
                              "\" is not among the configured targets");
        }
    }
    if (attack.sg_surrogate_index &&
        (*attack.sg_surrogate_index < 0 ||
         *attack.sg_surrogate_index >= static_cast<int>(surrogates.size()))) {
        throw ConfigError("config: attack.sg_surrogate_index out of surrogate range");
    }
    attack.validate();
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config: parse failure in " + path.string() + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    reject_unknown_keys(j,
                        {"corpus_dir", "models_dir", "output_dir", "seed", "workers", "corpus",
                         "train", "surrogates", "targets", "selection_classifiers", "attack",
                         "preprocess", "report"},
                        "top level");

    RunConfig cfg;
    read_path(j, "corpus_dir", cfg.corpus_dir);
    read_path(j, "models_dir", cfg.models_dir);
    read_path(j, "output_dir", cfg.output_dir);
    read_field(j, "seed", cfg.seed);
    read_field(j, "workers", cfg.workers);
    if (j.contains("corpus")) parse_corpus(j.at("corpus"), cfg.corpus);
    if (j.contains("train")) parse_train(j.at("train"), cfg.train);
    read_field(j, "surrogates", cfg.surrogates);
    read_field(j, "targets", cfg.targets);
    read_field(j, "selection_classifiers", cfg.selection_classifiers);
    if (j.contains("attack")) parse_attack(j.at("attack"), cfg.attack);
    if (j.contains("preprocess")) parse_preprocess(j.at("preprocess"), cfg.preprocess);
    if (j.contains("report")) parse_report(j.at("report"), cfg.report);

    if (cfg.selection_classifiers.empty()) cfg.selection_classifiers = cfg.targets;
    cfg.validate();
    return cfg;
}

std::string serialize_run_config(const RunConfig& cfg) {
    json j;
    j["corpus_dir"] = cfg.corpus_dir.string();
    j["models_dir"] = cfg.models_dir.string();
    j["output_dir"] = cfg.output_dir.string();
    j["seed"] = cfg.seed;
    // workers is deliberately absent: it is an execution knob that must not
    // influence any report byte, and the echo feeds the report.
    j["corpus"] = {{"n_real", cfg.corpus.n_real},
                   {"n_fake", cfg.corpus.n_fake},
                   {"size", cfg.corpus.size}};
    json detectors = json::array();
    for (const DetectorSpec& d : cfg.train.detectors) {
        detectors.push_back({{"name", d.name},
                             {"conv1_channels", d.arch.conv1_channels},
                             {"conv2_channels", d.arch.conv2_channels},
                             {"pool", d.arch.pool},
                             {"seed", d.seed}});
    }
    j["train"] = {{"detectors", std::move(detectors)},
                  {"learning_rate", cfg.train.learning_rate},
                  {"epochs", cfg.train.epochs},
                  {"batch_size", cfg.train.batch_size}};
    j["surrogates"] = cfg.surrogates;
    j["targets"] = cfg.targets;
    j["selection_classifiers"] = cfg.selection_classifiers;

    json attack;
    if (cfg.attack.alpha) attack["alpha"] = *cfg.attack.alpha;
    else attack["alpha"] = nullptr;
    attack["iterations"] = cfg.attack.iterations;
    attack["mu"] = cfg.attack.mu;
    attack["ti_kernel_size"] = cfg.attack.ti_kernel_size;
    attack["ti_sigma"] = cfg.attack.ti_sigma;
    attack["di_probability"] = cfg.attack.di_probability;
    attack["di_scale_min"] = cfg.attack.di_scale_min;
    attack["di_scale_max"] = cfg.attack.di_scale_max;
    attack["lambda_ssim"] = cfg.attack.lambda_ssim;
    attack["ssim_window"] = cfg.attack.ssim_window;
    if (cfg.attack.epsilon) attack["epsilon"] = *cfg.attack.epsilon;
    else attack["epsilon"] = nullptr;
    attack["apw_enabled"] = cfg.attack.apw_enabled;
    attack["apw_every_iteration"] = cfg.attack.apw_every_iteration;
    attack["apw_temperature"] = cfg.attack.apw_temperature;
    if (cfg.attack.sg_surrogate_index) attack["sg_surrogate_index"] = *cfg.attack.sg_surrogate_index;
    else attack["sg_surrogate_index"] = nullptr;
    attack["epsilon_grid"] = cfg.attack.epsilon_grid;
    attack["bisection_steps"] = cfg.attack.bisection_steps;
    attack["variance_ref"] = cfg.attack.variance_ref;
    attack["variance_scale_min"] = cfg.attack.variance_scale_min;
    attack["variance_scale_max"] = cfg.attack.variance_scale_max;
    j["attack"] = std::move(attack);

    j["preprocess"] = {{"contrast", cfg.preprocess.contrast},
                       {"brightness", cfg.preprocess.brightness},
                       {"perlin_grid_cells", cfg.preprocess.perlin_grid_cells},
                       {"perlin_amplitude", cfg.preprocess.perlin_amplitude},
                       {"placement", placement_name(cfg.preprocess.placement)}};
    j["report"] = {{"csv", cfg.report.csv}, {"json", cfg.report.json}};
    return j.dump(2);
}

} // namespace duet
