#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "duet/pipeline.hpp"

int main(int argc, char** argv) {
    CLI::App app{"dual-stream adversarial attack pipeline against deepfake detectors"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed_override;
    std::optional<int> workers_override;

    auto add_command = [&](const char* name, const char* desc) {
        CLI::App* sub = app.add_subcommand(name, desc);
        sub->add_option("--config", config_path, "run config JSON file")->required();
        sub->add_option("--seed", seed_override, "override the config's global seed");
        sub->add_option("--workers", workers_override, "override the worker thread count");
        return sub;
    };

    CLI::App* synth = add_command("synth", "synthesize the procedural corpus");
    CLI::App* train = add_command("train", "train the configured detectors");
    CLI::App* attack = add_command("attack", "run the dual-stream attack on the fake corpus");
    CLI::App* select = add_command("select", "pick the winning stream per image");
    CLI::App* evaluate = add_command("evaluate", "emit the final CSV and summary reports");

    CLI11_PARSE(app, argc, argv);

    try {
        duet::RunConfig cfg = duet::load_run_config(config_path);
        if (seed_override) cfg.seed = *seed_override;
        if (workers_override) cfg.workers = *workers_override;
        cfg.validate();

        if (synth->parsed()) return duet::cmd_synth(cfg);
        if (train->parsed()) return duet::cmd_train(cfg);
        if (attack->parsed()) return duet::cmd_attack(cfg);
        if (select->parsed()) return duet::cmd_select(cfg);
        if (evaluate->parsed()) return duet::cmd_evaluate(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
