// qflsim: experiment runner for the gradient-hiding federated-learning
// protocol simulators. See README.md for the config schema.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "qfl/experiment.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::string protocol;
    std::int64_t seed = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "Path to a key = value config file");
    cmd->add_option("--seed", args.seed, "Override the config seed");
    cmd->add_option("--out", args.out_dir, "Directory for summary.json and CSV outputs");
    cmd->add_option("--protocol", args.protocol,
                    "Override the protocol (plain|css|css-quantum|bqbc|ghz|sms)");
}

qfl::experiment::ExperimentConfig resolve(const CommonArgs& args) {
    qfl::experiment::ExperimentConfig cfg;
    if (!args.config_path.empty()) {
        cfg = qfl::experiment::load_config_file(args.config_path);
    }
    if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    if (!args.protocol.empty()) {
        cfg.protocol = qfl::experiment::protocol_from_string(args.protocol);
    }
    return cfg;
}

int emit(const qfl::experiment::RunReport& report,
         const qfl::experiment::ExperimentConfig& cfg) {
    if (!cfg.out_dir.empty()) {
        qfl::experiment::write_report(report, cfg.out_dir);
    }
    std::cout << report.summary_json << std::endl;
    return report.aborted ? 3 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulator for gradient-hiding quantum federated learning protocols"};
    app.require_subcommand(1);

    CommonArgs train_args;
    CommonArgs attack_args;
    CommonArgs costs_args;
    CommonArgs decoy_args;
    CLI::App* train = app.add_subcommand("train", "Federated training under a protocol");
    CLI::App* attack = app.add_subcommand("attack", "Run an attack/detection demo");
    CLI::App* costs = app.add_subcommand("costs", "Communication-cost scaling sweep");
    CLI::App* decoy = app.add_subcommand("decoy", "Decoy-state eavesdropper detection sweep");
    add_common(train, train_args);
    add_common(attack, attack_args);
    add_common(costs, costs_args);
    add_common(decoy, decoy_args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            const auto cfg = resolve(train_args);
            return emit(qfl::experiment::cmd_train(cfg), cfg);
        }
        if (attack->parsed()) {
            const auto cfg = resolve(attack_args);
            return emit(qfl::experiment::cmd_attack(cfg), cfg);
        }
        if (costs->parsed()) {
            const auto cfg = resolve(costs_args);
            return emit(qfl::experiment::cmd_costs(cfg), cfg);
        }
        if (decoy->parsed()) {
            const auto cfg = resolve(decoy_args);
            return emit(qfl::experiment::cmd_decoy(cfg), cfg);
        }
    } catch (const qfl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << std::endl;
        return 2;
    } catch (const qfl::TamperDetected& e) {
        std::cerr << "protocol abort: " << e.what() << std::endl;
        return 3;
    } catch (const qfl::ProtocolAbort& e) {
        std::cerr << "protocol abort: " << e.what() << std::endl;
        return 3;
    } catch (const qfl::Error& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 0;
}
