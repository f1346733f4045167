#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qfl/bqbc_protocol.hpp"
#include "qfl/channel.hpp"
#include "qfl/css_protocol.hpp"
#include "qfl/errors.hpp"
#include "qfl/fl_model.hpp"
#include "qfl/incremental.hpp"

namespace qfl::experiment {

enum class Protocol { Plain, Css, CssQuantum, Bqbc, Ghz, Sms };

std::string to_string(Protocol p);
Protocol protocol_from_string(const std::string& name);

struct SweepSpec {
    std::string axis;  // clients | shots | t | d | decoys
    std::vector<std::int64_t> values;
};

/// Everything a run needs; see README for the config file schema.
struct ExperimentConfig {
    Protocol protocol = Protocol::Plain;
    std::uint64_t seed = 1;
    std::string out_dir;

    // Task.
    int clients = 4;
    int features = 4;
    int classes = 3;
    std::int64_t samples_per_client = 25;
    std::vector<std::int64_t> client_samples;  // optional ragged override of N_i
    double center_scale = 1.0;
    double noise = 0.6;

    // Training.
    int iterations = 10;
    double learning_rate = 0.5;
    bool wrap_aggregate = false;

    // Protocol parameters.
    css::CssConfig css;
    std::int64_t css_swap_shots = 100000;
    bqbc::BqbcConfig bqbc;
    incremental::GhzConfig ghz;
    incremental::SmsConfig sms;

    // Adversary and decoy toggles.
    std::string attack;
    int attack_trials = 1000;
    bool decoy_enabled = false;
    std::int64_t decoy_count = -1;  // -1 means one decoy per data qubit
    bool eve = false;

    SweepSpec sweep;
    bool debug_gradients = false;

    int flat_dim() const { return features * classes + classes; }
    void validate() const;
};

/// key = value lines; '#' starts a comment. Unknown keys are rejected.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

struct RunReport {
    std::string summary_json;
    std::string ledger_csv;
    std::string curves_csv;  // empty when the command produces no curves
    bool aborted = false;
};

RunReport cmd_train(const ExperimentConfig& cfg);
RunReport cmd_attack(const ExperimentConfig& cfg);
RunReport cmd_costs(const ExperimentConfig& cfg);
RunReport cmd_decoy(const ExperimentConfig& cfg);

/// Writes summary.json, ledger.csv and curves.csv under out_dir.
void write_report(const RunReport& report, const std::string& out_dir);

// ---------------------------------------------------------------------------
// Aggregation engine, exposed for tests.

struct AggregateOutcome {
    std::vector<double> values;        // one aggregate per parameter
    double error_budget = 0.0;         // documented per-parameter budget
    std::vector<double> std_errors;    // per parameter, when stochastic
};

/// Runs one full aggregation round (all d parameters) under the selected
/// protocol. `per_client_flat` holds one flattened gradient vector per client.
AggregateOutcome aggregate_round(const ExperimentConfig& cfg, channel::Ledger& ledger,
                                 const std::vector<std::vector<double>>& per_client_flat,
                                 const std::vector<fl::ClientWeight>& weights, std::int64_t round);

}  // namespace qfl::experiment
