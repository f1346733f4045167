#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include <json.hpp>

#include "qfl/experiment.hpp"

using namespace qfl;
using experiment::ExperimentConfig;
using experiment::Protocol;
using json = nlohmann::json;

namespace {

ExperimentConfig small_task(Protocol p, std::uint64_t seed = 5) {
    ExperimentConfig cfg;
    cfg.protocol = p;
    cfg.seed = seed;
    cfg.clients = 3;
    cfg.features = 3;
    cfg.classes = 2;
    cfg.samples_per_client = 12;
    cfg.iterations = 6;
    cfg.learning_rate = 0.5;
    return cfg;
}

}  // namespace

TEST_CASE("config text parsing") {
    const std::string text = R"(
# comment
protocol = sms
seed = 42
clients = 5
features = 6
classes = 3
iterations = 7
learning_rate = 0.25
sms.h = 7
sms.p = 2
ghz.distributor = trusted-client
bqbc.counting = exact
sweep.axis = clients
sweep.values = 2, 4, 8
decoy.enabled = true
eve = on
)";
    const ExperimentConfig cfg = experiment::parse_config_text(text);
    CHECK(cfg.protocol == Protocol::Sms);
    CHECK(cfg.seed == 42);
    CHECK(cfg.clients == 5);
    CHECK(cfg.sms.phase_bits == 7);
    CHECK(cfg.sms.repetitions == 2);
    CHECK(cfg.ghz.distributor == incremental::Distributor::TrustedClient);
    CHECK(cfg.bqbc.exact_counting);
    CHECK(cfg.sweep.axis == "clients");
    CHECK(cfg.sweep.values == std::vector<std::int64_t>{2, 4, 8});
    CHECK(cfg.decoy_enabled);
    CHECK(cfg.eve);

    CHECK_THROWS_AS(experiment::parse_config_text("nonsense"), ConfigError);
    CHECK_THROWS_AS(experiment::parse_config_text("mystery = 1"), ConfigError);
    CHECK_THROWS_AS(experiment::parse_config_text("clients = soup"), ConfigError);
    CHECK_THROWS_AS(experiment::parse_config_text("protocol = carrier-pigeon"), ConfigError);
}

TEST_CASE("config validation rejects inconsistent setups") {
    ExperimentConfig cfg = small_task(Protocol::Sms);
    cfg.sms.phase_bits = 12;  // 2h above the simulator cap
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    ExperimentConfig bad = small_task(Protocol::Plain);
    bad.clients = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("plain training learns the synthetic task deterministically") {
    const ExperimentConfig cfg = small_task(Protocol::Plain);
    const experiment::RunReport a = experiment::cmd_train(cfg);
    const experiment::RunReport b = experiment::cmd_train(cfg);
    CHECK(a.summary_json == b.summary_json);
    CHECK(a.ledger_csv == b.ledger_csv);
    CHECK(a.curves_csv == b.curves_csv);

    const json summary = json::parse(a.summary_json);
    CHECK_FALSE(summary["aborted"].get<bool>());
    const auto iters = summary["iterations"];
    REQUIRE(iters.size() == 6);
    CHECK(summary["final"]["loss"].get<double>() < iters[0]["loss"].get<double>());
    CHECK(summary["final"]["accuracy"].get<double>() > 0.6);
}

TEST_CASE("css training matches plain to 1e-8") {
    ExperimentConfig plain_cfg = small_task(Protocol::Plain, 7);
    ExperimentConfig css_cfg = small_task(Protocol::Css, 7);
    const json plain = json::parse(experiment::cmd_train(plain_cfg).summary_json);
    const json css = json::parse(experiment::cmd_train(css_cfg).summary_json);

    const auto pa = plain["final"]["params"];
    const auto ca = css["final"]["params"];
    REQUIRE(pa.size() == ca.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(std::abs(pa[i].get<double>() - ca[i].get<double>()) < 1e-8);
    }
    for (const auto& row : css["iterations"]) {
        CHECK(row["max_aggregate_deviation"].get<double>() <= 1e-8);
    }
    // Pairwise pads plus uploads moved through the ledger.
    CHECK(css["ledger_totals"]["by_protocol"]["css-classical"]["classical_bits"]
              .get<std::int64_t>() > 0);
}

TEST_CASE("sms training stays within the quantization budget each step") {
    ExperimentConfig cfg = small_task(Protocol::Sms, 11);
    cfg.sms.phase_bits = 8;
    const json summary = json::parse(experiment::cmd_train(cfg).summary_json);
    const double budget = 3.0 * (2.0 * std::numbers::pi / 256.0) / 2.0;
    for (const auto& row : summary["iterations"]) {
        CHECK(row["max_aggregate_deviation"].get<double>() <= budget + 1e-12);
        CHECK(row["error_budget"].get<double>() == doctest::Approx(budget));
    }
}

TEST_CASE("ghz training respects its shot-noise budget") {
    ExperimentConfig cfg = small_task(Protocol::Ghz, 13);
    cfg.iterations = 3;
    cfg.ghz.shots_per_quadrature = 4000;
    const json summary = json::parse(experiment::cmd_train(cfg).summary_json);
    for (const auto& row : summary["iterations"]) {
        CHECK(row["max_aggregate_deviation"].get<double>() <=
              row["error_budget"].get<double>());
    }
}

TEST_CASE("bqbc training with exact counting stays within the encoding budget") {
    ExperimentConfig cfg = small_task(Protocol::Bqbc, 17);
    cfg.iterations = 3;
    cfg.bqbc.code_length = 8;
    cfg.bqbc.exact_counting = true;
    cfg.bqbc.counting_qubits = 7;
    const json summary = json::parse(experiment::cmd_train(cfg).summary_json);
    for (const auto& row : summary["iterations"]) {
        CHECK(row["max_aggregate_deviation"].get<double>() <=
              row["error_budget"].get<double>());
    }
}

TEST_CASE("css-quantum training reports per-parameter standard errors") {
    ExperimentConfig cfg = small_task(Protocol::CssQuantum, 19);
    cfg.iterations = 2;
    cfg.css.fraction_bits = 24;
    cfg.css.exact_pad_bits = 12;
    cfg.css_swap_shots = 20000;
    const json summary = json::parse(experiment::cmd_train(cfg).summary_json);
    CHECK_FALSE(summary["aborted"].get<bool>());
    for (const auto& row : summary["iterations"]) {
        CHECK(row["error_budget"].get<double>() > 0.0);
    }
}

TEST_CASE("attack: inversion succeeds on plain and fails under css") {
    ExperimentConfig cfg = small_task(Protocol::Plain, 23);
    cfg.attack = "inversion";
    const json plain = json::parse(experiment::cmd_attack(cfg).summary_json);
    CHECK(plain["result"]["succeeded"].get<bool>());
    CHECK(plain["result"]["label_correct"].get<bool>());
    CHECK(plain["result"]["recovered_max_abs_error"].get<double>() <= 1e-8);

    cfg.protocol = Protocol::Css;
    const json css = json::parse(experiment::cmd_attack(cfg).summary_json);
    CHECK_FALSE(css["result"]["succeeded"].get<bool>());
    // Masked gradients leave the inversion many orders away from the exact
    // recovery the plain path achieves (or outright infeasible).
    const double err = css["result"]["recovered_max_abs_error"].get<double>();
    CHECK((err < 0 || err > 1e-2));

    cfg.protocol = Protocol::Sms;
    CHECK_THROWS_AS(experiment::cmd_attack(cfg), ConfigError);
}

TEST_CASE("attack: census grid") {
    ExperimentConfig cfg = small_task(Protocol::Plain);
    cfg.features = 10;
    cfg.classes = 3;
    cfg.attack = "census";
    const json out = json::parse(experiment::cmd_attack(cfg).summary_json);
    bool saw_b1 = false;
    for (const auto& row : out["result"]["rows"]) {
        const std::int64_t b = row["batch"].get<std::int64_t>();
        CHECK(row["equations"].get<std::int64_t>() == 33);
        CHECK(row["unknowns"].get<std::int64_t>() == 13 * b);
        CHECK(row["determined"].get<bool>() == (33 >= 13 * b));
        if (b == 1) saw_b1 = true;
    }
    CHECK(saw_b1);
}

TEST_CASE("attack: ghz pairing demo and its mitigation") {
    ExperimentConfig cfg = small_task(Protocol::Ghz, 29);
    cfg.attack = "ghz-pairing";
    cfg.ghz.shots_per_quadrature = 10000;
    const json hit = json::parse(experiment::cmd_attack(cfg).summary_json);
    CHECK_FALSE(hit["result"]["attack_unavailable"].get<bool>());
    CHECK(hit["result"]["abs_error"].get<double>() < 0.05);

    cfg.ghz.distributor = incremental::Distributor::TrustedClient;
    const json blocked = json::parse(experiment::cmd_attack(cfg).summary_json);
    CHECK(blocked["result"]["attack_unavailable"].get<bool>());
}

TEST_CASE("attack: sms demos") {
    ExperimentConfig cfg = small_task(Protocol::Sms, 31);
    cfg.sms.phase_bits = 4;
    cfg.attack = "sms-iqft";
    cfg.attack_trials = 800;
    const json iqft = json::parse(experiment::cmd_attack(cfg).summary_json);
    CHECK(std::abs(iqft["result"]["detection_rate"].get<double>() - 0.9375) < 0.04);

    cfg.attack = "sms-measure";
    const json measure = json::parse(experiment::cmd_attack(cfg).summary_json);
    CHECK(measure["result"]["detection_rate"].get<double>() == 0.0);
}

TEST_CASE("attack: bqbc biased state demo") {
    ExperimentConfig cfg = small_task(Protocol::Bqbc, 37);
    cfg.clients = 2;
    cfg.bqbc.code_length = 8;
    cfg.bqbc.counting_qubits = 4;
    cfg.attack = "bqbc-biased";
    cfg.attack_trials = 600;
    const json out = json::parse(experiment::cmd_attack(cfg).summary_json);
    CHECK(out["result"]["index_qubits"].get<int>() == 4);
    CHECK(std::abs(out["result"]["detection_rate"].get<double>() - 0.9375) < 0.04);
    CHECK(out["result"]["honest_detection_rate"].get<double>() == 0.0);
}

TEST_CASE("costs: css classical scales quadratically in clients") {
    ExperimentConfig cfg = small_task(Protocol::Css);
    cfg.sweep.axis = "clients";
    cfg.sweep.values = {2, 4, 8, 16};
    const json out = json::parse(experiment::cmd_costs(cfg).summary_json);
    CHECK(std::abs(out["slope"].get<double>() - 2.0) < 0.15);
}

TEST_CASE("costs: sms scales linearly in clients") {
    ExperimentConfig cfg = small_task(Protocol::Sms);
    cfg.sms.phase_bits = 5;
    cfg.sweep.axis = "clients";
    cfg.sweep.values = {8, 16, 32, 64};
    const json out = json::parse(experiment::cmd_costs(cfg).summary_json);
    CHECK(std::abs(out["slope"].get<double>() - 1.0) < 0.1);
}

TEST_CASE("costs: ghz qubits proportional to shots") {
    ExperimentConfig cfg = small_task(Protocol::Ghz);
    cfg.sweep.axis = "shots";
    cfg.sweep.values = {100, 200, 400, 800};
    const json out = json::parse(experiment::cmd_costs(cfg).summary_json);
    CHECK(std::abs(out["slope"].get<double>() - 1.0) < 0.05);
}

TEST_CASE("costs: bqbc oracle calls obey the 2^t - 1 law") {
    ExperimentConfig cfg = small_task(Protocol::Bqbc);
    cfg.clients = 2;
    cfg.bqbc.code_length = 8;
    cfg.bqbc.exact_counting = true;
    cfg.sweep.axis = "t";
    cfg.sweep.values = {4, 5, 6, 7};
    const json out = json::parse(experiment::cmd_costs(cfg).summary_json);
    const auto calls = out["oracle_calls"];
    REQUIRE(calls.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(calls[i].get<std::int64_t>() == (1ll << cfg.sweep.values[i]) - 1);
    }
    CHECK_THROWS_AS(
        [&] {
            ExperimentConfig bad = cfg;
            bad.sweep.values = {4};
            experiment::cmd_costs(bad);
        }(),
        ConfigError);
}

TEST_CASE("decoy sweep: detection follows 1 - (3/4)^n and never false-fires") {
    ExperimentConfig cfg = small_task(Protocol::Plain, 41);
    cfg.decoy_enabled = true;
    cfg.eve = true;
    cfg.attack_trials = 500;
    const json with_eve = json::parse(experiment::cmd_decoy(cfg).summary_json);
    for (const auto& row : with_eve["rows"]) {
        const double rate = row["rate"].get<double>();
        const double predicted = row["predicted"].get<double>();
        const double sigma = std::sqrt(std::max(predicted * (1.0 - predicted), 1e-9) / 500.0);
        CHECK(std::abs(rate - predicted) <= 3.0 * sigma + 1e-9);
    }

    cfg.eve = false;
    const json quiet = json::parse(experiment::cmd_decoy(cfg).summary_json);
    for (const auto& row : quiet["rows"]) {
        CHECK(row["rate"].get<double>() == 0.0);
    }

    cfg.decoy_enabled = false;
    CHECK_THROWS_AS(experiment::cmd_decoy(cfg), ConfigError);
}

TEST_CASE("write_report produces the three artifacts") {
    namespace fs = std::filesystem;
    const ExperimentConfig cfg = small_task(Protocol::Css, 43);
    const experiment::RunReport report = experiment::cmd_train(cfg);
    const std::string dir = (fs::temp_directory_path() / "qfl_report_test").string();
    fs::remove_all(dir);
    experiment::write_report(report, dir);
    CHECK(fs::exists(fs::path(dir) / "summary.json"));
    CHECK(fs::exists(fs::path(dir) / "ledger.csv"));
    CHECK(fs::exists(fs::path(dir) / "curves.csv"));

    std::ifstream in(fs::path(dir) / "summary.json");
    std::stringstream buf;
    buf << in.rdbuf();
    CHECK(json::parse(buf.str())["command"] == "train");
    fs::remove_all(dir);
}

TEST_CASE("ragged client shards weight the aggregate by N_i/N") {
    ExperimentConfig cfg = small_task(Protocol::Css, 61);
    cfg.client_samples = {5, 10, 30};
    cfg.iterations = 4;
    const json css = json::parse(experiment::cmd_train(cfg).summary_json);
    ExperimentConfig plain = cfg;
    plain.protocol = Protocol::Plain;
    const json ref = json::parse(experiment::cmd_train(plain).summary_json);
    const auto pa = ref["final"]["params"];
    const auto ca = css["final"]["params"];
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(std::abs(pa[i].get<double>() - ca[i].get<double>()) < 1e-8);
    }

    ExperimentConfig bad = cfg;
    bad.client_samples = {5, 10};
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    CHECK(experiment::parse_config_text("client_samples = 3, 4, 5").client_samples ==
          std::vector<std::int64_t>{3, 4, 5});
}

TEST_CASE("zero iterations echoes the initial parameters") {
    ExperimentConfig cfg = small_task(Protocol::Plain, 53);
    cfg.iterations = 0;
    const json summary = json::parse(experiment::cmd_train(cfg).summary_json);
    CHECK(summary["iterations"].empty());
    for (const auto& v : summary["final"]["params"]) {
        CHECK(v.get<double>() == 0.0);
    }
}

TEST_CASE("training halts and reports when decoys expose an eavesdropper") {
    ExperimentConfig cfg = small_task(Protocol::Css, 59);
    cfg.decoy_enabled = true;
    cfg.decoy_count = 16;
    cfg.eve = true;
    const experiment::RunReport report = experiment::cmd_train(cfg);
    CHECK(report.aborted);
    const json summary = json::parse(report.summary_json);
    CHECK(summary["aborted"].get<bool>());
    CHECK(summary["abort_reason"].get<std::string>().find("decoy") != std::string::npos);

    // Quiet channel: decoys cost traffic but never fire.
    cfg.eve = false;
    const experiment::RunReport quiet = experiment::cmd_train(cfg);
    CHECK_FALSE(quiet.aborted);
    const json qsum = json::parse(quiet.summary_json);
    CHECK(qsum["ledger_totals"]["by_protocol"]["decoy"]["qubits"].get<std::int64_t>() > 0);
}

TEST_CASE("debug gradient rows are exported on request") {
    ExperimentConfig cfg = small_task(Protocol::Plain, 47);
    cfg.iterations = 2;
    cfg.debug_gradients = true;
    const json summary = json::parse(experiment::cmd_train(cfg).summary_json);
    REQUIRE(summary.contains("gradient_rows"));
    CHECK(summary["gradient_rows"].size() == 2);
    // d = n C + C comma-separated values per row.
    const std::string row = summary["gradient_rows"][0].get<std::string>();
    CHECK(std::count(row.begin(), row.end(), ',') == cfg.flat_dim() - 1);
}
