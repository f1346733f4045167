#include <algorithm>
#include <fstream>
#include <sstream>

#include "qfl/experiment.hpp"

namespace qfl::experiment {

std::string to_string(Protocol p) {
    switch (p) {
        case Protocol::Plain: return "plain";
        case Protocol::Css: return "css";
        case Protocol::CssQuantum: return "css-quantum";
        case Protocol::Bqbc: return "bqbc";
        case Protocol::Ghz: return "ghz";
        case Protocol::Sms: return "sms";
    }
    return "plain";
}

Protocol protocol_from_string(const std::string& name) {
    if (name == "plain") return Protocol::Plain;
    if (name == "css") return Protocol::Css;
    if (name == "css-quantum") return Protocol::CssQuantum;
    if (name == "bqbc") return Protocol::Bqbc;
    if (name == "ghz") return Protocol::Ghz;
    if (name == "sms") return Protocol::Sms;
    throw ConfigError("unknown protocol '" + name + "'");
}

void ExperimentConfig::validate() const {
    if (clients < 1) throw ConfigError("clients must be >= 1");
    if (features < 1 || classes < 2) throw ConfigError("task needs features >= 1, classes >= 2");
    if (samples_per_client < 1) throw ConfigError("samples_per_client must be >= 1");
    if (!client_samples.empty()) {
        if (client_samples.size() != static_cast<std::size_t>(clients)) {
            throw ConfigError("client_samples needs one entry per client");
        }
        for (std::int64_t n : client_samples) {
            if (n < 1) throw ConfigError("client_samples entries must be >= 1");
        }
    }
    if (iterations < 0) throw ConfigError("iterations must be >= 0");
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
    if (attack_trials < 1) throw ConfigError("attack.trials must be >= 1");
    if (decoy_count < -1) throw ConfigError("decoy.count must be >= 0 (or -1 for auto)");

    css::CssConfig css_checked = css;
    css_checked.clients = clients;
    css_checked.validate();
    if (protocol == Protocol::Bqbc) {
        bqbc::BqbcConfig b = bqbc;
        b.clients = clients;
        b.validate();
    }
    if (protocol == Protocol::Ghz) {
        incremental::GhzConfig g = ghz;
        g.clients = clients;
        g.validate();
    }
    if (protocol == Protocol::Sms) {
        incremental::SmsConfig s = sms;
        s.clients = clients;
        s.validate();
    }
    if (css_swap_shots < 1) throw ConfigError("css.swap_shots must be >= 1");
}

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "on") return true;
    if (value == "false" || value == "0" || value == "off") return false;
    throw ConfigError("key '" + key + "' expects a boolean, got '" + value + "'");
}

std::int64_t parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const std::int64_t v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "' expects an integer, got '" + value + "'");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "' expects a number, got '" + value + "'");
    }
}

std::vector<std::int64_t> parse_int_list(const std::string& key, const std::string& value) {
    std::vector<std::int64_t> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_int(key, item));
    }
    if (out.empty()) throw ConfigError("key '" + key + "' expects a comma-separated list");
    return out;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::stringstream stream(text);
    std::string line;
    int line_no = 0;
    while (std::getline(stream, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + " is not 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw ConfigError("config line " + std::to_string(line_no) + " is not 'key = value'");
        }

        if (key == "protocol") cfg.protocol = protocol_from_string(value);
        else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int(key, value));
        else if (key == "out") cfg.out_dir = value;
        else if (key == "clients") cfg.clients = static_cast<int>(parse_int(key, value));
        else if (key == "features") cfg.features = static_cast<int>(parse_int(key, value));
        else if (key == "classes") cfg.classes = static_cast<int>(parse_int(key, value));
        else if (key == "samples_per_client") cfg.samples_per_client = parse_int(key, value);
        else if (key == "client_samples") cfg.client_samples = parse_int_list(key, value);
        else if (key == "center_scale") cfg.center_scale = parse_double(key, value);
        else if (key == "noise") cfg.noise = parse_double(key, value);
        else if (key == "iterations") cfg.iterations = static_cast<int>(parse_int(key, value));
        else if (key == "learning_rate") cfg.learning_rate = parse_double(key, value);
        else if (key == "wrap_aggregate") cfg.wrap_aggregate = parse_bool(key, value);
        else if (key == "css.log2_modulus") cfg.css.log2_modulus = static_cast<int>(parse_int(key, value));
        else if (key == "css.fraction_bits") cfg.css.fraction_bits = static_cast<int>(parse_int(key, value));
        else if (key == "css.word_bits") cfg.css.word_bits = static_cast<int>(parse_int(key, value));
        else if (key == "css.exact_pad_bits") cfg.css.exact_pad_bits = static_cast<int>(parse_int(key, value));
        else if (key == "css.gradient_bound") cfg.css.gradient_bound = parse_double(key, value);
        else if (key == "css.swap_shots") cfg.css_swap_shots = parse_int(key, value);
        else if (key == "bqbc.l0") cfg.bqbc.code_length = static_cast<int>(parse_int(key, value));
        else if (key == "bqbc.t") cfg.bqbc.counting_qubits = static_cast<int>(parse_int(key, value));
        else if (key == "bqbc.epsilon") cfg.bqbc.epsilon = parse_double(key, value);
        else if (key == "bqbc.r") cfg.bqbc.redundancy = static_cast<int>(parse_int(key, value));
        else if (key == "bqbc.padding") cfg.bqbc.phase_padding = parse_bool(key, value);
        else if (key == "bqbc.verification_rounds") cfg.bqbc.verification_rounds = static_cast<int>(parse_int(key, value));
        else if (key == "bqbc.counting") {
            if (value == "exact") cfg.bqbc.exact_counting = true;
            else if (value == "quantum") cfg.bqbc.exact_counting = false;
            else throw ConfigError("bqbc.counting expects 'exact' or 'quantum'");
        }
        else if (key == "ghz.shots") cfg.ghz.shots_per_quadrature = parse_int(key, value);
        else if (key == "ghz.distributor") {
            if (value == "server") cfg.ghz.distributor = incremental::Distributor::Server;
            else if (value == "trusted-client")
                cfg.ghz.distributor = incremental::Distributor::TrustedClient;
            else throw ConfigError("ghz.distributor expects 'server' or 'trusted-client'");
        }
        else if (key == "sms.h") cfg.sms.phase_bits = static_cast<int>(parse_int(key, value));
        else if (key == "sms.p") cfg.sms.repetitions = static_cast<int>(parse_int(key, value));
        else if (key == "attack") cfg.attack = value;
        else if (key == "attack.trials") cfg.attack_trials = static_cast<int>(parse_int(key, value));
        else if (key == "decoy.enabled") cfg.decoy_enabled = parse_bool(key, value);
        else if (key == "decoy.count") cfg.decoy_count = parse_int(key, value);
        else if (key == "eve") cfg.eve = parse_bool(key, value);
        else if (key == "sweep.axis") cfg.sweep.axis = value;
        else if (key == "sweep.values") cfg.sweep.values = parse_int_list(key, value);
        else if (key == "debug_gradients") cfg.debug_gradients = parse_bool(key, value);
        else throw ConfigError("unknown config key '" + key + "'");
    }
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str());
}

}  // namespace qfl::experiment
