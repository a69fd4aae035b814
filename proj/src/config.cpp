#include "config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>

#include "csv.hpp"

namespace nsr {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: bad numeric value '" + value + "' for key '" + key + "'");
    }
}

long long parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer value '" + value + "' for key '" + key + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "1" || value == "true" || value == "on" || value == "yes") return true;
    if (value == "0" || value == "false" || value == "off" || value == "no") return false;
    throw ConfigError("config: bad boolean value '" + value + "' for key '" + key + "'");
}

std::vector<std::size_t> parse_dims(const std::string& key, const std::string& value) {
    std::vector<std::size_t> dims;
    std::stringstream ss(value);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok = trim(tok);
        if (tok.empty()) continue;
        const long long v = parse_int(key, tok);
        if (v < 1) throw ConfigError("config: dimension must be >= 1 in '" + key + "'");
        dims.push_back(static_cast<std::size_t>(v));
    }
    if (dims.empty()) throw ConfigError("config: empty dimension list for '" + key + "'");
    return dims;
}

std::string join_dims(const std::vector<std::size_t>& dims) {
    std::string out;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(dims[i]);
    }
    return out;
}

} // namespace

std::vector<std::size_t> mlp_preset_hidden_dims(const std::string& model) {
    if (model == "mlp-3") return {100};
    if (model == "mlp-4") return {256, 100};
    if (model == "mlp-6") return {256, 128, 64, 32};
    if (model == "mlp-8") return {256, 128, 64, 32, 32, 16};
    if (model == "mlp-10") return {256, 128, 64, 64, 32, 32, 16, 16};
    throw ConfigError("unknown model preset '" + model + "'");
}

void RunConfig::validate() const {
    if (model != "custom") mlp_preset_hidden_dims(model); // throws on bad preset
    if (model == "custom" && hidden_dims.empty()) {
        throw ConfigError("model = custom requires a layers = ... list");
    }
    if (dataset != "mnist" && dataset != "blobs") {
        throw ConfigError("dataset must be mnist or blobs, got '" + dataset + "'");
    }
    if (optimizer != "sgd" && optimizer != "momentum") {
        throw ConfigError("optimizer must be sgd or momentum, got '" + optimizer + "'");
    }
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be > 0");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must be in [0,1)");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0,1)");
    if (nsr_lambda < 0.0) throw ConfigError("nsr_lambda must be >= 0");
    if (nsr_queue_len < 1) throw ConfigError("nsr_queue_len must be >= 1");
    if (nsr_gradient_mode != "detached_mean" && nsr_gradient_mode != "batch_variance") {
        throw ConfigError("nsr_gradient_mode must be detached_mean or batch_variance");
    }
    if (reg != "none" && reg != "l1" && reg != "l2") {
        throw ConfigError("reg must be none, l1 or l2");
    }
    if (reg_coef < 0.0) throw ConfigError("reg_coef must be >= 0");
    if (warmup_epochs < 0) throw ConfigError("warmup_epochs must be >= 0");
    if (layer_scores_split != "train" && layer_scores_split != "test") {
        throw ConfigError("layer_scores_split must be train or test");
    }
    if (blobs_std < 0.0) throw ConfigError("blobs_std must be >= 0");

    const bool nsr_active = nsr_lambda > 0.0 && nsr_layer != "off";
    const bool reg_active = reg != "none" && reg_coef > 0.0;
    const bool dropout_active = dropout > 0.0;
    if (!combine) {
        int active = (nsr_active ? 1 : 0) + (reg_active ? 1 : 0) + (dropout_active ? 1 : 0);
        if (active > 1) {
            throw ConfigError(
                "only one regularizer may be active; set combine = 1 to stack them");
        }
    }
}

namespace {

struct KeyHandler {
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

const std::vector<std::pair<std::string, KeyHandler>>& key_table() {
    static const std::vector<std::pair<std::string, KeyHandler>> table = {
        {"model",
         {[](RunConfig& c, const std::string&, const std::string& v) { c.model = v; },
          [](const RunConfig& c) { return c.model; }}},
        {"layers",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.hidden_dims = parse_dims(k, v);
              c.model = "custom";
          },
          [](const RunConfig& c) { return join_dims(c.hidden_dims); }}},
        {"dropout",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.dropout = parse_double(k, v);
          },
          [](const RunConfig& c) { return csv_double(c.dropout); }}},
        {"dataset",
         {[](RunConfig& c, const std::string&, const std::string& v) { c.dataset = v; },
          [](const RunConfig& c) { return c.dataset; }}},
        {"mnist_dir",
         {[](RunConfig& c, const std::string&, const std::string& v) { c.mnist_dir = v; },
          [](const RunConfig& c) { return c.mnist_dir; }}},
        {"use_val_split",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.use_val_split = parse_bool(k, v);
          },
          [](const RunConfig& c) { return c.use_val_split ? "1" : "0"; }}},
        {"blobs_classes",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.blobs_classes = static_cast<int>(parse_int(k, v));
          },
          [](const RunConfig& c) { return std::to_string(c.blobs_classes); }}},
        {"blobs_per_class",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.blobs_per_class = static_cast<int>(parse_int(k, v));
          },
          [](const RunConfig& c) { return std::to_string(c.blobs_per_class); }}},
        {"blobs_dim",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.blobs_dim = static_cast<int>(parse_int(k, v));
          },
          [](const RunConfig& c) { return std::to_string(c.blobs_dim); }}},
        {"blobs_spread",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.blobs_spread = parse_double(k, v);
          },
          [](const RunConfig& c) { return csv_double(c.blobs_spread); }}},
        {"blobs_std",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.blobs_std = parse_double(k, v);
          },
          [](const RunConfig& c) { return csv_double(c.blobs_std); }}},
        {"blobs_test_per_class",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.blobs_test_per_class = static_cast<int>(parse_int(k, v));
          },
          [](const RunConfig& c) { return std::to_string(c.blobs_test_per_class); }}},
        {"optimizer",
         {[](RunConfig& c, const std::string&, const std::string& v) { c.optimizer = v; },
          [](const RunConfig& c) { return c.optimizer; }}},
        {"learning_rate",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.learning_rate = parse_double(k, v);
          },
          [](const RunConfig& c) { return csv_double(c.learning_rate); }}},
        {"momentum",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.momentum = parse_double(k, v);
          },
          [](const RunConfig& c) { return csv_double(c.momentum); }}},
        {"epochs",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.epochs = static_cast<int>(parse_int(k, v));
          },
          [](const RunConfig& c) { return std::to_string(c.epochs); }}},
        {"batch_size",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              const long long b = parse_int(k, v);
              if (b < 1) throw ConfigError("batch_size must be >= 1");
              c.batch_size = static_cast<std::size_t>(b);
          },
          [](const RunConfig& c) { return std::to_string(c.batch_size); }}},
        {"seed",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.seed = static_cast<std::uint64_t>(parse_int(k, v));
          },
          [](const RunConfig& c) { return std::to_string(c.seed); }}},
        {"nsr_lambda",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.nsr_lambda = parse_double(k, v);
          },
          [](const RunConfig& c) { return csv_double(c.nsr_lambda); }}},
        {"nsr_queue_len",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.nsr_queue_len = static_cast<int>(parse_int(k, v));
          },
          [](const RunConfig& c) { return std::to_string(c.nsr_queue_len); }}},
        {"nsr_layer",
         {[](RunConfig& c, const std::string&, const std::string& v) { c.nsr_layer = v; },
          [](const RunConfig& c) { return c.nsr_layer; }}},
        {"nsr_exclude_zero",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.nsr_exclude_zero = parse_bool(k, v);
          },
          [](const RunConfig& c) { return c.nsr_exclude_zero ? "1" : "0"; }}},
        {"nsr_gradient_mode",
         {[](RunConfig& c, const std::string&, const std::string& v) { c.nsr_gradient_mode = v; },
          [](const RunConfig& c) { return c.nsr_gradient_mode; }}},
        {"warmup_epochs",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.warmup_epochs = static_cast<int>(parse_int(k, v));
          },
          [](const RunConfig& c) { return std::to_string(c.warmup_epochs); }}},
        {"reg",
         {[](RunConfig& c, const std::string&, const std::string& v) { c.reg = v; },
          [](const RunConfig& c) { return c.reg; }}},
        {"reg_coef",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.reg_coef = parse_double(k, v);
          },
          [](const RunConfig& c) { return csv_double(c.reg_coef); }}},
        {"combine",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.combine = parse_bool(k, v);
          },
          [](const RunConfig& c) { return c.combine ? "1" : "0"; }}},
        {"out_dir",
         {[](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = v; },
          [](const RunConfig& c) { return c.out_dir; }}},
        {"dynamics",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.dynamics = parse_bool(k, v);
          },
          [](const RunConfig& c) { return c.dynamics ? "1" : "0"; }}},
        {"dynamics_layer",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.dynamics_layer = static_cast<int>(parse_int(k, v));
          },
          [](const RunConfig& c) { return std::to_string(c.dynamics_layer); }}},
        {"layer_scores_split",
         {[](RunConfig& c, const std::string&, const std::string& v) {
              c.layer_scores_split = v;
          },
          [](const RunConfig& c) { return c.layer_scores_split; }}},
        {"verbose",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.verbose = parse_bool(k, v);
          },
          [](const RunConfig& c) { return c.verbose ? "1" : "0"; }}},
    };
    return table;
}

const KeyHandler& find_key(const std::string& key) {
    for (const auto& [name, handler] : key_table()) {
        if (name == key) return handler;
    }
    throw ConfigError("unknown config key '" + key + "'");
}

} // namespace

void config_set(RunConfig& cfg, const std::string& key, const std::string& value) {
    find_key(key).set(cfg, key, trim(value));
}

std::string config_get(const RunConfig& cfg, const std::string& key) {
    return find_key(key).get(cfg);
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    RunConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path + ":" + std::to_string(lineno) +
                              ": expected 'key = value', got '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        config_set(cfg, key, value);
    }
    return cfg;
}

std::map<std::string, std::string> config_to_map(const RunConfig& cfg) {
    std::map<std::string, std::string> out;
    for (const auto& [name, handler] : key_table()) {
        if (name == "layers" && cfg.hidden_dims.empty()) continue;
        out[name] = handler.get(cfg);
    }
    return out;
}

} // namespace nsr
