#include "fire/config.hpp"

#include <fstream>
#include <sstream>

namespace fire {

Protocol protocol_from_name(const std::string& name) {
    if (name == "warm_start") return Protocol::warm_start;
    if (name == "continual") return Protocol::continual;
    if (name == "class_incremental") return Protocol::class_incremental;
    throw std::invalid_argument("unknown protocol '" + name + "'");
}

const char* protocol_name(Protocol p) {
    switch (p) {
        case Protocol::warm_start: return "warm_start";
        case Protocol::continual: return "continual";
        case Protocol::class_incremental: return "class_incremental";
    }
    return "?";
}

int ExperimentConfig::resolved_num_chunks() const {
    if (num_chunks > 0) return num_chunks;
    switch (protocol) {
        case Protocol::warm_start: return 2;
        case Protocol::continual: return 10;
        case Protocol::class_incremental: return 20;
    }
    return 0;
}

void ExperimentConfig::validate() const {
    dataset.validate();
    train.validate();
    if (train.learning_rate <= 0.0)
        throw std::invalid_argument("config: train.learning_rate must be > 0");
    reinit.validate();
    metrics.validate();
    if (hidden.empty()) throw std::invalid_argument("config: arch.hidden must not be empty");
    for (int h : hidden)
        if (h < 1) throw std::invalid_argument("config: arch.hidden entries must be >= 1");
    if (seeds.empty()) throw std::invalid_argument("config: need at least one seed");
    if (output_dir.empty()) throw std::invalid_argument("config: output_dir must not be empty");
    if (warm_fraction <= 0.0 || warm_fraction >= 1.0)
        throw std::invalid_argument("config: warm_fraction in (0,1)");
    const int chunks = resolved_num_chunks();
    if (chunks < 1) throw std::invalid_argument("config: num_chunks must be >= 1");
    if (protocol == Protocol::warm_start && chunks != 2)
        throw std::invalid_argument("config: warm_start protocol has exactly 2 chunks");
    if (protocol == Protocol::class_incremental && dataset.num_classes % chunks != 0)
        throw std::invalid_argument(
            "config: class_incremental needs num_classes divisible by num_chunks");
}

namespace {

int to_int(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        const int x = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return x;
    } catch (...) {
        throw std::invalid_argument("config: bad integer for '" + key + "': " + v);
    }
}

uint64_t to_u64(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        const uint64_t x = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return x;
    } catch (...) {
        throw std::invalid_argument("config: bad unsigned integer for '" + key + "': " + v);
    }
}

double to_double(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return x;
    } catch (...) {
        throw std::invalid_argument("config: bad real for '" + key + "': " + v);
    }
}

bool to_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("config: bad boolean for '" + key + "': " + v);
}

template <typename T, typename F>
std::vector<T> to_list(const std::string& v, const std::string& key, F conv) {
    std::vector<T> out;
    std::string item;
    std::istringstream ss(v);
    while (std::getline(ss, item, ',')) {
        if (item.empty()) throw std::invalid_argument("config: empty list item for '" + key + "'");
        out.push_back(conv(item, key));
    }
    if (out.empty()) throw std::invalid_argument("config: empty list for '" + key + "'");
    return out;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream ls(line);
        std::string key, value;
        if (!(ls >> key)) continue;
        std::getline(ls, value);
        const size_t start = value.find_first_not_of(" \t");
        const size_t end = value.find_last_not_of(" \t\r");
        value = start == std::string::npos ? "" : value.substr(start, end - start + 1);
        if (value.empty())
            throw std::invalid_argument("config line " + std::to_string(line_no) + ": key '" + key +
                                        "' has no value");

        if (key == "protocol") cfg.protocol = protocol_from_name(value);
        else if (key == "num_chunks") cfg.num_chunks = to_int(value, key);
        else if (key == "warm_fraction") cfg.warm_fraction = to_double(value, key);
        else if (key == "seeds") cfg.seeds = to_list<uint64_t>(value, key, to_u64);
        else if (key == "output_dir") cfg.output_dir = value;
        else if (key == "dataset.generator") cfg.dataset.generator = value;
        else if (key == "dataset.num_classes") cfg.dataset.num_classes = to_int(value, key);
        else if (key == "dataset.input_dim") cfg.dataset.input_dim = to_int(value, key);
        else if (key == "dataset.samples_per_class") cfg.dataset.samples_per_class = to_int(value, key);
        else if (key == "dataset.test_samples_per_class") cfg.dataset.test_samples_per_class = to_int(value, key);
        else if (key == "dataset.noise") cfg.dataset.noise = to_double(value, key);
        else if (key == "dataset.radius") cfg.dataset.radius = to_double(value, key);
        else if (key == "dataset.seed") cfg.dataset.seed = to_u64(value, key);
        else if (key == "arch.hidden") cfg.hidden = to_list<int>(value, key, to_int);
        else if (key == "train.optimizer") cfg.train.optimizer = optimizer_from_name(value);
        else if (key == "train.learning_rate") cfg.train.learning_rate = to_double(value, key);
        else if (key == "train.warmup_fraction") cfg.train.warmup_fraction = to_double(value, key);
        else if (key == "train.grad_clip") cfg.train.grad_clip = to_double(value, key);
        else if (key == "train.batch_size") cfg.train.batch_size = to_int(value, key);
        else if (key == "train.epochs_per_chunk") cfg.train.epochs_per_chunk = to_int(value, key);
        else if (key == "train.seed") cfg.train.seed = to_u64(value, key);
        else if (key == "reinit.method") cfg.reinit.method = reinit_method_from_name(value);
        else if (key == "reinit.lambda") cfg.reinit.lambda = to_double(value, key);
        else if (key == "reinit.iters") cfg.reinit.iters = to_int(value, key);
        else if (key == "reinit.tau") cfg.reinit.tau = to_double(value, key);
        else if (key == "reinit.seed") cfg.reinit.seed = to_u64(value, key);
        else if (key == "reinit.coeffs") cfg.coeffs = NsCoefficients::from_name(value);
        else if (key == "regularizer.kind") cfg.train.regularizer.kind = regularizer_kind_from_name(value);
        else if (key == "regularizer.strength") cfg.train.regularizer.strength = to_double(value, key);
        else if (key == "regularizer.parseval_scale") cfg.train.regularizer.parseval_scale = to_double(value, key);
        else if (key == "metrics.cadence") cfg.metrics.cadence = to_int(value, key);
        else if (key == "metrics.srank_delta") cfg.metrics.srank_delta = to_double(value, key);
        else if (key == "metrics.dormant_tau") cfg.metrics.dormant_tau = to_double(value, key);
        else if (key == "metrics.hessian") cfg.metrics.hessian = to_bool(value, key);
        else if (key == "metrics.hessian_batch") cfg.metrics.hessian_batch = to_int(value, key);
        else
            throw std::invalid_argument("config line " + std::to_string(line_no) +
                                        ": unknown key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str());
}

std::string config_to_text(const ExperimentConfig& cfg) {
    std::ostringstream out;
    char buf[64];
    auto real = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    out << "protocol " << protocol_name(cfg.protocol) << "\n";
    out << "num_chunks " << cfg.resolved_num_chunks() << "\n";
    out << "warm_fraction " << real(cfg.warm_fraction) << "\n";
    out << "seeds ";
    for (size_t i = 0; i < cfg.seeds.size(); ++i) out << (i ? "," : "") << cfg.seeds[i];
    out << "\n";
    out << "output_dir " << cfg.output_dir << "\n";
    out << "dataset.generator " << cfg.dataset.generator << "\n";
    out << "dataset.num_classes " << cfg.dataset.num_classes << "\n";
    out << "dataset.input_dim " << cfg.dataset.input_dim << "\n";
    out << "dataset.samples_per_class " << cfg.dataset.samples_per_class << "\n";
    out << "dataset.test_samples_per_class " << cfg.dataset.test_samples_per_class << "\n";
    out << "dataset.noise " << real(cfg.dataset.noise) << "\n";
    out << "dataset.radius " << real(cfg.dataset.radius) << "\n";
    out << "dataset.seed " << cfg.dataset.seed << "\n";
    out << "arch.hidden ";
    for (size_t i = 0; i < cfg.hidden.size(); ++i) out << (i ? "," : "") << cfg.hidden[i];
    out << "\n";
    out << "train.optimizer " << optimizer_name(cfg.train.optimizer) << "\n";
    out << "train.learning_rate " << real(cfg.train.learning_rate) << "\n";
    out << "train.warmup_fraction " << real(cfg.train.warmup_fraction) << "\n";
    out << "train.grad_clip " << real(cfg.train.grad_clip) << "\n";
    out << "train.batch_size " << cfg.train.batch_size << "\n";
    out << "train.epochs_per_chunk " << cfg.train.epochs_per_chunk << "\n";
    out << "train.seed " << cfg.train.seed << "\n";
    out << "reinit.method " << reinit_method_name(cfg.reinit.method) << "\n";
    out << "reinit.lambda " << real(cfg.reinit.lambda) << "\n";
    out << "reinit.iters " << cfg.reinit.iters << "\n";
    out << "reinit.tau " << real(cfg.reinit.tau) << "\n";
    out << "reinit.seed " << cfg.reinit.seed << "\n";
    out << "reinit.coeffs " << (cfg.coeffs.label == NsCoefficients::Label::paper_cubic
                                    ? "cubic"
                                    : cfg.coeffs.label == NsCoefficients::Label::appendix_quintic
                                          ? "quintic"
                                          : "muon")
        << "\n";
    out << "regularizer.kind " << regularizer_kind_name(cfg.train.regularizer.kind) << "\n";
    out << "regularizer.strength " << real(cfg.train.regularizer.strength) << "\n";
    out << "regularizer.parseval_scale " << real(cfg.train.regularizer.parseval_scale) << "\n";
    out << "metrics.cadence " << cfg.metrics.cadence << "\n";
    out << "metrics.srank_delta " << real(cfg.metrics.srank_delta) << "\n";
    out << "metrics.dormant_tau " << real(cfg.metrics.dormant_tau) << "\n";
    out << "metrics.hessian " << (cfg.metrics.hessian ? "true" : "false") << "\n";
    out << "metrics.hessian_batch " << cfg.metrics.hessian_batch << "\n";
    return out.str();
}

}  // namespace fire
