#include "knet/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include "knet/errors.hpp"
#include "knet/pipeline.hpp"
#include "knet/rng.hpp"
#include "text_io.hpp"

namespace knet {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(const std::string& value, char sep) {
    std::vector<std::string> out;
    if (trim(value).empty()) return out;
    std::string item;
    std::istringstream in(value);
    while (std::getline(in, item, sep)) out.push_back(trim(item));
    return out;
}

[[noreturn]] void bad(const std::string& key, const std::string& message) {
    throw ConfigError(key + ": " + message);
}

std::uint64_t as_uint(const std::string& key, const std::string& value) {
    std::uint64_t v = 0;
    if (!detail::parse_int(trim(value), v)) bad(key, "expected a nonnegative integer, got '" + value + "'");
    return v;
}

std::size_t as_positive(const std::string& key, const std::string& value) {
    auto v = as_uint(key, value);
    if (v == 0) bad(key, "must be positive");
    return static_cast<std::size_t>(v);
}

double as_double(const std::string& key, const std::string& value) {
    double v = 0.0;
    if (!detail::parse_double(trim(value), v)) bad(key, "expected a number, got '" + value + "'");
    return v;
}

double as_positive_double(const std::string& key, const std::string& value) {
    double v = as_double(key, value);
    if (!(v > 0.0)) bad(key, "must be positive");
    return v;
}

bool as_bool(const std::string& key, const std::string& value) {
    const auto v = trim(value);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    bad(key, "expected true or false, got '" + value + "'");
}

std::vector<double> as_doubles(const std::string& key, const std::string& value, std::size_t count) {
    auto parts = split_list(value, ',');
    if (parts.size() != count) bad(key, "expected " + std::to_string(count) + " comma-separated numbers");
    std::vector<double> out;
    for (const auto& p : parts) out.push_back(as_double(key, p));
    return out;
}

std::vector<std::size_t> as_positive_list(const std::string& key, const std::string& value, bool allow_empty) {
    std::vector<std::size_t> out;
    for (const auto& p : split_list(value, ',')) out.push_back(as_positive(key, p));
    if (out.empty() && !allow_empty) bad(key, "list must not be empty");
    return out;
}

double as_unit_open(const std::string& key, const std::string& value) {
    double v = as_double(key, value);
    if (!(v > 0.0 && v < 1.0)) bad(key, "must lie in (0, 1)");
    return v;
}

struct Entry {
    ConfigKey key;
    std::function<void(PipelineConfig&, const std::string&)> set;
};

void set_gaussian(PipelineConfig& cfg, std::size_t cls, bool mean, const std::string& key, const std::string& value) {
    auto v = as_doubles(key, value, 2);
    if (mean) {
        cfg.toy_specs[cls].mean = {v[0], v[1]};
    } else {
        if (!(v[0] > 0.0 && v[1] > 0.0)) bad(key, "standard deviations must be positive");
        cfg.toy_specs[cls].stddev = {v[0], v[1]};
    }
}

const std::vector<Entry>& entries() {
    static const std::vector<Entry> table = [] {
        std::vector<Entry> t;
        auto add = [&](std::string name, std::string def, std::string desc,
                       std::function<void(PipelineConfig&, const std::string&)> set) {
            t.push_back({{std::move(name), std::move(def), std::move(desc)}, std::move(set)});
        };
        add("seed", "1", "base seed; each stage derives its own stream",
            [](auto& c, auto& v) { c.seed = as_uint("seed", v); });
        add("toy.n_per_class", "1000", "training samples per class",
            [](auto& c, auto& v) { c.toy_n_per_class = as_positive("toy.n_per_class", v); });
        add("toy.test_per_class", "1000", "clean test samples per class",
            [](auto& c, auto& v) { c.toy_test_per_class = as_positive("toy.test_per_class", v); });
        const char* means[] = {"0.1,0.1", "0.8,0.1", "0.5,0.5"};
        for (std::size_t cls = 0; cls < 3; ++cls) {
            const std::string prefix = "toy.class" + std::to_string(cls);
            add(prefix + ".mean", means[cls], "Gaussian mean (x,y) of class " + std::to_string(cls),
                [cls, k = prefix + ".mean"](auto& c, auto& v) { set_gaussian(c, cls, true, k, v); });
            add(prefix + ".std", "0.1,0.1", "per-axis standard deviation of class " + std::to_string(cls),
                [cls, k = prefix + ".std"](auto& c, auto& v) { set_gaussian(c, cls, false, k, v); });
        }
        add("noise.kind", "cyclic", "none | uniform | random_asym | cyclic | semantic | matrix",
            [](auto& c, auto& v) {
                const auto s = trim(v);
                if (s == "none") c.noise_model = NoiseModel::None;
                else if (s == "uniform") c.noise_model = NoiseModel::Uniform;
                else if (s == "random_asym") c.noise_model = NoiseModel::RandomAsymmetric;
                else if (s == "cyclic") c.noise_model = NoiseModel::Cyclic;
                else if (s == "semantic") c.noise_model = NoiseModel::Semantic;
                else if (s == "matrix") c.noise_model = NoiseModel::MatrixFile;
                else bad("noise.kind", "unknown noise kind '" + v + "'");
            });
        add("noise.rate", "0.3", "noise rate r in [0, 1]", [](auto& c, auto& v) {
            double r = as_double("noise.rate", v);
            if (!(r >= 0.0 && r <= 1.0)) bad("noise.rate", "must lie in [0, 1], got " + trim(v));
            c.noise_rate = r;
        });
        add("noise.pairs", "", "semantic pairs a:b separated by commas, e.g. 9:1,2:0", [](auto& c, auto& v) {
            c.noise_pairs.clear();
            for (const auto& item : split_list(v, ',')) {
                auto ab = split_list(item, ':');
                if (ab.size() != 2) bad("noise.pairs", "expected a:b, got '" + item + "'");
                c.noise_pairs.emplace_back(as_uint("noise.pairs", ab[0]), as_uint("noise.pairs", ab[1]));
            }
        });
        add("noise.matrix", "", "transition matrix file used when noise.kind = matrix",
            [](auto& c, auto& v) { c.noise_matrix = trim(v); });
        add("prelim.hidden", "16,8", "hidden layer widths of the preliminary network",
            [](auto& c, auto& v) { c.prelim_hidden = as_positive_list("prelim.hidden", v, false); });
        add("prelim.learning_rate", "0.1", "SGD learning rate",
            [](auto& c, auto& v) { c.prelim_train.learning_rate = as_positive_double("prelim.learning_rate", v); });
        add("prelim.epochs", "200", "training epochs",
            [](auto& c, auto& v) { c.prelim_train.epochs = as_uint("prelim.epochs", v); });
        add("prelim.batch_size", "32", "minibatch size",
            [](auto& c, auto& v) { c.prelim_train.batch_size = as_positive("prelim.batch_size", v); });
        add("knet.mode", "random", "random (k drawn per batch) | fixed", [](auto& c, auto& v) {
            const auto s = trim(v);
            if (s == "random") {
                c.knet_fixed = false;
            } else if (s == "fixed") {
                c.knet_fixed = true;
            } else {
                bad("knet.mode", "expected random or fixed, got '" + v + "'");
            }
        });
        add("knet.k_min", "1", "lower end of the random k range",
            [](auto& c, auto& v) { c.knet_range.k_min = as_positive("knet.k_min", v); });
        add("knet.k_max", "101", "upper end of the random k range",
            [](auto& c, auto& v) { c.knet_range.k_max = as_positive("knet.k_max", v); });
        add("knet.k", "1", "k of the fixed kNet",
            [](auto& c, auto& v) { c.knet_fixed_k = as_positive("knet.k", v); });
        add("knet.train_fixed", "true", "reproduce-toy also trains a fixed kNet at knet.k",
            [](auto& c, auto& v) { c.knet_train_fixed = as_bool("knet.train_fixed", v); });
        add("knet.learning_rate", "0.05", "SGD learning rate",
            [](auto& c, auto& v) { c.knet_train.learning_rate = as_positive_double("knet.learning_rate", v); });
        add("knet.epochs", "200", "training epochs",
            [](auto& c, auto& v) { c.knet_train.epochs = as_uint("knet.epochs", v); });
        add("knet.batch_size", "32", "minibatch size (k is drawn once per batch)",
            [](auto& c, auto& v) { c.knet_train.batch_size = as_positive("knet.batch_size", v); });
        add("knet.loss", "ce", "ce (cross-entropy) | kl", [](auto& c, auto& v) {
            const auto s = trim(v);
            if (s == "ce") c.knet_train.loss = LossKind::CrossEntropy;
            else if (s == "kl") c.knet_train.loss = LossKind::KLDivergence;
            else bad("knet.loss", "expected ce or kl, got '" + v + "'");
        });
        add("knet.include_self", "true", "training targets count the sample as its own neighbor",
            [](auto& c, auto& v) { c.knet_include_self = as_bool("knet.include_self", v); });
        add("train.bn_momentum", "0.9", "batch-norm running-statistics momentum in (0, 1)", [](auto& c, auto& v) {
            c.prelim_train.bn_momentum = c.knet_train.bn_momentum = as_unit_open("train.bn_momentum", v);
        });
        add("train.bn_epsilon", "1e-05", "batch-norm variance floor", [](auto& c, auto& v) {
            c.prelim_train.bn_epsilon = c.knet_train.bn_epsilon = as_positive_double("train.bn_epsilon", v);
        });
        add("train.init_scale", "1", "weights start uniform in [-s/sqrt(in), s/sqrt(in)]", [](auto& c, auto& v) {
            c.prelim_train.weight_init_scale = c.knet_train.weight_init_scale =
                as_positive_double("train.init_scale", v);
        });
        add("knn.metric", "l1", "l1 | l2", [](auto& c, auto& v) {
            const auto s = trim(v);
            if (s == "l1") c.knn_metric = Metric::L1;
            else if (s == "l2") c.knn_metric = Metric::L2;
            else bad("knn.metric", "expected l1 or l2, got '" + v + "'");
        });
        add("eval.ks", "1,19,49", "k values for accuracy tables and rasters",
            [](auto& c, auto& v) { c.eval_ks = as_positive_list("eval.ks", v, false); });
        add("eval.curve_ks", "1,5,11,21,31,41,51,61,71,81,91,101", "k values of the kNN-vs-kNet curves",
            [](auto& c, auto& v) { c.curve_ks = as_positive_list("eval.curve_ks", v, false); });
        add("eval.bbox", "-0.2,-0.2,1.2,1.2", "raster bounds xmin,ymin,xmax,ymax", [](auto& c, auto& v) {
            auto b = as_doubles("eval.bbox", v, 4);
            if (!(b[2] > b[0] && b[3] > b[1])) bad("eval.bbox", "max must exceed min on both axes");
            c.bbox = {b[0], b[1], b[2], b[3]};
        });
        add("eval.resolution", "300,300", "raster width,height", [](auto& c, auto& v) {
            auto r = as_positive_list("eval.resolution", v, false);
            if (r.size() != 2) bad("eval.resolution", "expected width,height");
            c.raster_width = r[0];
            c.raster_height = r[1];
        });
        add("out_dir", "out", "directory for pipeline artifacts", [](auto& c, auto& v) {
            if (trim(v).empty()) bad("out_dir", "must not be empty");
            c.out_dir = trim(v);
        });
        return t;
    }();
    return table;
}

void validate(const PipelineConfig& cfg) {
    if (cfg.knet_range.k_min > cfg.knet_range.k_max) {
        throw ConfigError("knet.k_min: must not exceed knet.k_max");
    }
    if (cfg.noise_model == NoiseModel::MatrixFile && cfg.noise_matrix.empty()) {
        throw ConfigError("noise.matrix: required when noise.kind = matrix");
    }
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = [] {
        std::vector<ConfigKey> out;
        for (const auto& e : entries()) out.push_back(e.key);
        return out;
    }();
    return keys;
}

void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& e : entries()) {
        if (e.key.name == key) {
            e.set(cfg, value);
            return;
        }
    }
    throw ConfigError(key + ": unknown configuration key");
}

PipelineConfig parse_config_text(const std::string& text,
                                 const std::vector<std::pair<std::string, std::string>>& overrides) {
    PipelineConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        set_config_value(cfg, trim(std::string_view(line).substr(0, eq)), trim(std::string_view(line).substr(eq + 1)));
    }
    for (const auto& [key, value] : overrides) set_config_value(cfg, key, value);
    validate(cfg);
    return cfg;
}

PipelineConfig parse_config(const std::optional<std::filesystem::path>& path,
                            const std::vector<std::pair<std::string, std::string>>& overrides) {
    std::string text;
    if (path) {
        std::ifstream in(*path);
        if (!in) throw ConfigError("cannot read config file " + path->string());
        std::ostringstream buf;
        buf << in.rdbuf();
        text = buf.str();
    }
    return parse_config_text(text, overrides);
}

TrainConfig prelim_train_config(const PipelineConfig& cfg) {
    TrainConfig t = cfg.prelim_train;
    t.seed = derive_seed(cfg.seed, stage::kPrelim);
    t.loss = LossKind::CrossEntropy;
    return t;
}

TrainConfig knet_train_config(const PipelineConfig& cfg) {
    TrainConfig t = cfg.knet_train;
    t.seed = derive_seed(cfg.seed, stage::kKnet);
    return t;
}

KTrainMode knet_mode(const PipelineConfig& cfg) {
    if (cfg.knet_fixed) return FixedK{cfg.knet_fixed_k};
    return cfg.knet_range;
}

KnetOptions knet_options(const PipelineConfig& cfg) {
    KnetOptions o;
    o.include_self = cfg.knet_include_self;
    o.metric = cfg.knn_metric;
    return o;
}

}  // namespace knet
