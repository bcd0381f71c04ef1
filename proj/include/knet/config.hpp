#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "knet/data.hpp"
#include "knet/eval.hpp"
#include "knet/knet_model.hpp"
#include "knet/knn.hpp"
#include "knet/nn.hpp"

namespace knet {

enum class NoiseModel { None, Uniform, RandomAsymmetric, Cyclic, Semantic, MatrixFile };

/// Every tunable of the pipeline. Field defaults are the documented defaults.
struct PipelineConfig {
    std::uint64_t seed = 1;

    std::size_t toy_n_per_class = 1000;
    std::size_t toy_test_per_class = 1000;
    std::array<GaussianSpec, 3> toy_specs = default_toy_specs();

    NoiseModel noise_model = NoiseModel::Cyclic;
    double noise_rate = 0.3;
    std::vector<std::pair<Label, Label>> noise_pairs;
    std::string noise_matrix;

    std::vector<std::size_t> prelim_hidden{16, 8};
    TrainConfig prelim_train{0.1, 32, 200};

    bool knet_fixed = false;
    RandomK knet_range{1, kDefaultKMax};
    std::size_t knet_fixed_k = 1;
    bool knet_train_fixed = true;
    TrainConfig knet_train{0.05, 32, 200};
    bool knet_include_self = true;

    Metric knn_metric = Metric::L1;

    std::vector<std::size_t> eval_ks{1, 19, 49};
    std::vector<std::size_t> curve_ks{1, 5, 11, 21, 31, 41, 51, 61, 71, 81, 91, 101};
    BoundingBox bbox{};
    std::size_t raster_width = 300;
    std::size_t raster_height = 300;

    std::string out_dir = "out";
};

struct ConfigKey {
    std::string name;
    std::string default_value;
    std::string description;
};

/// All recognized keys with their default values, in documentation order.
const std::vector<ConfigKey>& config_keys();

/// Sets one key from its text value. Throws ConfigError naming the key on an
/// unknown key, a type mismatch or a range violation.
void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value);

/// Reads "key = value" lines ('#' starts a comment; blank lines ignored).
/// `overrides` are applied after the file, in order.
PipelineConfig parse_config(const std::optional<std::filesystem::path>& path,
                            const std::vector<std::pair<std::string, std::string>>& overrides = {});

PipelineConfig parse_config_text(const std::string& text,
                                 const std::vector<std::pair<std::string, std::string>>& overrides = {});

/// Derived per-stage settings.
TrainConfig prelim_train_config(const PipelineConfig& cfg);
TrainConfig knet_train_config(const PipelineConfig& cfg);
KnetOptions knet_options(const PipelineConfig& cfg);
/// The configured training mode (knet.mode selects random range or fixed k).
KTrainMode knet_mode(const PipelineConfig& cfg);

}  // namespace knet
