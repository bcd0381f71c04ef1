#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "knet/config.hpp"
#include "knet/data.hpp"
#include "knet/eval.hpp"
#include "knet/knet_model.hpp"
#include "knet/noise.hpp"

namespace knet {

/// Fixed stage ids; each stage draws from derive_seed(seed, id).
namespace stage {
inline constexpr std::uint64_t kToyTrain = 1;
inline constexpr std::uint64_t kToyTest = 2;
inline constexpr std::uint64_t kNoise = 3;
inline constexpr std::uint64_t kNoiseTargets = 4;
inline constexpr std::uint64_t kPrelim = 5;
inline constexpr std::uint64_t kKnet = 6;
inline constexpr std::uint64_t kFixedKnet = 7;
}  // namespace stage

LabeledDataset make_toy_train(const PipelineConfig& cfg);
LabeledDataset make_toy_test(const PipelineConfig& cfg);

/// Transition matrix described by the noise.* keys for L labels.
TransitionMatrix make_noise_matrix(const PipelineConfig& cfg, std::size_t num_labels);

NoisyDataset inject_noise(const PipelineConfig& cfg, const LabeledDataset& clean);

DenseNet train_prelim_stage(const PipelineConfig& cfg, const LabeledDataset& noisy_train);

KnetModel train_knet_stage(const PipelineConfig& cfg, const EmbeddingSet& train_embeddings);
KnetModel train_fixed_knet_stage(const PipelineConfig& cfg, const EmbeddingSet& train_embeddings);

struct ToyReproduction {
    std::vector<AccuracyRow> accuracy;
    std::vector<CurvePoint> mad_curve;
    std::vector<CurvePoint> max_knn_curve;
    std::vector<CurvePoint> max_knet_curve;
    /// Panels keyed 'a'..'h': a noisy samples, b-d kNN, e network, f-h kNet.
    std::map<char, LabelGrid> rasters;
    MemoryReport memory;
    /// Every file written, in write order.
    std::vector<std::filesystem::path> artifacts;

    double accuracy_of(const std::string& system, std::size_t k = 0) const;
};

/// Runs the whole toy experiment and writes its artifacts into cfg.out_dir.
/// `log` receives one line per stage (may be empty).
ToyReproduction reproduce_toy(const PipelineConfig& cfg,
                              const std::function<void(const std::string&)>& log = {});

}  // namespace knet
