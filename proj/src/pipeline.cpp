#include "knet/pipeline.hpp"

#include <fstream>
#include <optional>

#include "knet/errors.hpp"
#include "knet/prelim.hpp"
#include "knet/rng.hpp"

namespace knet {

LabeledDataset make_toy_train(const PipelineConfig& cfg) {
    return gen_toy(cfg.toy_n_per_class, derive_seed(cfg.seed, stage::kToyTrain), cfg.toy_specs);
}

LabeledDataset make_toy_test(const PipelineConfig& cfg) {
    return gen_toy(cfg.toy_test_per_class, derive_seed(cfg.seed, stage::kToyTest), cfg.toy_specs);
}

TransitionMatrix make_noise_matrix(const PipelineConfig& cfg, std::size_t num_labels) {
    switch (cfg.noise_model) {
    case NoiseModel::None: return make_uniform(0.0, std::max<std::size_t>(num_labels, 2));
    case NoiseModel::Uniform: return make_uniform(cfg.noise_rate, num_labels);
    case NoiseModel::RandomAsymmetric:
        return make_random_asym(cfg.noise_rate, num_labels, derive_seed(cfg.seed, stage::kNoiseTargets));
    case NoiseModel::Cyclic: return make_random_asym(cfg.noise_rate, num_labels, 0, true);
    case NoiseModel::Semantic: return make_semantic(cfg.noise_pairs, cfg.noise_rate, num_labels);
    case NoiseModel::MatrixFile: {
        auto tm = TransitionMatrix::load_file(cfg.noise_matrix);
        if (tm.num_labels() < num_labels) throw ValidationError("transition matrix has fewer labels than the dataset");
        return tm;
    }
    }
    throw ConfigError("noise.kind: unsupported");
}

NoisyDataset inject_noise(const PipelineConfig& cfg, const LabeledDataset& clean) {
    return apply_noise(clean, make_noise_matrix(cfg, clean.num_labels), derive_seed(cfg.seed, stage::kNoise));
}

DenseNet train_prelim_stage(const PipelineConfig& cfg, const LabeledDataset& noisy_train) {
    PrelimSpec spec{cfg.prelim_hidden, noisy_train.dim(), noisy_train.num_labels};
    return train_prelim(noisy_train, spec, prelim_train_config(cfg));
}

KnetModel train_knet_stage(const PipelineConfig& cfg, const EmbeddingSet& train_embeddings) {
    return train_knet(train_embeddings, knet_mode(cfg), knet_train_config(cfg), knet_options(cfg));
}

KnetModel train_fixed_knet_stage(const PipelineConfig& cfg, const EmbeddingSet& train_embeddings) {
    TrainConfig t = knet_train_config(cfg);
    t.seed = derive_seed(cfg.seed, stage::kFixedKnet);
    return train_knet(train_embeddings, FixedK{cfg.knet_fixed_k}, t, knet_options(cfg));
}

double ToyReproduction::accuracy_of(const std::string& system, std::size_t k) const {
    for (const auto& row : accuracy) {
        if (row.system == system && row.k == k) return row.accuracy;
    }
    throw RangeError("no accuracy row for " + system + " k=" + std::to_string(k));
}

ToyReproduction reproduce_toy(const PipelineConfig& cfg, const std::function<void(const std::string&)>& log) {
    auto note = [&](const std::string& s) {
        if (log) log(s);
    };
    if (cfg.eval_ks.size() != 3) throw ConfigError("eval.ks: reproduce-toy needs exactly three k values");

    const std::filesystem::path out = cfg.out_dir;
    std::filesystem::create_directories(out);
    ToyReproduction result;
    auto artifact = [&](const std::string& name) {
        result.artifacts.push_back(out / name);
        return out / name;
    };

    const LabeledDataset clean_train = make_toy_train(cfg);
    const LabeledDataset test = make_toy_test(cfg);
    const NoisyDataset noisy = inject_noise(cfg, clean_train);
    std::size_t flips = 0;
    for (const auto& f : noisy.record) flips += f.flipped;
    note("data: " + std::to_string(clean_train.size()) + " train, " + std::to_string(test.size()) + " test, " +
         std::to_string(flips) + " labels flipped");
    save_dataset(clean_train, artifact("train_clean.txt"));
    save_dataset(noisy.dataset, artifact("train_noisy.txt"));
    save_dataset(test, artifact("test_clean.txt"));

    const DenseNet prelim = train_prelim_stage(cfg, noisy.dataset);
    prelim.save_file(artifact("prelim.model"));
    note("prelim: trained " + spec_to_tokens(prelim.spec()));

    const EmbeddingSet train_emb = extract_penultimate(prelim, noisy.dataset);
    const EmbeddingSet test_emb = extract_penultimate(prelim, test);
    const KnnIndex index(train_emb, cfg.knn_metric);

    const KnetModel knet = train_knet_stage(cfg, train_emb);
    knet.save_file(artifact("knet.model"));
    note("knet: trained " + spec_to_tokens(knet.net().spec()));

    std::optional<KnetModel> fixed;
    if (cfg.knet_train_fixed) {
        fixed = train_fixed_knet_stage(cfg, train_emb);
        fixed->save_file(artifact("fixed_knet.model"));
        note("fixed knet: trained with k=" + std::to_string(cfg.knet_fixed_k));
    }

    // Accuracy on clean test labels.
    const auto net_clf = Classifier::network(prelim);
    result.accuracy.push_back({"net", 0, accuracy(net_clf, test), prelim.param_count()});
    const std::size_t knn_extra = index.stored_values();
    for (auto k : cfg.eval_ks) {
        result.accuracy.push_back(
            {"knn", k, accuracy(Classifier::knn(index, k, &prelim), test), prelim.param_count() + knn_extra});
    }
    for (auto k : cfg.eval_ks) {
        result.accuracy.push_back(
            {"knet", k, accuracy(Classifier::knet(knet, k, &prelim), test), prelim.param_count() + knet.param_count()});
    }
    if (fixed) {
        for (auto k : cfg.eval_ks) {
            result.accuracy.push_back({"fixed_knet", k, accuracy(Classifier::knet(*fixed, k, &prelim), test),
                                       prelim.param_count() + fixed->param_count()});
        }
    }
    write_accuracy_csv_file(artifact("accuracy.csv"), result.accuracy);
    note("eval: accuracy table written");

    // kNN vs kNet agreement on the test embeddings.
    const auto knn_stack = knn_pdfs(index, test_emb.vectors, cfg.curve_ks);
    std::vector<Matrix> knet_stack;
    for (auto k : cfg.curve_ks) knet_stack.push_back(knet.predict(test_emb.vectors, k));
    result.mad_curve = pdf_mad_curve(knn_stack, knet_stack, cfg.curve_ks);
    result.max_knn_curve = max_pdf_curve(index, test_emb.vectors, cfg.curve_ks);
    result.max_knet_curve = max_pdf_curve(knet, test_emb.vectors, cfg.curve_ks);
    write_curve_csv_file(artifact("mad_curve.csv"), result.mad_curve);
    write_curve_csv_file(artifact("max_pdf_knn.csv"), result.max_knn_curve);
    write_curve_csv_file(artifact("max_pdf_knet.csv"), result.max_knet_curve);

    result.memory = memory_report(index, knet, prelim);
    {
        std::ofstream mem(artifact("memory.csv"), std::ios::binary);
        write_memory_report(mem, result.memory);
    }

    // Decision rasters, panels a..h.
    const auto W = cfg.raster_width, H = cfg.raster_height;
    const std::size_t L = noisy.dataset.num_labels;
    auto emit = [&](char panel, LabelGrid grid) {
        write_ppm_file(artifact(std::string(1, panel) + ".ppm"), grid, L);
        result.rasters.emplace(panel, std::move(grid));
    };
    emit('a', scatter_raster(noisy.dataset, cfg.bbox, W, H));
    for (std::size_t j = 0; j < 3; ++j) {
        emit(static_cast<char>('b' + j), boundary_raster(Classifier::knn(index, cfg.eval_ks[j], &prelim), cfg.bbox, W, H));
    }
    emit('e', boundary_raster(net_clf, cfg.bbox, W, H));
    for (std::size_t j = 0; j < 3; ++j) {
        emit(static_cast<char>('f' + j), boundary_raster(Classifier::knet(knet, cfg.eval_ks[j], &prelim), cfg.bbox, W, H));
    }
    note("rasters: 8 panels written");
    return result;
}

}  // namespace knet
