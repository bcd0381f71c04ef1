#include "knet/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>

#include "knet/config.hpp"
#include "knet/data.hpp"
#include "knet/errors.hpp"
#include "knet/eval.hpp"
#include "knet/knet_model.hpp"
#include "knet/knn.hpp"
#include "knet/noise.hpp"
#include "knet/pipeline.hpp"
#include "knet/prelim.hpp"
#include "knet/rng.hpp"

namespace knet::cli {

namespace {

int exit_code_for(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Config: return kConfigError;
    case ErrorKind::Numeric:
    case ErrorKind::DegenerateBatch: return kNumericError;
    default: return kDataError;
    }
}

struct Context {
    std::ostream& out;
    const PipelineConfig& cfg;

    void wrote(const std::filesystem::path& p) const { out << "wrote " << p.string() << '\n'; }
};

std::vector<std::size_t> ks_or_default(const std::vector<std::size_t>& flag, const PipelineConfig& cfg) {
    return flag.empty() ? cfg.eval_ks : flag;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"kNN and kNet over penultimate-layer embeddings", "knet"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> sets;
    app.add_option("--config", config_path, "file of 'key = value' lines");
    app.add_option("--set", sets, "override a config key, as key=value (repeatable)");
    std::map<std::string, std::string> key_flags;
    for (const auto& key : config_keys()) {
        app.add_option("--" + key.name, key_flags[key.name], key.description + " [" + key.default_value + "]");
    }

    // Subcommand options.
    std::string in, out_path, train, test, model, prelim_path, knet_path, queries, out_dir, split_name = "train";
    std::string record_path, matrix_out, system = "knet", memory_out;
    std::vector<std::size_t> ks;
    std::size_t k = 0;

    auto sub = [&](const char* name, const char* help) {
        auto* s = app.add_subcommand(name, help);
        s->fallthrough();
        return s;
    };
    auto* gen_toy_cmd = sub("gen-toy", "sample the three-Gaussian toy dataset");
    gen_toy_cmd->add_option("--out", out_path, "dataset file")->required();
    gen_toy_cmd->add_option("--split", split_name, "train or test (independent seed streams)")
        ->check(CLI::IsMember({"train", "test"}));

    auto* noise_cmd = sub("inject-noise", "corrupt dataset labels with the configured noise model");
    noise_cmd->add_option("--in", in, "clean dataset")->required();
    noise_cmd->add_option("--out", out_path, "noisy dataset")->required();
    noise_cmd->add_option("--record", record_path, "per-sample flip record (CSV)");
    noise_cmd->add_option("--matrix-out", matrix_out, "write the transition matrix used");

    auto* prelim_cmd = sub("train-prelim", "train the preliminary classifier on noisy labels");
    prelim_cmd->add_option("--train", train, "noisy training dataset")->required();
    prelim_cmd->add_option("--out", out_path, "model file")->required();

    auto* extract_cmd = sub("extract-features", "write penultimate-layer embeddings of a dataset");
    extract_cmd->add_option("--model", model, "preliminary model")->required();
    extract_cmd->add_option("--in", in, "dataset")->required();
    extract_cmd->add_option("--out", out_path, "embedding file")->required();

    auto* knn_cmd = sub("knn-eval", "kNN accuracy of test embeddings against training embeddings");
    knn_cmd->add_option("--train", train, "training embeddings (noisy labels)")->required();
    knn_cmd->add_option("--test", test, "test embeddings (clean labels)")->required();
    knn_cmd->add_option("--k", ks, "k values (default eval.ks)");
    knn_cmd->add_option("--out", out_path, "accuracy CSV");

    auto* knet_cmd = sub("train-knet", "train kNet on training embeddings");
    knet_cmd->add_option("--train", train, "training embeddings")->required();
    knet_cmd->add_option("--out", out_path, "kNet model file")->required();

    auto* eval_cmd = sub("eval", "accuracy table for the network, kNN and kNet");
    eval_cmd->add_option("--prelim", prelim_path, "preliminary model")->required();
    eval_cmd->add_option("--train", train, "noisy training dataset (kNN memory)")->required();
    eval_cmd->add_option("--test", test, "clean test dataset")->required();
    eval_cmd->add_option("--knet", knet_path, "kNet model")->required();
    eval_cmd->add_option("--k", ks, "k values (default eval.ks)");
    eval_cmd->add_option("--out", out_path, "accuracy CSV")->required();
    eval_cmd->add_option("--memory-out", memory_out, "memory report CSV");

    auto* boundary_cmd = sub("boundary", "decision raster over the 2-D input plane");
    boundary_cmd->add_option("--prelim", prelim_path, "preliminary model")->required();
    boundary_cmd->add_option("--system", system, "net, knn or knet")->check(CLI::IsMember({"net", "knn", "knet"}));
    boundary_cmd->add_option("--train", train, "noisy training dataset (for knn)");
    boundary_cmd->add_option("--knet", knet_path, "kNet model (for knet)");
    boundary_cmd->add_option("--k", k, "k for knn/knet");
    boundary_cmd->add_option("--out", out_path, "P3 pixmap")->required();

    auto* compare_cmd = sub("compare-pdf", "kNN-vs-kNet curves over k");
    compare_cmd->add_option("--train", train, "training embeddings")->required();
    compare_cmd->add_option("--queries", queries, "query embeddings")->required();
    compare_cmd->add_option("--knet", knet_path, "kNet model")->required();
    compare_cmd->add_option("--out-dir", out_dir, "directory for the curve CSVs")->required();

    auto* toy_cmd = sub("reproduce-toy", "end-to-end toy experiment: 8 rasters, curves, accuracy table");
    toy_cmd->add_option("--out-dir", out_dir, "artifact directory (overrides out_dir)");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        if (!reversed.empty()) reversed.pop_back();  // program name
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kSuccess;
    } catch (const CLI::ParseError& e) {
        err << "knet: " << e.what() << '\n';
        return kConfigError;
    }

    auto* active = app.get_subcommands().front();
    const std::string name = active->get_name();
    try {
        std::vector<std::pair<std::string, std::string>> overrides;
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
            overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
        }
        for (const auto& key : config_keys()) {
            if (app.count("--" + key.name)) overrides.emplace_back(key.name, key_flags[key.name]);
        }
        if (name == "reproduce-toy" && !out_dir.empty()) overrides.emplace_back("out_dir", out_dir);
        const PipelineConfig cfg =
            parse_config(config_path.empty() ? std::nullopt : std::optional<std::filesystem::path>(config_path),
                         overrides);
        Context ctx{out, cfg};

        if (name == "gen-toy") {
            save_dataset(split_name == "test" ? make_toy_test(cfg) : make_toy_train(cfg), out_path);
            ctx.wrote(out_path);
        } else if (name == "inject-noise") {
            const auto clean = load_dataset(in);
            const auto tm = make_noise_matrix(cfg, clean.num_labels);
            const auto noisy = apply_noise(clean, tm, derive_seed(cfg.seed, stage::kNoise));
            save_dataset(noisy.dataset, out_path);
            ctx.wrote(out_path);
            if (!record_path.empty()) {
                std::ofstream rec(record_path, std::ios::binary);
                if (!rec) throw IoError("cannot write " + record_path);
                rec << "index,original,resulting,flipped\n";
                for (std::size_t i = 0; i < noisy.record.size(); ++i) {
                    const auto& f = noisy.record[i];
                    rec << i << ',' << f.original << ',' << f.resulting << ',' << (f.flipped ? 1 : 0) << '\n';
                }
                ctx.wrote(record_path);
            }
            if (!matrix_out.empty()) {
                tm.save_file(matrix_out);
                ctx.wrote(matrix_out);
            }
        } else if (name == "train-prelim") {
            const auto net = train_prelim_stage(cfg, load_dataset(train));
            net.save_file(out_path);
            ctx.wrote(out_path);
        } else if (name == "extract-features") {
            const auto net = DenseNet::load_file(model);
            save_embeddings(extract_penultimate(net, load_dataset(in)), out_path);
            ctx.wrote(out_path);
        } else if (name == "knn-eval") {
            const KnnIndex index(load_embeddings(train), cfg.knn_metric);
            const auto test_set = load_dataset(test);
            std::vector<AccuracyRow> rows;
            for (auto kk : ks_or_default(ks, cfg)) {
                rows.push_back({"knn", kk, accuracy(Classifier::knn(index, kk), test_set), index.stored_values()});
            }
            if (out_path.empty()) {
                write_accuracy_csv(out, rows);
            } else {
                write_accuracy_csv_file(out_path, rows);
                ctx.wrote(out_path);
            }
        } else if (name == "train-knet") {
            const auto model_out = train_knet_stage(cfg, load_embeddings(train));
            model_out.save_file(out_path);
            ctx.wrote(out_path);
        } else if (name == "eval") {
            const auto prelim = DenseNet::load_file(prelim_path);
            const auto knet_model = KnetModel::load_file(knet_path);
            const auto train_set = load_dataset(train);
            const auto test_set = load_dataset(test);
            const KnnIndex index(extract_penultimate(prelim, train_set), cfg.knn_metric);
            std::vector<AccuracyRow> rows;
            rows.push_back({"net", 0, accuracy(Classifier::network(prelim), test_set), prelim.param_count()});
            for (auto kk : ks_or_default(ks, cfg)) {
                rows.push_back({"knn", kk, accuracy(Classifier::knn(index, kk, &prelim), test_set),
                                prelim.param_count() + index.stored_values()});
            }
            for (auto kk : ks_or_default(ks, cfg)) {
                rows.push_back({"knet", kk, accuracy(Classifier::knet(knet_model, kk, &prelim), test_set),
                                prelim.param_count() + knet_model.param_count()});
            }
            write_accuracy_csv_file(out_path, rows);
            ctx.wrote(out_path);
            if (!memory_out.empty()) {
                std::ofstream mem(memory_out, std::ios::binary);
                if (!mem) throw IoError("cannot write " + memory_out);
                write_memory_report(mem, memory_report(index, knet_model, prelim));
                ctx.wrote(memory_out);
            }
        } else if (name == "boundary") {
            const auto prelim = DenseNet::load_file(prelim_path);
            const std::size_t kk = k ? k : cfg.eval_ks.front();
            LabelGrid grid;
            if (system == "net") {
                grid = boundary_raster(Classifier::network(prelim), cfg.bbox, cfg.raster_width, cfg.raster_height);
            } else if (system == "knn") {
                if (train.empty()) throw ConfigError("--train: required for --system knn");
                const KnnIndex index(extract_penultimate(prelim, load_dataset(train)), cfg.knn_metric);
                grid = boundary_raster(Classifier::knn(index, kk, &prelim), cfg.bbox, cfg.raster_width,
                                       cfg.raster_height);
            } else {
                if (knet_path.empty()) throw ConfigError("--knet: required for --system knet");
                const auto knet_model = KnetModel::load_file(knet_path);
                grid = boundary_raster(Classifier::knet(knet_model, kk, &prelim), cfg.bbox, cfg.raster_width,
                                       cfg.raster_height);
            }
            write_ppm_file(out_path, grid, prelim.output_dim());
            ctx.wrote(out_path);
        } else if (name == "compare-pdf") {
            const KnnIndex index(load_embeddings(train), cfg.knn_metric);
            const auto knet_model = KnetModel::load_file(knet_path);
            const auto q = load_embeddings(queries);
            std::filesystem::create_directories(out_dir);
            const std::filesystem::path dir = out_dir;
            write_curve_csv_file(dir / "mad_curve.csv", pdf_mad_curve(index, knet_model, q.vectors, cfg.curve_ks));
            ctx.wrote(dir / "mad_curve.csv");
            write_curve_csv_file(dir / "max_pdf_knn.csv", max_pdf_curve(index, q.vectors, cfg.curve_ks));
            ctx.wrote(dir / "max_pdf_knn.csv");
            write_curve_csv_file(dir / "max_pdf_knet.csv", max_pdf_curve(knet_model, q.vectors, cfg.curve_ks));
            ctx.wrote(dir / "max_pdf_knet.csv");
        } else if (name == "reproduce-toy") {
            const auto result = reproduce_toy(cfg, [&](const std::string& line) { err << line << '\n'; });
            for (const auto& p : result.artifacts) ctx.wrote(p);
        }
        return kSuccess;
    } catch (const Error& e) {
        err << "knet " << name << ": " << to_string(e.kind()) << ": " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::filesystem::filesystem_error& e) {
        err << "knet " << name << ": io error: " << e.what() << '\n';
        return kDataError;
    } catch (const std::exception& e) {
        err << "knet " << name << ": internal error: " << e.what() << '\n';
        return kInternalError;
    }
}

}  // namespace knet::cli
