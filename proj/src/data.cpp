#include "knet/data.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>

#include "knet/errors.hpp"
#include "knet/rng.hpp"
#include "text_io.hpp"

namespace knet {

void LabeledDataset::validate() const {
    if (labels.empty()) throw EmptyInputError("dataset is empty");
    if (vectors.rows() != labels.size()) {
        throw ShapeError("dataset has " + std::to_string(vectors.rows()) + " vectors but " +
                         std::to_string(labels.size()) + " labels");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= num_labels) {
            throw ValidationError("label " + std::to_string(labels[i]) + " of sample " + std::to_string(i) +
                                  " is not below L=" + std::to_string(num_labels));
        }
    }
}

std::array<GaussianSpec, 3> default_toy_specs() {
    return {{
        {{0.1, 0.1}, {0.1, 0.1}},
        {{0.8, 0.1}, {0.1, 0.1}},
        {{0.5, 0.5}, {0.1, 0.1}},
    }};
}

LabeledDataset gen_toy(std::size_t n_per_class, std::uint64_t seed, std::span<const GaussianSpec> specs) {
    if (n_per_class < 1) throw RangeError("n_per_class must be at least 1");
    if (specs.empty()) throw RangeError("at least one class spec is required");
    for (const auto& s : specs) {
        if (!(s.stddev[0] > 0.0 && s.stddev[1] > 0.0)) throw RangeError("standard deviations must be positive");
    }
    SplitMix64 rng(seed);
    LabeledDataset ds;
    ds.num_labels = specs.size();
    ds.vectors = Matrix(n_per_class * specs.size(), 2);
    ds.labels.reserve(n_per_class * specs.size());
    std::size_t row = 0;
    for (std::size_t c = 0; c < specs.size(); ++c) {
        for (std::size_t i = 0; i < n_per_class; ++i, ++row) {
            ds.vectors(row, 0) = specs[c].mean[0] + specs[c].stddev[0] * rng.normal();
            ds.vectors(row, 1) = specs[c].mean[1] + specs[c].stddev[1] * rng.normal();
            ds.labels.push_back(c);
        }
    }
    return ds;
}

void write_dataset(std::ostream& out, const LabeledDataset& ds) {
    out << "DATASET v1 n=" << ds.size() << " d=" << ds.dim() << " L=" << ds.num_labels << '\n';
    std::string line;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        line.clear();
        for (double v : ds.vectors.row(i)) {
            line += detail::format_double(v);
            line += ' ';
        }
        line += std::to_string(ds.labels[i]);
        line += '\n';
        out << line;
    }
}

LabeledDataset read_dataset(std::istream& in, const std::string& source) {
    detail::LineReader reader(in, source);
    std::string line;
    if (!reader.next(line)) throw EmptyInputError(source + ": file is empty");
    auto header = detail::split_ws(line);
    std::size_t n = 0, d = 0, L = 0;
    if (header.size() != 5 || header[0] != "DATASET" || header[1] != "v1" ||
        !detail::parse_keyed(header[2], "n", n) || !detail::parse_keyed(header[3], "d", d) ||
        !detail::parse_keyed(header[4], "L", L)) {
        reader.fail("expected header 'DATASET v1 n=<n> d=<d> L=<L>'");
    }
    if (n == 0) throw EmptyInputError(source + ": dataset declares zero samples");
    if (d == 0) reader.fail("dimension must be positive");

    LabeledDataset ds;
    ds.num_labels = L;
    ds.vectors = Matrix(n, d);
    ds.labels.resize(n);
    std::size_t row = 0;
    while (reader.next(line)) {
        auto parts = detail::split_ws(line);
        if (parts.empty()) continue;
        if (row >= n) reader.fail("more sample rows than the declared n=" + std::to_string(n));
        if (parts.size() != d + 1) {
            reader.fail("expected " + std::to_string(d + 1) + " fields, found " + std::to_string(parts.size()));
        }
        for (std::size_t j = 0; j < d; ++j) {
            if (!detail::parse_double(parts[j], ds.vectors(row, j))) {
                reader.fail("bad number '" + std::string(parts[j]) + "'");
            }
        }
        if (!detail::parse_int(parts[d], ds.labels[row])) reader.fail("bad label '" + std::string(parts[d]) + "'");
        if (ds.labels[row] >= L) {
            throw ValidationError(source + ":" + std::to_string(reader.line_no()) + ": label " +
                                  std::to_string(ds.labels[row]) + " is not below L=" + std::to_string(L));
        }
        ++row;
    }
    if (row != n) {
        throw ParseError(source + ":" + std::to_string(reader.line_no()) + ": header declares n=" +
                         std::to_string(n) + " but found " + std::to_string(row) + " rows");
    }
    return ds;
}

void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    write_dataset(out, ds);
    if (!out) throw IoError("failed writing " + path.string());
}

LabeledDataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    return read_dataset(in, path.string());
}

EmbeddingSet load_embeddings(const std::filesystem::path& path) { return load_dataset(path).as_embeddings(); }

void save_embeddings(const EmbeddingSet& es, const std::filesystem::path& path) {
    save_dataset(LabeledDataset{es.vectors, es.labels, es.num_labels, "embeddings"}, path);
}

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& ds, double test_fraction,
                                                std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw RangeError("test_fraction must lie in (0, 1)");
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    SplitMix64 rng(seed);
    rng.shuffle(std::span<std::size_t>(order));
    const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(ds.size()) * test_fraction));

    auto take = [&](std::span<const std::size_t> ids) {
        LabeledDataset part;
        part.num_labels = ds.num_labels;
        part.provenance = ds.provenance;
        part.vectors = ds.vectors.gather(ids);
        for (auto id : ids) part.labels.push_back(ds.labels[id]);
        return part;
    };
    std::span<const std::size_t> all(order);
    LabeledDataset test = take(all.first(n_test));
    LabeledDataset train = take(all.subspan(n_test));
    return {std::move(train), std::move(test)};
}

}  // namespace knet
