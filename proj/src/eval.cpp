#include "knet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "knet/errors.hpp"
#include "knet/prelim.hpp"
#include "text_io.hpp"

namespace knet {

namespace {

void check_ks(std::span<const std::size_t> ks, std::size_t n) {
    for (auto k : ks) {
        if (k < 1 || k > n) throw RangeError("k=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
    }
}

template <typename Open>
void with_output_file(const std::filesystem::path& path, Open&& write) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    write(out);
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

// ---------------------------------------------------------------------------
// Classifier

Classifier Classifier::network(const DenseNet& net) {
    return Classifier("net", 0, net.input_dim(), net.output_dim(), [&net](const Matrix& x) { return net.infer(x); });
}

Classifier Classifier::knn(const KnnIndex& index, std::size_t k, const DenseNet* embedder) {
    if (k < 1 || k > index.size()) throw RangeError("kNN k=" + std::to_string(k) + " outside [1, n]");
    const std::size_t input_dim = embedder ? embedder->input_dim() : index.dim();
    return Classifier("knn", k, input_dim, index.num_labels(), [&index, k, embedder](const Matrix& x) {
        const Matrix q = embedder ? embed(*embedder, x) : x;
        const std::size_t ks[] = {k};
        return std::move(knn_pdfs(index, q, ks).front());
    });
}

Classifier Classifier::knet(const KnetModel& model, std::size_t k, const DenseNet* embedder) {
    if (k < 1) throw RangeError("kNet k must be at least 1");
    const std::size_t input_dim = embedder ? embedder->input_dim() : model.spec().dim;
    return Classifier("knet", k, input_dim, model.spec().num_labels, [&model, k, embedder](const Matrix& x) {
        return model.predict(embedder ? embed(*embedder, x) : x, k);
    });
}

Classifier Classifier::from_function(std::string name, std::size_t input_dim, std::size_t num_labels, PdfFn fn) {
    return Classifier(std::move(name), 0, input_dim, num_labels, std::move(fn));
}

Matrix Classifier::predict_pdf(const Matrix& inputs) const {
    if (inputs.cols() != input_dim_) {
        throw ShapeError(name_ + " expects input width " + std::to_string(input_dim_) + ", got " +
                         std::to_string(inputs.cols()));
    }
    return fn_(inputs);
}

std::vector<Label> Classifier::predict_labels(const Matrix& inputs) const {
    const Matrix pdf = predict_pdf(inputs);
    std::vector<Label> labels(pdf.rows());
    for (std::size_t r = 0; r < pdf.rows(); ++r) labels[r] = argmax_label(pdf.row(r));
    return labels;
}

double accuracy(const Classifier& clf, const LabeledDataset& test) {
    test.validate();
    const auto predicted = clf.predict_labels(test.vectors);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == test.labels[i];
    return static_cast<double>(hits) / static_cast<double>(test.size());
}

// ---------------------------------------------------------------------------
// kNN vs kNet curves

std::vector<Matrix> knn_pdfs(const KnnIndex& index, const Matrix& queries, std::span<const std::size_t> ks) {
    check_ks(ks, index.size());
    if (queries.cols() != index.dim()) throw ShapeError("query width does not match the index");
    const std::size_t L = index.num_labels();
    const std::size_t k_top = ks.empty() ? 0 : *std::max_element(ks.begin(), ks.end());
    std::vector<Matrix> out(ks.size(), Matrix(queries.rows(), L));
    if (k_top == 0) return out;
    std::vector<double> counts(L);
    for (std::size_t q = 0; q < queries.rows(); ++q) {
        // Neighbor lists for smaller k are prefixes of the k_top list.
        const auto labels = index.labels_of(index.query(queries.row(q), k_top));
        for (std::size_t j = 0; j < ks.size(); ++j) {
            std::fill(counts.begin(), counts.end(), 0.0);
            for (std::size_t i = 0; i < ks[j]; ++i) counts[labels[i]] += 1.0;
            auto row = out[j].row(q);
            for (std::size_t c = 0; c < L; ++c) row[c] = counts[c] / static_cast<double>(ks[j]);
        }
    }
    return out;
}

std::vector<CurvePoint> pdf_mad_curve(std::span<const Matrix> a, std::span<const Matrix> b,
                                      std::span<const std::size_t> ks) {
    if (a.size() != ks.size() || b.size() != ks.size()) throw ShapeError("one pdf matrix per k is required");
    std::vector<CurvePoint> curve;
    for (std::size_t j = 0; j < ks.size(); ++j) {
        if (a[j].rows() != b[j].rows() || a[j].cols() != b[j].cols()) throw ShapeError("pdf matrices differ in shape");
        const double L = static_cast<double>(a[j].cols());
        double total = 0.0;
        for (std::size_t q = 0; q < a[j].rows(); ++q) {
            double row_sum = 0.0;
            for (std::size_t c = 0; c < a[j].cols(); ++c) row_sum += std::abs(a[j](q, c) - b[j](q, c));
            total += row_sum / L;
        }
        curve.push_back({ks[j], a[j].rows() ? total / static_cast<double>(a[j].rows()) : 0.0});
    }
    return curve;
}

std::vector<CurvePoint> pdf_mad_curve(const KnnIndex& index, const KnetModel& model, const Matrix& queries,
                                      std::span<const std::size_t> ks) {
    auto knn = knn_pdfs(index, queries, ks);
    std::vector<Matrix> knet;
    knet.reserve(ks.size());
    for (auto k : ks) knet.push_back(model.predict(queries, k));
    return pdf_mad_curve(knn, knet, ks);
}

namespace {

double mean_row_max(const Matrix& pdf) {
    if (pdf.rows() == 0) return 0.0;
    double total = 0.0;
    for (std::size_t q = 0; q < pdf.rows(); ++q) {
        auto row = pdf.row(q);
        total += *std::max_element(row.begin(), row.end());
    }
    return total / static_cast<double>(pdf.rows());
}

}  // namespace

std::vector<CurvePoint> max_pdf_curve(const KnnIndex& index, const Matrix& queries, std::span<const std::size_t> ks) {
    auto pdfs = knn_pdfs(index, queries, ks);
    std::vector<CurvePoint> curve;
    for (std::size_t j = 0; j < ks.size(); ++j) curve.push_back({ks[j], mean_row_max(pdfs[j])});
    return curve;
}

std::vector<CurvePoint> max_pdf_curve(const KnetModel& model, const Matrix& queries, std::span<const std::size_t> ks) {
    std::vector<CurvePoint> curve;
    for (auto k : ks) {
        if (k < 1) throw RangeError("k must be at least 1");
        curve.push_back({k, mean_row_max(model.predict(queries, k))});
    }
    return curve;
}

// ---------------------------------------------------------------------------
// Rasters

Matrix grid_points(const BoundingBox& bbox, std::size_t width, std::size_t height) {
    if (width < 1 || height < 1) throw RangeError("raster resolution must be at least 1x1");
    if (!(bbox.xmax > bbox.xmin && bbox.ymax > bbox.ymin)) throw RangeError("bounding box is empty");
    Matrix pts(width * height, 2);
    const double dx = (bbox.xmax - bbox.xmin) / static_cast<double>(width);
    const double dy = (bbox.ymax - bbox.ymin) / static_cast<double>(height);
    for (std::size_t r = 0; r < height; ++r) {
        for (std::size_t c = 0; c < width; ++c) {
            pts(r * width + c, 0) = bbox.xmin + (static_cast<double>(c) + 0.5) * dx;
            pts(r * width + c, 1) = bbox.ymin + (static_cast<double>(r) + 0.5) * dy;
        }
    }
    return pts;
}

LabelGrid boundary_raster(const Classifier& clf, const BoundingBox& bbox, std::size_t width, std::size_t height) {
    if (clf.input_dim() != 2) {
        throw UnsupportedError("boundary rasters need a 2-D classifier input, " + clf.name() + " takes " +
                               std::to_string(clf.input_dim()));
    }
    return {width, height, clf.predict_labels(grid_points(bbox, width, height))};
}

LabelGrid scatter_raster(const LabeledDataset& ds, const BoundingBox& bbox, std::size_t width, std::size_t height) {
    if (ds.dim() != 2) throw UnsupportedError("scatter rasters need 2-D samples");
    if (width < 1 || height < 1) throw RangeError("raster resolution must be at least 1x1");
    LabelGrid grid{width, height, std::vector<Label>(width * height, LabelGrid::kBackground)};
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const double fx = (ds.vectors(i, 0) - bbox.xmin) / (bbox.xmax - bbox.xmin);
        const double fy = (ds.vectors(i, 1) - bbox.ymin) / (bbox.ymax - bbox.ymin);
        if (!(fx >= 0.0 && fx < 1.0 && fy >= 0.0 && fy < 1.0)) continue;
        const auto c = static_cast<std::size_t>(fx * static_cast<double>(width));
        const auto r = static_cast<std::size_t>(fy * static_cast<double>(height));
        grid.cells[r * width + c] = ds.labels[i];
    }
    return grid;
}

double raster_disagreement(const LabelGrid& a, const LabelGrid& b) {
    if (a.width != b.width || a.height != b.height) throw ShapeError("rasters differ in size");
    if (a.cells.empty()) return 0.0;
    std::size_t diff = 0;
    for (std::size_t i = 0; i < a.cells.size(); ++i) diff += a.cells[i] != b.cells[i];
    return static_cast<double>(diff) / static_cast<double>(a.cells.size());
}

std::array<unsigned char, 3> palette_color(Label label, std::size_t num_labels) {
    static constexpr std::array<std::array<unsigned char, 3>, 3> fixed{{{220, 60, 60}, {60, 180, 75}, {65, 105, 225}}};
    if (label == LabelGrid::kBackground) return {255, 255, 255};
    if (label < fixed.size()) return fixed[label];
    // Remaining classes get evenly spaced hues at saturation 0.65, value 0.85.
    const std::size_t extra = num_labels > 3 ? num_labels - 3 : 1;
    const double hue = 360.0 * static_cast<double>(label - 3) / static_cast<double>(extra);
    const double v = 0.85, s = 0.65;
    const double c = v * s;
    const double hp = hue / 60.0;
    const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    switch (static_cast<int>(hp) % 6) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
    }
    const double m = v - c;
    auto to_byte = [m](double u) { return static_cast<unsigned char>(std::lround((u + m) * 255.0)); };
    return {to_byte(r), to_byte(g), to_byte(b)};
}

void write_ppm(std::ostream& out, const LabelGrid& grid, std::size_t num_labels) {
    out << "P3\n"
        << "# palette: class0=(220,60,60) class1=(60,180,75) class2=(65,105,225) "
           "class>=3=evenly spaced hues (s=0.65 v=0.85) background=(255,255,255)\n"
        << grid.width << ' ' << grid.height << "\n255\n";
    for (std::size_t r = 0; r < grid.height; ++r) {
        std::string line;
        for (std::size_t c = 0; c < grid.width; ++c) {
            auto rgb = palette_color(grid.at(c, r), num_labels);
            if (c) line += ' ';
            line += std::to_string(rgb[0]) + ' ' + std::to_string(rgb[1]) + ' ' + std::to_string(rgb[2]);
        }
        out << line << '\n';
    }
}

void write_ppm_file(const std::filesystem::path& path, const LabelGrid& grid, std::size_t num_labels) {
    with_output_file(path, [&](std::ostream& out) { write_ppm(out, grid, num_labels); });
}

// ---------------------------------------------------------------------------
// CSV and bookkeeping

void write_curve_csv(std::ostream& out, std::span<const CurvePoint> curve) {
    out << "k,value\n";
    for (const auto& p : curve) out << p.k << ',' << detail::format_double(p.value) << '\n';
}

void write_curve_csv_file(const std::filesystem::path& path, std::span<const CurvePoint> curve) {
    with_output_file(path, [&](std::ostream& out) { write_curve_csv(out, curve); });
}

void write_accuracy_csv(std::ostream& out, std::span<const AccuracyRow> rows) {
    out << "system,k,accuracy,params\n";
    for (const auto& r : rows) {
        out << r.system << ',';
        if (r.k) out << r.k;
        out << ',' << detail::format_double(r.accuracy) << ',' << r.params << '\n';
    }
}

void write_accuracy_csv_file(const std::filesystem::path& path, std::span<const AccuracyRow> rows) {
    with_output_file(path, [&](std::ostream& out) { write_accuracy_csv(out, rows); });
}

MemoryReport memory_report(std::size_t n, std::size_t d, std::size_t knet_params, std::size_t prelim_params) {
    MemoryReport report;
    report.knn_values = n * d;
    report.knet_params = knet_params;
    report.prelim_params = prelim_params;
    report.knn_to_knet_ratio =
        knet_params ? static_cast<double>(report.knn_values) / static_cast<double>(knet_params) : 0.0;
    return report;
}

MemoryReport memory_report(const KnnIndex& index, const KnetModel& model, const DenseNet& prelim) {
    return memory_report(index.size(), index.dim(), model.param_count(), prelim.param_count());
}

std::string format_count(std::size_t count) {
    auto scaled = [](double v, const char* suffix) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.1f", v);
        std::string s(buf);
        if (s.size() > 2 && s.compare(s.size() - 2, 2, ".0") == 0) s.resize(s.size() - 2);
        return s + suffix;
    };
    if (count >= 1'000'000) return scaled(static_cast<double>(count) / 1e6, "M");
    if (count >= 1'000) return scaled(static_cast<double>(count) / 1e3, "K");
    return std::to_string(count);
}

void write_memory_report(std::ostream& out, const MemoryReport& report) {
    out << "component,count,compact\n"
        << "prelim_params," << report.prelim_params << ',' << format_count(report.prelim_params) << '\n'
        << "knn_values," << report.knn_values << ',' << format_count(report.knn_values) << '\n'
        << "knet_params," << report.knet_params << ',' << format_count(report.knet_params) << '\n'
        << "knn_to_knet_ratio," << detail::format_double(report.knn_to_knet_ratio) << ",\n";
}

}  // namespace knet
