#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "knet/data.hpp"
#include "knet/knet_model.hpp"
#include "knet/knn.hpp"
#include "knet/nn.hpp"

namespace knet {

/// Uniform prediction interface over the preliminary network, kNN and kNet.
///
/// kNN and kNet classifiers may carry an embedder (the preliminary network), in
/// which case they accept raw inputs and embed them first. Referenced objects
/// must outlive the classifier.
class Classifier {
public:
    using PdfFn = std::function<Matrix(const Matrix&)>;

    static Classifier network(const DenseNet& net);
    static Classifier knn(const KnnIndex& index, std::size_t k, const DenseNet* embedder = nullptr);
    static Classifier knet(const KnetModel& model, std::size_t k, const DenseNet* embedder = nullptr);
    static Classifier from_function(std::string name, std::size_t input_dim, std::size_t num_labels, PdfFn fn);

    const std::string& name() const noexcept { return name_; }
    std::size_t k() const noexcept { return k_; }
    std::size_t input_dim() const noexcept { return input_dim_; }
    std::size_t num_labels() const noexcept { return num_labels_; }

    /// One VoteVector row per input row.
    Matrix predict_pdf(const Matrix& inputs) const;
    std::vector<Label> predict_labels(const Matrix& inputs) const;

private:
    Classifier(std::string name, std::size_t k, std::size_t input_dim, std::size_t num_labels, PdfFn fn)
        : name_(std::move(name)), k_(k), input_dim_(input_dim), num_labels_(num_labels), fn_(std::move(fn)) {}

    std::string name_;
    std::size_t k_ = 0;
    std::size_t input_dim_ = 0;
    std::size_t num_labels_ = 0;
    PdfFn fn_;
};

/// Fraction of samples whose predicted label equals the dataset label.
double accuracy(const Classifier& clf, const LabeledDataset& test);

struct CurvePoint {
    std::size_t k = 1;
    double value = 0.0;

    bool operator==(const CurvePoint&) const = default;
};

/// kNN vote vectors of every query for each k, computed from one sorted scan per query.
std::vector<Matrix> knn_pdfs(const KnnIndex& index, const Matrix& queries, std::span<const std::size_t> ks);

/// Per k: mean over queries of (1/L) * sum_c |knn_c - knet_c|.
std::vector<CurvePoint> pdf_mad_curve(const KnnIndex& index, const KnetModel& model, const Matrix& queries,
                                      std::span<const std::size_t> ks);

/// Per k: mean over queries of (1/L) * sum_c |a_c - b_c| for two precomputed pdf stacks.
std::vector<CurvePoint> pdf_mad_curve(std::span<const Matrix> a, std::span<const Matrix> b,
                                      std::span<const std::size_t> ks);

/// Per k: mean over queries of max_c pdf_c.
std::vector<CurvePoint> max_pdf_curve(const KnnIndex& index, const Matrix& queries, std::span<const std::size_t> ks);
std::vector<CurvePoint> max_pdf_curve(const KnetModel& model, const Matrix& queries, std::span<const std::size_t> ks);

struct BoundingBox {
    double xmin = -0.2;
    double ymin = -0.2;
    double xmax = 1.2;
    double ymax = 1.2;
};

/// Row-major label image. Row 0 holds the smallest y.
struct LabelGrid {
    static constexpr Label kBackground = std::numeric_limits<Label>::max();

    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<Label> cells;

    Label at(std::size_t col, std::size_t row) const { return cells[row * width + col]; }
    bool operator==(const LabelGrid&) const = default;
};

/// Cell centers of a width x height grid over bbox, row-major, y increasing with row.
Matrix grid_points(const BoundingBox& bbox, std::size_t width, std::size_t height);

/// Predicted label at each cell center.
LabelGrid boundary_raster(const Classifier& clf, const BoundingBox& bbox, std::size_t width, std::size_t height);

/// Samples drawn into their cells, colored by label, on a background grid.
LabelGrid scatter_raster(const LabeledDataset& ds, const BoundingBox& bbox, std::size_t width, std::size_t height);

/// Fraction of cells whose labels differ.
double raster_disagreement(const LabelGrid& a, const LabelGrid& b);

std::array<unsigned char, 3> palette_color(Label label, std::size_t num_labels);

/// Plain-text P3 pixmap, one pixel per cell, palette documented in a comment line.
void write_ppm(std::ostream& out, const LabelGrid& grid, std::size_t num_labels);
void write_ppm_file(const std::filesystem::path& path, const LabelGrid& grid, std::size_t num_labels);

/// CSV with header "k,value".
void write_curve_csv(std::ostream& out, std::span<const CurvePoint> curve);
void write_curve_csv_file(const std::filesystem::path& path, std::span<const CurvePoint> curve);

struct AccuracyRow {
    std::string system;
    std::size_t k = 0;  // 0 when the system has no k
    double accuracy = 0.0;
    std::size_t params = 0;
};

/// CSV with header "system,k,accuracy,params".
void write_accuracy_csv(std::ostream& out, std::span<const AccuracyRow> rows);
void write_accuracy_csv_file(const std::filesystem::path& path, std::span<const AccuracyRow> rows);

struct MemoryReport {
    std::size_t knn_values = 0;     // n * d stored reals
    std::size_t knet_params = 0;
    std::size_t prelim_params = 0;
    double knn_to_knet_ratio = 0.0;
};

MemoryReport memory_report(const KnnIndex& index, const KnetModel& model, const DenseNet& prelim);
MemoryReport memory_report(std::size_t n, std::size_t d, std::size_t knet_params, std::size_t prelim_params);

/// Compact count as printed in result tables: 12800000 -> "12.8M", 4330 -> "4.3K".
std::string format_count(std::size_t count);

void write_memory_report(std::ostream& out, const MemoryReport& report);

}  // namespace knet
