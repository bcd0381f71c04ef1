#include "knet/matrix.hpp"

#include <string>

#include "knet/errors.hpp"

namespace knet {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw ShapeError("matrix data has " + std::to_string(data_.size()) + " values, expected " +
                         std::to_string(rows_ * cols_));
    }
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return {};
    const std::size_t cols = rows.front().size();
    std::vector<double> data;
    data.reserve(rows.size() * cols);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != cols) {
            throw ShapeError("row " + std::to_string(r) + " has width " + std::to_string(rows[r].size()) +
                             ", expected " + std::to_string(cols));
        }
        data.insert(data.end(), rows[r].begin(), rows[r].end());
    }
    return Matrix(rows.size(), cols, std::move(data));
}

Matrix Matrix::gather(std::span<const std::size_t> indices) const {
    Matrix out(indices.size(), cols_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        auto src = row(indices[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

}  // namespace knet
