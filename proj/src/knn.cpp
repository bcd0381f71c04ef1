#include "knet/knn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "knet/errors.hpp"

namespace knet {

void EmbeddingSet::validate() const {
    if (labels.empty()) throw EmptyInputError("embedding set is empty");
    if (vectors.rows() != labels.size()) {
        throw ShapeError("embedding set has " + std::to_string(vectors.rows()) + " vectors but " +
                         std::to_string(labels.size()) + " labels");
    }
    if (vectors.cols() == 0) throw ShapeError("embedding vectors have zero width");
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= num_labels) {
            throw RangeError("label " + std::to_string(labels[i]) + " of sample " + std::to_string(i) +
                             " is not below L=" + std::to_string(num_labels));
        }
    }
}

double distance(Metric metric, std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    if (metric == Metric::L1) {
        for (std::size_t j = 0; j < a.size(); ++j) acc += std::abs(a[j] - b[j]);
    } else {
        for (std::size_t j = 0; j < a.size(); ++j) {
            const double d = a[j] - b[j];
            acc += d * d;
        }
    }
    return acc;
}

KnnIndex::KnnIndex(EmbeddingSet embeddings, Metric metric) : data_(std::move(embeddings)), metric_(metric) {
    data_.validate();
}

void KnnIndex::check_query(std::span<const double> q) const {
    if (q.size() != dim()) {
        throw ShapeError("query width " + std::to_string(q.size()) + " does not match index width " +
                         std::to_string(dim()));
    }
}

std::vector<std::size_t> KnnIndex::nearest(std::span<const double> q, std::size_t k, std::size_t skip) const {
    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) {
        if (i == skip) continue;
        scored.emplace_back(distance(metric_, q, data_.vectors.row(i)), i);
    }
    // pair ordering is (distance, id), the documented tie rule.
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end());
    std::vector<std::size_t> ids(k);
    for (std::size_t i = 0; i < k; ++i) ids[i] = scored[i].second;
    return ids;
}

std::vector<std::size_t> KnnIndex::query(std::span<const double> q, std::size_t k) const {
    check_query(q);
    if (k < 1 || k > size()) {
        throw RangeError("k=" + std::to_string(k) + " outside [1, " + std::to_string(size()) + "]");
    }
    return nearest(q, k, std::numeric_limits<std::size_t>::max());
}

std::vector<std::size_t> KnnIndex::neighbors_of(std::size_t i, std::size_t k, SelfPolicy policy) const {
    if (i >= size()) throw RangeError("sample id " + std::to_string(i) + " out of range");
    const std::size_t available = policy == SelfPolicy::Include ? size() : size() - 1;
    if (k < 1 || k > available) {
        throw RangeError("k=" + std::to_string(k) + " outside [1, " + std::to_string(available) + "]");
    }
    if (policy == SelfPolicy::Exclude) return nearest(data_.vectors.row(i), k, i);
    std::vector<std::size_t> ids{i};
    if (k > 1) {
        auto rest = nearest(data_.vectors.row(i), k - 1, i);
        ids.insert(ids.end(), rest.begin(), rest.end());
    }
    return ids;
}

std::vector<Label> KnnIndex::labels_of(std::span<const std::size_t> ids) const {
    std::vector<Label> out;
    out.reserve(ids.size());
    for (auto id : ids) out.push_back(data_.labels.at(id));
    return out;
}

VoteVector KnnIndex::vote(std::span<const double> q, std::size_t k) const {
    auto ids = query(q, k);
    return vote_pdf(labels_of(ids), num_labels());
}

Label KnnIndex::classify(std::span<const double> q, std::size_t k) const { return argmax_label(vote(q, k)); }

VoteVector vote_pdf(std::span<const Label> neighbor_labels, std::size_t num_labels) {
    if (neighbor_labels.empty()) throw RangeError("vote_pdf needs at least one neighbor");
    std::vector<std::size_t> counts(num_labels, 0);
    for (Label l : neighbor_labels) {
        if (l >= num_labels) {
            throw RangeError("label " + std::to_string(l) + " is not below L=" + std::to_string(num_labels));
        }
        ++counts[l];
    }
    VoteVector probs(num_labels);
    const double k = static_cast<double>(neighbor_labels.size());
    for (std::size_t c = 0; c < num_labels; ++c) probs[c] = static_cast<double>(counts[c]) / k;
    return probs;
}

Label argmax_label(std::span<const double> probs) {
    if (probs.empty()) throw ShapeError("argmax of an empty vector");
    Label best = 0;
    for (std::size_t c = 1; c < probs.size(); ++c) {
        if (probs[c] > probs[best]) best = c;
    }
    return best;
}

}  // namespace knet
