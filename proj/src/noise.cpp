#include "knet/noise.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>

#include "knet/errors.hpp"
#include "knet/rng.hpp"
#include "text_io.hpp"

namespace knet {

namespace {

void check_rate(double rate) {
    if (!(rate >= 0.0 && rate <= 1.0)) throw RangeError("noise rate must lie in [0, 1]");
}

Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

}  // namespace

TransitionMatrix::TransitionMatrix(Matrix rows, NoiseKind kind, double rate)
    : rows_(std::move(rows)), kind_(kind), rate_(rate) {
    validate();
}

void TransitionMatrix::validate() const {
    if (rows_.rows() == 0 || rows_.rows() != rows_.cols()) throw ValidationError("transition matrix must be square");
    for (std::size_t r = 0; r < rows_.rows(); ++r) {
        double sum = 0.0;
        for (double v : rows_.row(r)) {
            if (!(v >= 0.0 && v <= 1.0)) {
                throw ValidationError("transition matrix row " + std::to_string(r) + " has an entry outside [0,1]");
            }
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            throw ValidationError("transition matrix row " + std::to_string(r) + " sums to " +
                                  detail::format_double(sum));
        }
    }
}

TransitionMatrix TransitionMatrix::custom(Matrix rows) { return TransitionMatrix(std::move(rows), NoiseKind::Custom, 0.0); }

TransitionMatrix make_uniform(double rate, std::size_t num_labels) {
    check_rate(rate);
    if (num_labels < 2) throw RangeError("uniform noise needs L >= 2");
    const double off = rate / static_cast<double>(num_labels);
    Matrix m(num_labels, num_labels, off);
    for (std::size_t i = 0; i < num_labels; ++i) m(i, i) = 1.0 - rate + off;
    return TransitionMatrix(std::move(m), NoiseKind::Uniform, rate);
}

TransitionMatrix make_random_asym(double rate, std::size_t num_labels, std::uint64_t seed, bool cyclic) {
    check_rate(rate);
    if (num_labels < 3) throw UnsupportedError("random asymmetric noise needs L >= 3");
    SplitMix64 rng(seed);
    Matrix m = identity(num_labels);
    std::vector<std::pair<Label, Label>> targets;
    for (Label c = 0; c < num_labels; ++c) {
        Label first, second;
        if (cyclic) {
            first = (c + 1) % num_labels;
            second = (c + 2) % num_labels;
        } else {
            std::vector<Label> others;
            for (Label o = 0; o < num_labels; ++o) {
                if (o != c) others.push_back(o);
            }
            const auto i = static_cast<std::size_t>(rng.below(others.size()));
            first = others[i];
            others.erase(others.begin() + static_cast<std::ptrdiff_t>(i));
            second = others[static_cast<std::size_t>(rng.below(others.size()))];
        }
        targets.emplace_back(first, second);
        m(c, c) = 1.0 - rate;
        m(c, first) = 2.0 * rate / 3.0;
        m(c, second) = rate / 3.0;
    }
    TransitionMatrix tm(std::move(m), NoiseKind::RandomAsymmetric, rate);
    tm.targets_ = std::move(targets);
    return tm;
}

TransitionMatrix make_semantic(std::span<const std::pair<Label, Label>> pairs, double rate, std::size_t num_labels) {
    check_rate(rate);
    if (num_labels < 2) throw RangeError("semantic noise needs L >= 2");
    std::vector<bool> used(num_labels, false);
    Matrix m = identity(num_labels);
    for (auto [a, b] : pairs) {
        if (a >= num_labels || b >= num_labels) throw ValidationError("semantic pair refers to a label >= L");
        if (a == b) throw ValidationError("semantic pair (" + std::to_string(a) + "," + std::to_string(b) + ") is not two classes");
        if (used[a] || used[b]) throw ValidationError("semantic pairs overlap on class " + std::to_string(used[a] ? a : b));
        used[a] = used[b] = true;
        m(a, a) = 1.0 - rate;
        m(a, b) = rate;
        m(b, b) = 1.0 - rate;
        m(b, a) = rate;
    }
    return TransitionMatrix(std::move(m), NoiseKind::SemanticAsymmetric, rate);
}

NoisyDataset apply_noise(const LabeledDataset& clean, const TransitionMatrix& tm, std::uint64_t seed) {
    const std::size_t L = tm.num_labels();
    for (std::size_t i = 0; i < clean.size(); ++i) {
        if (clean.labels[i] >= L) {
            throw RangeError("label " + std::to_string(clean.labels[i]) + " of sample " + std::to_string(i) +
                             " is outside the transition matrix (L=" + std::to_string(L) + ")");
        }
    }
    SplitMix64 rng(seed);
    NoisyDataset out{clean, {}};
    out.dataset.num_labels = std::max(clean.num_labels, L);
    out.dataset.provenance = "noisy(" + clean.provenance + ")";
    out.record.reserve(clean.size());
    for (std::size_t i = 0; i < clean.size(); ++i) {
        const Label y = clean.labels[i];
        const auto row = tm.rows().row(y);
        const double u = rng.uniform();
        double cumulative = 0.0;
        Label drawn = L;
        Label last_positive = y;
        for (Label c = 0; c < L; ++c) {
            if (row[c] <= 0.0) continue;
            last_positive = c;
            cumulative += row[c];
            if (u < cumulative) {
                drawn = c;
                break;
            }
        }
        // Rounding can leave the cumulative sum a hair below 1.
        if (drawn == L) drawn = last_positive;
        out.dataset.labels[i] = drawn;
        out.record.push_back({y, drawn, drawn != y});
    }
    return out;
}

void TransitionMatrix::save(std::ostream& out) const {
    out << "TM v1 L=" << num_labels() << '\n';
    for (std::size_t r = 0; r < rows_.rows(); ++r) {
        for (std::size_t c = 0; c < rows_.cols(); ++c) {
            if (c) out << ' ';
            out << detail::format_double(rows_(r, c));
        }
        out << '\n';
    }
}

TransitionMatrix TransitionMatrix::load(std::istream& in, const std::string& source) {
    detail::LineReader reader(in, source);
    std::string line;
    if (!reader.next(line)) throw EmptyInputError(source + ": file is empty");
    auto header = detail::split_ws(line);
    std::size_t L = 0;
    if (header.size() != 3 || header[0] != "TM" || header[1] != "v1" || !detail::parse_keyed(header[2], "L", L) ||
        L == 0) {
        reader.fail("expected header 'TM v1 L=<L>'");
    }
    Matrix m(L, L);
    std::size_t r = 0;
    while (reader.next(line)) {
        auto parts = detail::split_ws(line);
        if (parts.empty()) continue;
        if (r >= L) reader.fail("more than L rows");
        if (parts.size() != L) reader.fail("expected " + std::to_string(L) + " entries");
        for (std::size_t c = 0; c < L; ++c) {
            if (!detail::parse_double(parts[c], m(r, c))) reader.fail("bad number '" + std::string(parts[c]) + "'");
        }
        ++r;
    }
    if (r != L) throw ParseError(source + ": expected " + std::to_string(L) + " rows, found " + std::to_string(r));
    return custom(std::move(m));
}

void TransitionMatrix::save_file(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    save(out);
}

TransitionMatrix TransitionMatrix::load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    return load(in, path.string());
}

}  // namespace knet
