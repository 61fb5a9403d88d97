#include "asmk/kernel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

namespace asmk {

std::size_t hamming(const BinarySignature& a, const BinarySignature& b)
{
    if (a.dim() != b.dim()) {
        throw InvalidArgument("signature length mismatch: " + std::to_string(a.dim()) + " vs " +
                              std::to_string(b.dim()));
    }
    auto wa = a.words();
    auto wb = b.words();
    std::size_t h = 0;
    for (std::size_t i = 0; i < wa.size(); ++i) h += std::popcount(wa[i] ^ wb[i]);
    return h;
}

void KernelParams::validate() const
{
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
        throw InvalidArgument("kernel alpha must be positive");
    }
    if (!(tau >= 0.0 && tau <= 1.0)) throw InvalidArgument("kernel tau must lie in [0, 1]");
    if (dim == 0) throw InvalidArgument("signature dim must be positive");
}

BinarySignature binarize(std::span<const double> r)
{
    BinarySignature sig(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) sig.set(i, r[i] >= 0.0);
    return sig;
}

BinarySignature aggregate_word(std::span<const std::vector<double>> residuals)
{
    if (residuals.empty()) throw InvalidArgument("cannot aggregate an empty residual list");
    std::vector<double> sum(residuals.front().size(), 0.0);
    for (const auto& r : residuals) {
        if (r.size() != sum.size()) throw InvalidArgument("residual dimension mismatch");
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += r[i];
    }
    return binarize(sum);
}

double selectivity_from_hamming(std::size_t hamming_distance, const KernelParams& p)
{
    const auto d = static_cast<double>(p.dim);
    const double s = (d - 2.0 * static_cast<double>(hamming_distance)) / d;
    if (s < p.tau) return 0.0;
    // s >= tau >= 0 here
    return std::pow(s, p.alpha);
}

double selectivity(const BinarySignature& a, const BinarySignature& b, const KernelParams& p)
{
    if (a.dim() != p.dim) {
        throw InvalidArgument("signature dim " + std::to_string(a.dim()) +
                              " does not match kernel dim " + std::to_string(p.dim));
    }
    return selectivity_from_hamming(hamming(a, b), p);
}

std::vector<AssignedResidual> quantize(const Codebook& cb, const MatrixF& descriptors,
                                       std::size_t multiplicity)
{
    const auto assignments = assign_batch(cb, descriptors, multiplicity);
    std::vector<AssignedResidual> out;
    out.reserve(assignments.size() * multiplicity);
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        for (std::uint32_t w : assignments[i].word_ids) {
            out.push_back({w, residual(cb, descriptors.row(i), w)});
        }
    }
    return out;
}

namespace {

std::vector<std::size_t> order_by_word(std::span<const AssignedResidual> x)
{
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return x[a].word < x[b].word; });
    return order;
}

/// Sum of k over all pairs sharing a word; both inputs sorted by word. Pairs are
/// counted per hamming distance first, so the result is exactly symmetric.
double cross_match(const std::vector<RecordEntry>& x, const std::vector<RecordEntry>& y,
                   const KernelParams& p)
{
    std::vector<std::uint64_t> pairs_at(p.dim + 1, 0);
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < x.size() && j < y.size()) {
        if (x[i].word < y[j].word) {
            ++i;
        } else if (y[j].word < x[i].word) {
            ++j;
        } else {
            const std::uint32_t w = x[i].word;
            std::size_t i_end = i;
            std::size_t j_end = j;
            while (i_end < x.size() && x[i_end].word == w) ++i_end;
            while (j_end < y.size() && y[j_end].word == w) ++j_end;
            for (std::size_t a = i; a < i_end; ++a) {
                for (std::size_t b = j; b < j_end; ++b) {
                    if (x[a].signature.dim() != p.dim || y[b].signature.dim() != p.dim) {
                        throw InvalidArgument("signature dim does not match kernel dim " +
                                              std::to_string(p.dim));
                    }
                    ++pairs_at[hamming(x[a].signature, y[b].signature)];
                }
            }
            i = i_end;
            j = j_end;
        }
    }
    double total = 0.0;
    for (std::size_t h = 0; h < pairs_at.size(); ++h) {
        if (pairs_at[h] != 0) total += static_cast<double>(pairs_at[h]) * selectivity_from_hamming(h, p);
    }
    return total;
}

}  // namespace

SmkImage prepare_smk(std::span<const AssignedResidual> x, const KernelParams& p)
{
    SmkImage img;
    img.descriptors.reserve(x.size());
    for (std::size_t idx : order_by_word(x)) {
        img.descriptors.push_back({x[idx].word, binarize(x[idx].residual)});
    }
    if (!img.descriptors.empty()) {
        img.gamma = 1.0 / std::sqrt(cross_match(img.descriptors, img.descriptors, p));
    }
    return img;
}

double smk_score(const SmkImage& x, const SmkImage& y, const KernelParams& p)
{
    if (!x.gamma || !y.gamma) return 0.0;
    return (*x.gamma * *y.gamma) * cross_match(x.descriptors, y.descriptors, p);
}

double smk_score(std::span<const AssignedResidual> x, std::span<const AssignedResidual> y,
                 const KernelParams& p)
{
    return smk_score(prepare_smk(x, p), prepare_smk(y, p), p);
}

AggregatedImageRecord build_record(std::span<const AssignedResidual> x, std::uint32_t image_id)
{
    AggregatedImageRecord rec;
    rec.image_id = image_id;
    if (x.empty()) return rec;

    const auto order = order_by_word(x);
    const std::size_t dim = x.front().residual.size();
    std::vector<double> sum(dim);
    std::size_t i = 0;
    while (i < order.size()) {
        const std::uint32_t w = x[order[i]].word;
        std::fill(sum.begin(), sum.end(), 0.0);
        for (; i < order.size() && x[order[i]].word == w; ++i) {
            const auto& r = x[order[i]].residual;
            if (r.size() != dim) throw InvalidArgument("residual dimension mismatch");
            for (std::size_t k = 0; k < dim; ++k) sum[k] += r[k];
        }
        rec.entries.push_back({w, binarize(sum)});
    }
    rec.gamma = 1.0 / std::sqrt(static_cast<double>(rec.entries.size()));
    return rec;
}

double asmk_score(const AggregatedImageRecord& a, const AggregatedImageRecord& b,
                  const KernelParams& p)
{
    if (!a.gamma || !b.gamma) return 0.0;
    double total = 0.0;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.entries.size() && j < b.entries.size()) {
        if (a.entries[i].word < b.entries[j].word) {
            ++i;
        } else if (b.entries[j].word < a.entries[i].word) {
            ++j;
        } else {
            total += selectivity(a.entries[i].signature, b.entries[j].signature, p);
            ++i;
            ++j;
        }
    }
    return (*a.gamma * *b.gamma) * total;
}

}  // namespace asmk
