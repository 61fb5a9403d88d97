#pragma once

// Binarized selective match kernels: per-descriptor SMK and per-word aggregated ASMK.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "asmk/codebook.hpp"
#include "asmk/common.hpp"

namespace asmk {

/// d-bit packed vector over {-1,+1}; bit i set means +1. Bits are packed LSB-first
/// into 64-bit words and unused high bits stay zero.
class BinarySignature {
public:
    BinarySignature() = default;
    explicit BinarySignature(std::size_t dim) : dim_(dim), words_((dim + 63) / 64, 0) {}

    std::size_t dim() const noexcept { return dim_; }
    bool bit(std::size_t i) const noexcept { return (words_[i / 64] >> (i % 64)) & 1U; }
    int value(std::size_t i) const noexcept { return bit(i) ? 1 : -1; }
    void set(std::size_t i, bool positive) noexcept
    {
        const std::uint64_t mask = std::uint64_t{1} << (i % 64);
        if (positive) {
            words_[i / 64] |= mask;
        } else {
            words_[i / 64] &= ~mask;
        }
    }

    std::span<const std::uint64_t> words() const noexcept { return words_; }
    std::span<std::uint64_t> words() noexcept { return words_; }

    friend bool operator==(const BinarySignature&, const BinarySignature&) = default;

private:
    std::size_t dim_ = 0;
    std::vector<std::uint64_t> words_;
};

std::size_t hamming(const BinarySignature& a, const BinarySignature& b);

struct KernelParams {
    double alpha = 3.0;
    double tau = 0.0;
    std::size_t dim = 128;

    void validate() const;

    friend bool operator==(const KernelParams&, const KernelParams&) = default;
};

/// A descriptor quantized to one visual word, carrying its residual to that word.
struct AssignedResidual {
    std::uint32_t word = 0;
    std::vector<double> residual;
};

struct RecordEntry {
    std::uint32_t word = 0;
    BinarySignature signature;

    friend bool operator==(const RecordEntry&, const RecordEntry&) = default;
};

/// One image under ASMK: a signature per occupied word (ascending word ids) and the
/// normaliser 1/sqrt(|C_X|). gamma is empty for an image with no descriptors.
struct AggregatedImageRecord {
    std::uint32_t image_id = 0;
    std::vector<RecordEntry> entries;
    std::optional<double> gamma;

    friend bool operator==(const AggregatedImageRecord&, const AggregatedImageRecord&) = default;
};

/// Elementwise sign with sign(0) = +1.
BinarySignature binarize(std::span<const double> r);

/// sign of the elementwise sum of the residuals, sign(0) = +1.
BinarySignature aggregate_word(std::span<const std::vector<double>> residuals);

/// Thresholded, exponentiated normalised inner product of two signatures.
double selectivity(const BinarySignature& a, const BinarySignature& b, const KernelParams& p);

/// Same kernel from a precomputed hamming distance.
double selectivity_from_hamming(std::size_t hamming_distance, const KernelParams& p);

/// Quantizes each descriptor to its `multiplicity` nearest words; a descriptor yields one
/// AssignedResidual per word, residual taken with respect to that word.
std::vector<AssignedResidual> quantize(const Codebook& cb, const MatrixF& descriptors,
                                       std::size_t multiplicity);

/// A quantized set prepared for SMK: per-descriptor signatures grouped by ascending word,
/// plus the normaliser making SMK self-similarity 1 (empty when the set is empty).
struct SmkImage {
    std::vector<RecordEntry> descriptors;
    std::optional<double> gamma;
};

SmkImage prepare_smk(std::span<const AssignedResidual> x, const KernelParams& p);

/// SMK evaluated within common visual words. Self-similarity is 1; empty sets score 0.
double smk_score(const SmkImage& x, const SmkImage& y, const KernelParams& p);
double smk_score(std::span<const AssignedResidual> x, std::span<const AssignedResidual> y,
                 const KernelParams& p);

/// Per-word aggregation of a quantized set, gamma = 1/sqrt(#words).
AggregatedImageRecord build_record(std::span<const AssignedResidual> x,
                                   std::uint32_t image_id = 0);

double asmk_score(const AggregatedImageRecord& a, const AggregatedImageRecord& b,
                  const KernelParams& p);

}  // namespace asmk
