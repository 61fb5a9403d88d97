#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "asmk/common.hpp"

namespace asmk {

/// kappa visual words in R^d. Centroids are kept in double; the on-disk format is f32.
class Codebook {
public:
    Codebook() = default;
    Codebook(MatrixD centroids, std::uint64_t seed = 0);

    std::size_t kappa() const noexcept { return centroids_.rows(); }
    std::size_t dim() const noexcept { return centroids_.cols(); }
    std::uint64_t seed() const noexcept { return seed_; }
    std::span<const double> centroid(std::size_t word) const noexcept
    {
        return centroids_.row(word);
    }
    const MatrixD& centroids() const noexcept { return centroids_; }

    friend bool operator==(const Codebook&, const Codebook&) = default;

private:
    MatrixD centroids_;
    std::uint64_t seed_ = 0;
};

/// The nearest words of one descriptor, distances (squared Euclidean) ascending.
struct Assignment {
    std::vector<std::uint32_t> word_ids;
    std::vector<double> distances;

    friend bool operator==(const Assignment&, const Assignment&) = default;
};

struct KMeansOptions {
    std::size_t kappa = 65536;
    std::size_t iterations = 25;
    std::uint64_t seed = 0;
};

struct KMeansReport {
    /// Objective after each assignment step, in iteration order.
    std::vector<double> objective;
    std::size_t iterations_run = 0;
    bool converged = false;
};

/// Lloyd's algorithm with k-means++ seeding. Empty clusters are re-seeded from the
/// point farthest from its centroid. Deterministic for a fixed (sample, options).
Codebook train_codebook(const MatrixF& sample, const KMeansOptions& options,
                        KMeansReport* report = nullptr);

double squared_distance(std::span<const float> x, std::span<const double> c) noexcept;

/// Exhaustive scan; ties resolved towards the lower word index.
Assignment assign(const Codebook& cb, std::span<const float> x, std::size_t multiplicity);

/// Batched assignment of every row. Candidates are screened with a GEMM-based distance
/// expansion and then re-ranked with squared_distance, so the result is identical to
/// calling assign() row by row.
std::vector<Assignment> assign_batch(const Codebook& cb, const MatrixF& x,
                                     std::size_t multiplicity);

std::vector<double> residual(const Codebook& cb, std::span<const float> x, std::uint32_t word);

}  // namespace asmk
