#include "asmk/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/Dense>

#include "asmk/random.hpp"

namespace asmk {

namespace {

using RowMajorD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Candidate {
    double distance;
    std::uint32_t word;
    bool operator<(const Candidate& o) const noexcept
    {
        return distance != o.distance ? distance < o.distance : word < o.word;
    }
};

void check_dim(const Codebook& cb, std::size_t dim)
{
    if (dim != cb.dim()) {
        throw InvalidArgument("descriptor dim " + std::to_string(dim) +
                              " does not match codebook dim " + std::to_string(cb.dim()));
    }
}

void check_multiplicity(const Codebook& cb, std::size_t multiplicity)
{
    if (multiplicity < 1 || multiplicity > cb.kappa()) {
        throw InvalidArgument("multiplicity must be in [1, " + std::to_string(cb.kappa()) +
                              "], got " + std::to_string(multiplicity));
    }
}

Assignment take_best(std::vector<Candidate>& candidates, std::size_t multiplicity)
{
    std::partial_sort(candidates.begin(),
                      candidates.begin() + static_cast<std::ptrdiff_t>(multiplicity),
                      candidates.end());
    Assignment a;
    a.word_ids.reserve(multiplicity);
    a.distances.reserve(multiplicity);
    for (std::size_t i = 0; i < multiplicity; ++i) {
        a.word_ids.push_back(candidates[i].word);
        a.distances.push_back(candidates[i].distance);
    }
    return a;
}

}  // namespace

Codebook::Codebook(MatrixD centroids, std::uint64_t seed)
    : centroids_(std::move(centroids)), seed_(seed)
{
    if (centroids_.rows() == 0 || centroids_.cols() == 0) {
        throw InvalidArgument("codebook needs at least one word of positive dimension");
    }
    for (double v : centroids_.data()) {
        if (!std::isfinite(v)) throw InvalidArgument("codebook centroid is not finite");
    }
}

double squared_distance(std::span<const float> x, std::span<const double> c) noexcept
{
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double diff = static_cast<double>(x[i]) - c[i];
        sum += diff * diff;
    }
    return sum;
}

Assignment assign(const Codebook& cb, std::span<const float> x, std::size_t multiplicity)
{
    check_dim(cb, x.size());
    check_multiplicity(cb, multiplicity);
    std::vector<Candidate> all(cb.kappa());
    for (std::size_t k = 0; k < cb.kappa(); ++k) {
        all[k] = {squared_distance(x, cb.centroid(k)), static_cast<std::uint32_t>(k)};
    }
    return take_best(all, multiplicity);
}

std::vector<Assignment> assign_batch(const Codebook& cb, const MatrixF& x,
                                     std::size_t multiplicity)
{
    if (x.rows() == 0) return {};
    check_dim(cb, x.cols());
    check_multiplicity(cb, multiplicity);

    const std::size_t kappa = cb.kappa();
    const std::size_t dim = cb.dim();
    const Eigen::Map<const RowMajorD> centroids(cb.centroids().data().data(),
                                                static_cast<Eigen::Index>(kappa),
                                                static_cast<Eigen::Index>(dim));
    const Eigen::VectorXd centroid_norms = centroids.rowwise().squaredNorm();
    const double max_centroid_norm = centroid_norms.maxCoeff();
    // Covers rounding in both the expanded and the direct distance evaluation.
    const double rel_bound = static_cast<double>(4 * dim + 16) * std::numeric_limits<double>::epsilon();

    const std::size_t block = std::clamp<std::size_t>((std::size_t{1} << 21) / kappa, 1, 1024);
    const std::size_t n_blocks = (x.rows() + block - 1) / block;
    std::vector<Assignment> out(x.rows());

    parallel_for(n_blocks, [&](std::size_t b_begin, std::size_t b_end) {
        RowMajorD rows;
        RowMajorD dots;
        std::vector<double> approx(kappa);
        std::vector<double> scratch(kappa);
        std::vector<Candidate> candidates;
        for (std::size_t b = b_begin; b < b_end; ++b) {
            const std::size_t r0 = b * block;
            const std::size_t r1 = std::min(x.rows(), r0 + block);
            rows.resize(static_cast<Eigen::Index>(r1 - r0), static_cast<Eigen::Index>(dim));
            for (std::size_t r = r0; r < r1; ++r) {
                auto src = x.row(r);
                for (std::size_t j = 0; j < dim; ++j) {
                    rows(static_cast<Eigen::Index>(r - r0), static_cast<Eigen::Index>(j)) = src[j];
                }
            }
            dots.noalias() = rows * centroids.transpose();
            for (std::size_t r = r0; r < r1; ++r) {
                const auto local = static_cast<Eigen::Index>(r - r0);
                const double xn = rows.row(local).squaredNorm();
                for (std::size_t k = 0; k < kappa; ++k) {
                    approx[k] = xn + centroid_norms[static_cast<Eigen::Index>(k)] -
                                2.0 * dots(local, static_cast<Eigen::Index>(k));
                }
                double kth = 0.0;
                if (multiplicity == 1) {
                    kth = *std::min_element(approx.begin(), approx.end());
                } else {
                    scratch = approx;
                    std::nth_element(scratch.begin(),
                                     scratch.begin() + static_cast<std::ptrdiff_t>(multiplicity - 1),
                                     scratch.end());
                    kth = scratch[multiplicity - 1];
                }
                const double slack =
                    rel_bound * (xn + max_centroid_norm + 2.0 * std::sqrt(xn * max_centroid_norm));
                const double threshold = kth + 2.0 * slack;

                candidates.clear();
                auto xr = x.row(r);
                for (std::size_t k = 0; k < kappa; ++k) {
                    if (approx[k] <= threshold) {
                        candidates.push_back({squared_distance(xr, cb.centroid(k)),
                                              static_cast<std::uint32_t>(k)});
                    }
                }
                out[r] = take_best(candidates, multiplicity);
            }
        }
    });
    return out;
}

std::vector<double> residual(const Codebook& cb, std::span<const float> x, std::uint32_t word)
{
    check_dim(cb, x.size());
    if (word >= cb.kappa()) {
        throw InvalidArgument("word " + std::to_string(word) + " out of range for codebook of " +
                              std::to_string(cb.kappa()) + " words");
    }
    auto c = cb.centroid(word);
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) r[i] = static_cast<double>(x[i]) - c[i];
    return r;
}

namespace {

/// k-means++: first centre uniform, the rest with probability proportional to D^2.
MatrixD seed_plus_plus(const MatrixF& sample, std::size_t kappa, SplitMix64& rng)
{
    const std::size_t n = sample.rows();
    const std::size_t dim = sample.cols();
    MatrixD centres(kappa, dim);
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    std::vector<char> chosen(n, 0);

    std::size_t pick = rng.below(n);
    for (std::size_t k = 0; k < kappa; ++k) {
        chosen[pick] = 1;
        auto src = sample.row(pick);
        auto dst = centres.row(k);
        for (std::size_t j = 0; j < dim; ++j) dst[j] = src[j];
        if (k + 1 == kappa) break;

        std::span<const double> centre = centres.row(k);
        parallel_for(n, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                const double d = squared_distance(sample.row(i), centre);
                if (d < nearest[i]) nearest[i] = d;
            }
        });
        double total = 0.0;
        for (double d : nearest) total += d;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            pick = n;
            std::size_t last_positive = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (nearest[i] <= 0.0) continue;
                last_positive = i;
                acc += nearest[i];
                if (acc > target) {
                    pick = i;
                    break;
                }
            }
            if (pick == n) pick = last_positive;
        } else {
            // Every point coincides with a centre; fall back to unused points in order.
            pick = 0;
            while (pick < n && chosen[pick]) ++pick;
            if (pick == n) pick = rng.below(n);
        }
    }
    return centres;
}

}  // namespace

Codebook train_codebook(const MatrixF& sample, const KMeansOptions& options, KMeansReport* report)
{
    const std::size_t n = sample.rows();
    const std::size_t kappa = options.kappa;
    if (kappa == 0) throw InvalidArgument("kappa must be at least 1");
    if (n < kappa) {
        throw InvalidArgument("k-means sample of " + std::to_string(n) +
                              " descriptors is smaller than kappa=" + std::to_string(kappa));
    }
    const std::size_t dim = sample.cols();
    SplitMix64 rng(options.seed);
    Codebook cb(seed_plus_plus(sample, kappa, rng), options.seed);

    KMeansReport local_report;
    std::vector<std::uint32_t> labels(n, std::numeric_limits<std::uint32_t>::max());
    std::vector<double> distance(n);

    for (std::size_t iter = 0; iter < options.iterations; ++iter) {
        const auto assignments = assign_batch(cb, sample, 1);
        bool changed = false;
        double objective = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint32_t w = assignments[i].word_ids[0];
            changed |= (w != labels[i]);
            labels[i] = w;
            distance[i] = assignments[i].distances[0];
            objective += distance[i];
        }
        local_report.objective.push_back(objective);
        local_report.iterations_run = iter + 1;
        log(LogLevel::debug, "k-means iteration " + std::to_string(iter) +
                                 " objective=" + std::to_string(objective));
        if (!changed) {
            local_report.converged = true;
            break;
        }

        MatrixD sums(kappa, dim);
        std::vector<std::size_t> counts(kappa, 0);
        for (std::size_t i = 0; i < n; ++i) {
            auto dst = sums.row(labels[i]);
            auto src = sample.row(i);
            for (std::size_t j = 0; j < dim; ++j) dst[j] += src[j];
            ++counts[labels[i]];
        }
        MatrixD centres = cb.centroids();
        bool any_empty = false;
        for (std::size_t k = 0; k < kappa; ++k) {
            if (counts[k] == 0) {
                any_empty = true;
                continue;
            }
            auto dst = centres.row(k);
            auto src = sums.row(k);
            const double inv = static_cast<double>(counts[k]);
            for (std::size_t j = 0; j < dim; ++j) dst[j] = src[j] / inv;
        }
        if (any_empty) {
            std::vector<double> far(n);
            for (std::size_t i = 0; i < n; ++i) {
                far[i] = squared_distance(sample.row(i), centres.row(labels[i]));
            }
            for (std::size_t k = 0; k < kappa; ++k) {
                if (counts[k] != 0) continue;
                std::size_t best = 0;
                for (std::size_t i = 1; i < n; ++i) {
                    if (far[i] > far[best]) best = i;
                }
                if (!(far[best] > 0.0)) break;
                auto src = sample.row(best);
                auto dst = centres.row(k);
                for (std::size_t j = 0; j < dim; ++j) dst[j] = src[j];
                far[best] = 0.0;
            }
        }
        cb = Codebook(std::move(centres), options.seed);
    }
    if (report != nullptr) *report = std::move(local_report);
    return cb;
}

}  // namespace asmk
