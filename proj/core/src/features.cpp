#include "asmk/features.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace asmk {

DenseFeatureMap::DenseFeatureMap(std::uint32_t width, std::uint32_t height, std::uint32_t depth,
                                 float scale_factor, std::vector<float> data,
                                 bool allow_negative)
    : width_(width), height_(height), depth_(depth), scale_factor_(scale_factor),
      data_(std::move(data))
{
    if (width_ == 0 || height_ == 0 || depth_ == 0) {
        throw InvalidArgument("feature map dimensions must be positive");
    }
    if (!(scale_factor_ > 0.0f) || !std::isfinite(scale_factor_)) {
        throw InvalidArgument("feature map scale factor must be positive");
    }
    if (data_.size() != std::size_t{width_} * height_ * depth_) {
        throw InvalidArgument("feature map data length " + std::to_string(data_.size()) +
                              " does not equal W*H*D");
    }
    for (float v : data_) {
        if (!std::isfinite(v)) throw InvalidArgument("feature map contains non-finite values");
        if (!allow_negative && v < 0.0f) {
            throw InvalidArgument("feature map contains negative activations");
        }
    }
}

MatrixD attention_map(const DenseFeatureMap& map)
{
    MatrixD out(map.height(), map.width());
    for (std::uint32_t y = 0; y < map.height(); ++y) {
        for (std::uint32_t x = 0; x < map.width(); ++x) {
            double sq = 0.0;
            for (float v : map.at(x, y)) sq += double{v} * v;
            out(y, x) = std::sqrt(sq);
        }
    }
    return out;
}

namespace {

/// Window means in double, one row per grid location in (y, x) order.
MatrixD smoothed_rows(const DenseFeatureMap& map, std::uint32_t window)
{
    if (window == 0 || window % 2 == 0) {
        throw InvalidArgument("smoothing window must be odd and positive, got " +
                              std::to_string(window));
    }
    const auto w = static_cast<std::int64_t>(map.width());
    const auto h = static_cast<std::int64_t>(map.height());
    const std::size_t depth = map.depth();
    const std::int64_t r = window / 2;

    MatrixD out(map.locations(), depth);
    for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x = 0; x < w; ++x) {
            auto acc = out.row(static_cast<std::size_t>(y * w + x));
            std::size_t count = 0;
            for (std::int64_t yy = std::max<std::int64_t>(0, y - r);
                 yy <= std::min(h - 1, y + r); ++yy) {
                for (std::int64_t xx = std::max<std::int64_t>(0, x - r);
                     xx <= std::min(w - 1, x + r); ++xx) {
                    auto v = map.at(static_cast<std::uint32_t>(xx), static_cast<std::uint32_t>(yy));
                    for (std::size_t c = 0; c < depth; ++c) acc[c] += v[c];
                    ++count;
                }
            }
            for (double& a : acc) a /= static_cast<double>(count);
        }
    }
    return out;
}

}  // namespace

DenseFeatureMap local_smooth(const DenseFeatureMap& map, std::uint32_t window)
{
    const MatrixD rows = smoothed_rows(map, window);
    std::vector<float> out(rows.data().size());
    std::transform(rows.data().begin(), rows.data().end(), out.begin(),
                   [](double v) { return static_cast<float>(v); });
    return DenseFeatureMap(map.width(), map.height(), map.depth(), map.scale_factor(),
                           std::move(out), /*allow_negative=*/true);
}

WhiteningTransform fit_whitening(const MatrixF& sample, std::size_t output_dim,
                                 std::optional<double> eps)
{
    const std::size_t n = sample.rows();
    const std::size_t dim = sample.cols();
    if (dim == 0) throw InvalidArgument("whitening sample has zero dimension");
    if (n <= dim) {
        throw InvalidArgument("whitening needs more samples (" + std::to_string(n) +
                              ") than input dimensions (" + std::to_string(dim) + ")");
    }
    if (output_dim == 0 || output_dim > dim) {
        throw InvalidArgument("whitening output dim must be in [1, " + std::to_string(dim) + "]");
    }

    const auto D = static_cast<Eigen::Index>(dim);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(D);
    for (std::size_t i = 0; i < n; ++i) {
        auto r = sample.row(i);
        for (Eigen::Index j = 0; j < D; ++j) mean[j] += r[static_cast<std::size_t>(j)];
    }
    mean /= static_cast<double>(n);

    Eigen::MatrixXd centered(static_cast<Eigen::Index>(n), D);
    for (std::size_t i = 0; i < n; ++i) {
        auto r = sample.row(i);
        for (Eigen::Index j = 0; j < D; ++j) {
            centered(static_cast<Eigen::Index>(i), j) = r[static_cast<std::size_t>(j)] - mean[j];
        }
    }
    Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw Error("eigen-decomposition failed");
    // Eigen returns ascending order.
    const Eigen::VectorXd& values = solver.eigenvalues();
    const Eigen::MatrixXd& vectors = solver.eigenvectors();

    const double largest = std::max(values[D - 1], 0.0);
    const double rank_tol = largest * 1e-10 * static_cast<double>(dim);
    std::size_t rank = 0;
    for (Eigen::Index i = 0; i < D; ++i) {
        if (values[i] > rank_tol && values[i] > 0.0) ++rank;
    }
    if (rank < output_dim) {
        throw InvalidArgument("degenerate whitening sample: covariance rank " +
                              std::to_string(rank) + " is below target dim " +
                              std::to_string(output_dim));
    }

    const double reg = eps.value_or(1e-6 * cov.trace() / static_cast<double>(dim));
    if (reg < 0.0) throw InvalidArgument("whitening eps must be non-negative");

    WhiteningTransform t;
    t.mean = mean;
    t.projection.resize(static_cast<Eigen::Index>(output_dim), D);
    for (std::size_t k = 0; k < output_dim; ++k) {
        const Eigen::Index src = D - 1 - static_cast<Eigen::Index>(k);
        Eigen::VectorXd dir = vectors.col(src);
        Eigen::Index pivot = 0;
        for (Eigen::Index j = 1; j < D; ++j) {
            if (std::abs(dir[j]) > std::abs(dir[pivot])) pivot = j;
        }
        if (dir[pivot] < 0.0) dir = -dir;
        const double scale = 1.0 / std::sqrt(values[src] + reg);
        t.projection.row(static_cast<Eigen::Index>(k)) = scale * dir.transpose();
    }
    return t;
}

namespace {

template <class T>
std::vector<double> whiten(const WhiteningTransform& t, std::span<const T> u)
{
    if (u.size() != t.input_dim()) {
        throw InvalidArgument("whitening expects " + std::to_string(t.input_dim()) +
                              "-dim input, got " + std::to_string(u.size()));
    }
    Eigen::VectorXd centered(t.mean.size());
    for (Eigen::Index j = 0; j < centered.size(); ++j) {
        centered[j] = static_cast<double>(u[static_cast<std::size_t>(j)]) - t.mean[j];
    }
    Eigen::VectorXd out = t.projection * centered;
    return {out.data(), out.data() + out.size()};
}

}  // namespace

std::vector<double> apply_whitening(const WhiteningTransform& t, std::span<const float> u)
{
    return whiten(t, u);
}

std::vector<double> apply_whitening(const WhiteningTransform& t, std::span<const double> u)
{
    return whiten(t, u);
}

std::vector<WeightedDescriptor> extract_single_scale(const DenseFeatureMap& map,
                                                     const WhiteningTransform& t,
                                                     std::uint32_t window)
{
    if (map.depth() != t.input_dim()) {
        throw InvalidArgument("feature map depth " + std::to_string(map.depth()) +
                              " does not match whitening input dim " +
                              std::to_string(t.input_dim()));
    }
    const MatrixD strength = attention_map(map);
    const MatrixD smoothed = smoothed_rows(map, window);

    std::vector<WeightedDescriptor> out;
    out.reserve(map.locations());
    for (std::uint32_t y = 0; y < map.height(); ++y) {
        for (std::uint32_t x = 0; x < map.width(); ++x) {
            WeightedDescriptor d;
            const auto whitened = apply_whitening(t, smoothed.row(std::size_t{y} * map.width() + x));
            d.vector.assign(whitened.begin(), whitened.end());
            d.strength = static_cast<float>(strength(y, x));
            d.source_scale = map.scale_factor();
            d.grid_x = x;
            d.grid_y = y;
            out.push_back(std::move(d));
        }
    }
    return out;
}

bool stronger_than(const WeightedDescriptor& a, const WeightedDescriptor& b) noexcept
{
    if (a.strength != b.strength) return a.strength > b.strength;
    if (a.source_scale != b.source_scale) return a.source_scale < b.source_scale;
    if (a.grid_y != b.grid_y) return a.grid_y < b.grid_y;
    return a.grid_x < b.grid_x;
}

LocalDescriptorSet merge_multiscale(
    std::vector<std::pair<float, std::vector<WeightedDescriptor>>> per_scale, std::size_t n,
    std::string image_id)
{
    if (n == 0) throw InvalidArgument("descriptor budget n must be at least 1");
    LocalDescriptorSet set;
    set.image_id = std::move(image_id);
    for (auto& [scale, descriptors] : per_scale) {
        for (auto& d : descriptors) {
            d.source_scale = scale;
            set.descriptors.push_back(std::move(d));
        }
    }
    auto& all = set.descriptors;
    if (all.size() > n) {
        std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(),
                          stronger_than);
        all.resize(n);
    } else {
        std::sort(all.begin(), all.end(), stronger_than);
    }
    return set;
}

LocalDescriptorSet extract_multiscale(std::span<const DenseFeatureMap> maps,
                                      const WhiteningTransform& t, std::uint32_t window,
                                      std::size_t n, std::string image_id)
{
    std::vector<std::pair<float, std::vector<WeightedDescriptor>>> per_scale(maps.size());
    parallel_for(maps.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            per_scale[i] = {maps[i].scale_factor(), extract_single_scale(maps[i], t, window)};
        }
    });
    return merge_multiscale(std::move(per_scale), n, std::move(image_id));
}

namespace {

GlobalDescriptor normalise(std::vector<double> sum, PoolingKind kind)
{
    double sq = 0.0;
    for (double v : sum) sq += v * v;
    if (!(sq > 0.0)) throw InvalidArgument("cannot normalise a zero aggregate descriptor");
    const double gamma = 1.0 / std::sqrt(sq);
    for (double& v : sum) v *= gamma;
    return {std::move(sum), kind};
}

}  // namespace

GlobalDescriptor spoc_pool(const DenseFeatureMap& map)
{
    std::vector<double> sum(map.depth(), 0.0);
    for (std::uint32_t y = 0; y < map.height(); ++y) {
        for (std::uint32_t x = 0; x < map.width(); ++x) {
            auto u = map.at(x, y);
            for (std::size_t c = 0; c < sum.size(); ++c) sum[c] += u[c];
        }
    }
    return normalise(std::move(sum), PoolingKind::spoc);
}

GlobalDescriptor how_pool(const DenseFeatureMap& map, const WhiteningTransform& t,
                          std::uint32_t window)
{
    if (map.depth() != t.input_dim()) {
        throw InvalidArgument("feature map depth does not match whitening input dim");
    }
    const MatrixD strength = attention_map(map);
    const MatrixD smoothed = smoothed_rows(map, window);
    std::vector<double> sum(t.output_dim(), 0.0);
    for (std::uint32_t y = 0; y < map.height(); ++y) {
        for (std::uint32_t x = 0; x < map.width(); ++x) {
            const auto o = apply_whitening(t, smoothed.row(std::size_t{y} * map.width() + x));
            const double w = strength(y, x);
            for (std::size_t c = 0; c < sum.size(); ++c) sum[c] += w * o[c];
        }
    }
    return normalise(std::move(sum), PoolingKind::how);
}

}  // namespace asmk
