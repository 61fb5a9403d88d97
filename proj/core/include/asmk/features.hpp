#pragma once

// Local descriptor post-processing for dense activation maps: fixed l2 attention,
// M x M local smoothing, PCA whitening, strongest-n selection across scales, and
// the SPoC / HOW global pooling kernels.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "asmk/common.hpp"

namespace asmk {

/// W x H x D activation tensor, stored row-major in (y, x, channel) order.
class DenseFeatureMap {
public:
    DenseFeatureMap() = default;

    /// Validates shape and (unless allow_negative) that every activation is >= 0.
    DenseFeatureMap(std::uint32_t width, std::uint32_t height, std::uint32_t depth,
                    float scale_factor, std::vector<float> data, bool allow_negative = false);

    std::uint32_t width() const noexcept { return width_; }
    std::uint32_t height() const noexcept { return height_; }
    std::uint32_t depth() const noexcept { return depth_; }
    float scale_factor() const noexcept { return scale_factor_; }
    std::size_t locations() const noexcept { return std::size_t{width_} * height_; }

    std::span<const float> at(std::uint32_t x, std::uint32_t y) const noexcept
    {
        return {data_.data() + (std::size_t{y} * width_ + x) * depth_, depth_};
    }
    const std::vector<float>& data() const noexcept { return data_; }

    friend bool operator==(const DenseFeatureMap&, const DenseFeatureMap&) = default;

private:
    std::uint32_t width_ = 0;
    std::uint32_t height_ = 0;
    std::uint32_t depth_ = 0;
    float scale_factor_ = 1.0f;
    std::vector<float> data_;
};

/// o(u) = P (u - m), with P of shape output_dim x input_dim.
struct WhiteningTransform {
    Eigen::MatrixXd projection;
    Eigen::VectorXd mean;

    std::size_t input_dim() const noexcept { return static_cast<std::size_t>(mean.size()); }
    std::size_t output_dim() const noexcept { return static_cast<std::size_t>(projection.rows()); }
};

struct WeightedDescriptor {
    std::vector<float> vector;  // whitened
    float strength = 0.0f;      // l2 norm of the raw activation vector
    float source_scale = 1.0f;
    std::uint32_t grid_x = 0;
    std::uint32_t grid_y = 0;

    friend bool operator==(const WeightedDescriptor&, const WeightedDescriptor&) = default;
};

struct LocalDescriptorSet {
    std::string image_id;
    std::vector<WeightedDescriptor> descriptors;
};

enum class PoolingKind { spoc, how };

struct GlobalDescriptor {
    std::vector<double> vector;
    PoolingKind kind = PoolingKind::spoc;
};

/// Row-major H x W grid of per-location l2 norms.
MatrixD attention_map(const DenseFeatureMap& map);

/// Box filter over an M x M window; border cells average over in-bounds neighbours only.
DenseFeatureMap local_smooth(const DenseFeatureMap& map, std::uint32_t window);

/// PCA whitening with dimensionality reduction. eps defaults to 1e-6 * trace(cov) / D.
/// Covariance uses the 1/N normalisation.
WhiteningTransform fit_whitening(const MatrixF& sample, std::size_t output_dim,
                                 std::optional<double> eps = std::nullopt);

std::vector<double> apply_whitening(const WhiteningTransform& t, std::span<const float> u);
std::vector<double> apply_whitening(const WhiteningTransform& t, std::span<const double> u);

/// One descriptor per grid location: strength from the raw map, vector from the smoothed one.
std::vector<WeightedDescriptor> extract_single_scale(const DenseFeatureMap& map,
                                                     const WhiteningTransform& t,
                                                     std::uint32_t window);

/// Strength ordering used everywhere descriptors are ranked: strength desc, then
/// source_scale, grid_y, grid_x ascending.
bool stronger_than(const WeightedDescriptor& a, const WeightedDescriptor& b) noexcept;

/// Union of all scales, ranked by stronger_than, truncated to the n strongest.
/// Each descriptor's source_scale is overwritten with the scale it is paired with.
LocalDescriptorSet merge_multiscale(
    std::vector<std::pair<float, std::vector<WeightedDescriptor>>> per_scale, std::size_t n,
    std::string image_id = {});

/// Convenience: extract_single_scale on each map, then merge_multiscale.
LocalDescriptorSet extract_multiscale(std::span<const DenseFeatureMap> maps,
                                      const WhiteningTransform& t, std::uint32_t window,
                                      std::size_t n, std::string image_id = {});

/// gamma(U) * sum(u); throws if the sum is the zero vector.
GlobalDescriptor spoc_pool(const DenseFeatureMap& map);

/// gamma * sum(w(u) * o(u_bar)); throws if the aggregate is the zero vector.
GlobalDescriptor how_pool(const DenseFeatureMap& map, const WhiteningTransform& t,
                          std::uint32_t window);

}  // namespace asmk
