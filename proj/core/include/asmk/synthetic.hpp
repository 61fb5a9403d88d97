#pragma once

#include <cstdint>
#include <vector>

#include "asmk/eval.hpp"
#include "asmk/store.hpp"

namespace asmk {

/// Controls for the synthetic instance-retrieval corpus.
///
/// Every image depicts one object. Its descriptors are built from "elements": an
/// element is one of the object's anchor vectors (probability object_fraction), one of
/// a corpus-wide pool of shared patterns (probability shared_fraction), or otherwise a
/// uniform background vector in [-1, 1]^dim. Each element is repeated a random
/// number of times in [1, 2 * burst_factor - 1] (mean burst_factor, exactly 1 when
/// burst_factor = 1), every copy jittered by N(0, noise_sigma^2) per dimension.
/// Elements are added until descriptors_per_image is reached.
struct SyntheticSpec {
    std::size_t n_images = 1000;
    std::size_t n_queries = 50;
    std::size_t descriptors_per_image = 300;
    std::size_t dim = 128;
    std::size_t n_objects = 50;
    std::size_t burst_factor = 1;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
    double object_fraction = 0.9;
    /// Anchors per object; 0 picks twice the number of distinct elements an image holds.
    std::size_t anchors_per_object = 0;
    /// Generic structures common to all objects; they make unrelated images match.
    double shared_fraction = 0.0;
    std::size_t shared_patterns = 64;

    void validate() const;
};

struct SyntheticCorpus {
    std::vector<DescriptorSetFile> database;
    std::vector<DescriptorSetFile> queries;
    RetrievalGroundTruth retrieval;
    ClassGroundTruth classes;
    /// Object of each database image, by position.
    std::vector<std::size_t> database_objects;
    std::vector<std::size_t> query_objects;
};

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);

}  // namespace asmk
