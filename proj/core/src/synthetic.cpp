#include "asmk/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <string>

#include "asmk/random.hpp"

namespace asmk {

void SyntheticSpec::validate() const
{
    if (n_images == 0 || descriptors_per_image == 0 || dim == 0 || n_objects == 0) {
        throw InvalidArgument("synthetic corpus counts must be positive");
    }
    if (burst_factor == 0) throw InvalidArgument("burst factor must be at least 1");
    if (!(noise_sigma >= 0.0)) throw InvalidArgument("noise sigma must be non-negative");
    if (!(object_fraction >= 0.0 && shared_fraction >= 0.0 &&
          object_fraction + shared_fraction <= 1.0)) {
        throw InvalidArgument("object and shared fractions must be non-negative and sum to <= 1");
    }
    if (shared_fraction > 0.0 && shared_patterns == 0) {
        throw InvalidArgument("shared fraction needs a non-empty shared pattern pool");
    }
}

namespace {

std::string numbered(const char* prefix, std::size_t i)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%06zu", prefix, i);
    return buf;
}

std::string object_class(std::size_t o)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "obj%04zu", o);
    return buf;
}

DescriptorSetFile make_image(const SyntheticSpec& spec, const MatrixF& anchors,
                             const MatrixF& shared, std::size_t anchors_per_object,
                             std::size_t object, std::string id, SplitMix64& rng)
{
    const std::size_t dim = spec.dim;
    const std::size_t total = spec.descriptors_per_image;
    MatrixF rows(0, dim);
    std::vector<float> element(dim);
    std::vector<float> copy(dim);
    while (rows.rows() < total) {
        const double u = rng.uniform();
        if (u < spec.object_fraction) {
            const std::size_t a = object * anchors_per_object + rng.below(anchors_per_object);
            auto src = anchors.row(a);
            std::copy(src.begin(), src.end(), element.begin());
        } else if (u < spec.object_fraction + spec.shared_fraction) {
            auto src = shared.row(rng.below(shared.rows()));
            std::copy(src.begin(), src.end(), element.begin());
        } else {
            for (float& v : element) v = static_cast<float>(rng.uniform(-1.0, 1.0));
        }
        const std::size_t repeats = 1 + rng.below(2 * spec.burst_factor - 1);
        for (std::size_t r = 0; r < repeats && rows.rows() < total; ++r) {
            for (std::size_t j = 0; j < dim; ++j) {
                copy[j] = element[j];
                if (spec.noise_sigma > 0.0) {
                    copy[j] = static_cast<float>(copy[j] + spec.noise_sigma * rng.normal());
                }
            }
            rows.append_row(copy);
        }
    }
    // Fisher-Yates so that truncation to the strongest n is not biased towards early elements.
    for (std::size_t i = total; i > 1; --i) {
        const std::size_t j = rng.below(i);
        if (j == i - 1) continue;
        auto a = rows.row(i - 1);
        auto b = rows.row(j);
        std::swap_ranges(a.begin(), a.end(), b.begin());
    }
    DescriptorSetFile set;
    set.image_id = std::move(id);
    set.vectors = std::move(rows);
    set.strengths.resize(total);
    for (std::size_t i = 0; i < total; ++i) set.strengths[i] = static_cast<float>(total - i);
    return set;
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec)
{
    spec.validate();
    SplitMix64 rng(spec.seed);

    std::size_t per_object = spec.anchors_per_object;
    if (per_object == 0) {
        const std::size_t elements =
            (spec.descriptors_per_image + spec.burst_factor - 1) / spec.burst_factor;
        per_object = std::max<std::size_t>(1, 2 * elements);
    }
    MatrixF anchors(spec.n_objects * per_object, spec.dim);
    for (float& v : anchors.data()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    MatrixF shared(spec.shared_fraction > 0.0 ? spec.shared_patterns : 0, spec.dim);
    for (float& v : shared.data()) v = static_cast<float>(rng.uniform(-1.0, 1.0));

    SyntheticCorpus corpus;
    for (std::size_t i = 0; i < spec.n_images; ++i) {
        const std::size_t object = i % spec.n_objects;
        corpus.database.push_back(
            make_image(spec, anchors, shared, per_object, object, numbered("db", i), rng));
        corpus.database_objects.push_back(object);
        corpus.classes.image_class[corpus.database.back().image_id] = object_class(object);
    }
    for (std::size_t q = 0; q < spec.n_queries; ++q) {
        const std::size_t object = q % spec.n_objects;
        corpus.queries.push_back(
            make_image(spec, anchors, shared, per_object, object, numbered("q", q), rng));
        corpus.query_objects.push_back(object);
        const std::string& qid = corpus.queries.back().image_id;
        corpus.classes.query_class[qid] = object_class(object);
        auto& gt = corpus.retrieval[qid];
        for (std::size_t i = 0; i < spec.n_images; ++i) {
            if (corpus.database_objects[i] == object) gt.positives.insert(corpus.database[i].image_id);
        }
    }
    return corpus;
}

}  // namespace asmk
