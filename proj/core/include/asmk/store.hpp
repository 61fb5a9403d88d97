#pragma once

// Binary and text file formats for every pipeline artifact. Binary formats are
// little-endian with IEEE-754 floats and a 4-byte magic.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "asmk/codebook.hpp"
#include "asmk/common.hpp"
#include "asmk/eval.hpp"
#include "asmk/features.hpp"
#include "asmk/index.hpp"

namespace asmk {

class FormatError : public Error {
public:
    enum class Kind { bad_magic, bad_version, truncated, invalid };

    FormatError(Kind kind, const std::string& what);
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

using Bytes = std::vector<std::uint8_t>;

/// An image's selected descriptors as stored on disk.
struct DescriptorSetFile {
    std::string image_id;
    std::vector<float> strengths;
    MatrixF vectors;

    std::size_t size() const noexcept { return strengths.size(); }
    std::size_t dim() const noexcept { return vectors.cols(); }

    friend bool operator==(const DescriptorSetFile&, const DescriptorSetFile&) = default;
};

DescriptorSetFile to_descriptor_file(const LocalDescriptorSet& set, std::size_t dim);

Bytes encode_feature_map(const DenseFeatureMap& map);
DenseFeatureMap decode_feature_map(std::span<const std::uint8_t> bytes,
                                   bool allow_negative = false);

/// Values are written as f32.
Bytes encode_whitening(const WhiteningTransform& t);
WhiteningTransform decode_whitening(std::span<const std::uint8_t> bytes);

/// Centroids are written as f32.
Bytes encode_codebook(const Codebook& cb);
Codebook decode_codebook(std::span<const std::uint8_t> bytes);

Bytes encode_descriptor_set(const DescriptorSetFile& set);
DescriptorSetFile decode_descriptor_set(std::span<const std::uint8_t> bytes);

/// alpha / tau are written as f32, the gamma table as f64.
Bytes encode_index(const InvertedIndex& idx);
InvertedIndex decode_index(std::span<const std::uint8_t> bytes);

Bytes read_file(const std::filesystem::path& path);
/// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

inline void save_feature_map(const std::filesystem::path& p, const DenseFeatureMap& m)
{
    write_file_atomic(p, encode_feature_map(m));
}
inline DenseFeatureMap load_feature_map(const std::filesystem::path& p, bool allow_negative = false)
{
    return decode_feature_map(read_file(p), allow_negative);
}
inline void save_whitening(const std::filesystem::path& p, const WhiteningTransform& t)
{
    write_file_atomic(p, encode_whitening(t));
}
inline WhiteningTransform load_whitening(const std::filesystem::path& p)
{
    return decode_whitening(read_file(p));
}
inline void save_codebook(const std::filesystem::path& p, const Codebook& cb)
{
    write_file_atomic(p, encode_codebook(cb));
}
inline Codebook load_codebook(const std::filesystem::path& p) { return decode_codebook(read_file(p)); }
inline void save_descriptor_set(const std::filesystem::path& p, const DescriptorSetFile& s)
{
    write_file_atomic(p, encode_descriptor_set(s));
}
inline DescriptorSetFile load_descriptor_set(const std::filesystem::path& p)
{
    return decode_descriptor_set(read_file(p));
}
inline void save_index(const std::filesystem::path& p, const InvertedIndex& idx)
{
    write_file_atomic(p, encode_index(idx));
}
inline InvertedIndex load_index(const std::filesystem::path& p) { return decode_index(read_file(p)); }

// Text formats (tab separated, one record per line).

/// `query_id<TAB>positives:id,id,...<TAB>ignores:id,...`
RetrievalGroundTruth parse_retrieval_gt(std::string_view text);
std::string format_retrieval_gt(const RetrievalGroundTruth& gt);

/// `image_id<TAB>class`
std::map<std::string, std::string> parse_image_labels(std::string_view text);
/// `query_id<TAB>class|NONE`
std::map<std::string, std::optional<std::string>> parse_query_labels(std::string_view text);
std::string format_image_labels(const std::map<std::string, std::string>& labels);
std::string format_query_labels(const std::map<std::string, std::optional<std::string>>& labels);

struct RankingRow {
    std::string query_id;
    std::string image_id;
    double score = 0.0;
    std::size_t rank = 0;  // 1-based
};

/// `query_id<TAB>image_id<TAB>score<TAB>rank`; scores printed with 17 significant digits.
std::string format_rankings(std::span<const RankingRow> rows);
/// Groups rows per query, ordered by rank.
std::map<std::string, ScoredRanking> parse_rankings(std::string_view text);

std::string read_text(const std::filesystem::path& path);

}  // namespace asmk
