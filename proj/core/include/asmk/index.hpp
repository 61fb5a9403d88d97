#pragma once

// Inverted file over aggregated records: one delta-coded posting list per visual word,
// each posting carrying the image's aggregated binary signature for that word.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "asmk/codebook.hpp"
#include "asmk/kernel.hpp"

namespace asmk {

class PostingList {
public:
    PostingList() = default;
    PostingList(std::uint32_t word, std::size_t signature_dim);

    /// Appends a posting; image ids must arrive strictly ascending.
    void append(std::uint32_t image_id, const BinarySignature& signature);

    std::uint32_t word() const noexcept { return word_; }
    std::size_t size() const noexcept { return size_; }
    bool empty() const noexcept { return size_ == 0; }
    std::size_t signature_dim() const noexcept { return signature_dim_; }
    std::size_t words_per_signature() const noexcept { return words_per_signature_; }

    /// Varint-coded gaps between consecutive image ids (first gap is the first id).
    std::span<const std::uint8_t> encoded_ids() const noexcept { return encoded_ids_; }
    std::vector<std::uint32_t> gaps() const;
    std::vector<std::uint32_t> image_ids() const;

    /// Signatures, words_per_signature() 64-bit words each, in posting order.
    std::span<const std::uint64_t> packed_signatures() const noexcept { return signatures_; }
    BinarySignature signature(std::size_t i) const;

    /// Rebuilds a list from its serialised parts; validates that the gaps decode to
    /// `count` strictly ascending ids.
    static PostingList from_encoded(std::uint32_t word, std::size_t signature_dim,
                                    std::size_t count, std::vector<std::uint8_t> encoded_ids,
                                    std::vector<std::uint64_t> signatures);

    friend bool operator==(const PostingList&, const PostingList&) = default;

private:
    std::uint32_t word_ = 0;
    std::size_t signature_dim_ = 0;
    std::size_t words_per_signature_ = 0;
    std::size_t size_ = 0;
    std::uint32_t last_id_ = 0;
    std::vector<std::uint8_t> encoded_ids_;
    std::vector<std::uint64_t> signatures_;
};

class InvertedIndex {
public:
    InvertedIndex() = default;
    InvertedIndex(KernelParams params, std::size_t kappa, std::vector<double> gammas,
                  std::vector<PostingList> postings);

    const KernelParams& params() const noexcept { return params_; }
    std::size_t kappa() const noexcept { return kappa_; }
    std::size_t image_count() const noexcept { return gammas_.size(); }
    /// 0 for images that contributed no descriptors.
    std::span<const double> gammas() const noexcept { return gammas_; }
    /// Non-empty posting lists in ascending word order.
    std::span<const PostingList> postings() const noexcept { return postings_; }
    /// Posting list of `word`, or nullptr if no image occupies it.
    const PostingList* find(std::uint32_t word) const noexcept;

    friend bool operator==(const InvertedIndex&, const InvertedIndex&) = default;

private:
    KernelParams params_;
    std::size_t kappa_ = 0;
    std::vector<double> gammas_;
    std::vector<PostingList> postings_;
    std::vector<std::int32_t> slot_;  // word -> position in postings_, -1 if empty
};

/// Record image ids must be exactly 0..N-1 (any order).
InvertedIndex build_index(std::span<const AggregatedImageRecord> records,
                          const KernelParams& params, std::size_t kappa);

struct SearchHit {
    std::uint32_t image_id = 0;
    double score = 0.0;

    friend bool operator==(const SearchHit&, const SearchHit&) = default;
};

struct SearchResult {
    /// Score descending, ties by ascending image id.
    std::vector<SearchHit> ranking;
    /// Number of signature comparisons performed while traversing postings.
    std::size_t hamming_comparisons = 0;
};

/// Scores every database image against an already aggregated query record.
/// top_k = 0 returns every database image (unmatched ones with score 0).
SearchResult search_record(const InvertedIndex& idx, const AggregatedImageRecord& query,
                           std::size_t top_k);

/// Quantizes the query with `multiplicity` assignments per descriptor, aggregates it per
/// word and scores it against the index.
SearchResult search(const InvertedIndex& idx, const Codebook& cb, const MatrixF& query,
                    std::size_t multiplicity, std::size_t top_k);

struct IndexStats {
    std::size_t image_count = 0;
    double mean_words_per_image = 0.0;
    std::size_t total_signatures = 0;
    std::size_t nonempty_words = 0;
    std::size_t id_bytes = 0;
    std::size_t signature_bytes = 0;
    std::size_t bytes = 0;
};

IndexStats index_stats(const InvertedIndex& idx);

}  // namespace asmk
