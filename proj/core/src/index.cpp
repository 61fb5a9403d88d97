#include "asmk/index.hpp"

#include <algorithm>
#include <bit>
#include <string>

#include "asmk/varint.hpp"

namespace asmk {

PostingList::PostingList(std::uint32_t word, std::size_t signature_dim)
    : word_(word), signature_dim_(signature_dim), words_per_signature_((signature_dim + 63) / 64)
{
}

void PostingList::append(std::uint32_t image_id, const BinarySignature& signature)
{
    if (signature.dim() != signature_dim_) {
        throw InvalidArgument("posting signature dim mismatch");
    }
    if (size_ > 0 && image_id <= last_id_) {
        throw InvalidArgument("posting image ids must be strictly ascending");
    }
    varint::encode(size_ == 0 ? image_id : image_id - last_id_, encoded_ids_);
    auto words = signature.words();
    signatures_.insert(signatures_.end(), words.begin(), words.end());
    last_id_ = image_id;
    ++size_;
}

std::vector<std::uint32_t> PostingList::gaps() const
{
    std::vector<std::uint32_t> out;
    out.reserve(size_);
    std::size_t pos = 0;
    std::uint64_t v = 0;
    while (pos < encoded_ids_.size() && varint::decode(encoded_ids_, pos, v)) {
        out.push_back(static_cast<std::uint32_t>(v));
    }
    return out;
}

std::vector<std::uint32_t> PostingList::image_ids() const
{
    auto ids = gaps();
    for (std::size_t i = 1; i < ids.size(); ++i) ids[i] += ids[i - 1];
    return ids;
}

BinarySignature PostingList::signature(std::size_t i) const
{
    BinarySignature sig(signature_dim_);
    auto dst = sig.words();
    std::copy_n(signatures_.begin() + static_cast<std::ptrdiff_t>(i * words_per_signature_),
                words_per_signature_, dst.begin());
    return sig;
}

PostingList PostingList::from_encoded(std::uint32_t word, std::size_t signature_dim,
                                      std::size_t count, std::vector<std::uint8_t> encoded_ids,
                                      std::vector<std::uint64_t> signatures)
{
    PostingList list(word, signature_dim);
    if (signatures.size() != count * list.words_per_signature_) {
        throw InvalidArgument("posting list signature block has the wrong length");
    }
    std::size_t pos = 0;
    std::uint64_t id = 0;
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t gap = 0;
        if (!varint::decode(encoded_ids, pos, gap)) {
            throw InvalidArgument("posting list id block is truncated");
        }
        if (i > 0 && gap == 0) throw InvalidArgument("posting list ids are not ascending");
        id += gap;
        if (id > UINT32_MAX) throw InvalidArgument("posting list image id overflows");
    }
    if (pos != encoded_ids.size()) throw InvalidArgument("posting list id block has trailing bytes");
    list.size_ = count;
    list.last_id_ = static_cast<std::uint32_t>(id);
    list.encoded_ids_ = std::move(encoded_ids);
    list.signatures_ = std::move(signatures);
    return list;
}

InvertedIndex::InvertedIndex(KernelParams params, std::size_t kappa, std::vector<double> gammas,
                             std::vector<PostingList> postings)
    : params_(params), kappa_(kappa), gammas_(std::move(gammas)), postings_(std::move(postings)),
      slot_(kappa, -1)
{
    params_.validate();
    for (std::size_t i = 0; i < postings_.size(); ++i) {
        const auto& list = postings_[i];
        if (list.word() >= kappa_) throw InvalidArgument("posting word id out of range");
        if (i > 0 && list.word() <= postings_[i - 1].word()) {
            throw InvalidArgument("posting lists must be in ascending word order");
        }
        if (list.empty()) throw InvalidArgument("empty posting lists are not stored");
        if (list.signature_dim() != params_.dim) {
            throw InvalidArgument("posting signature dim does not match kernel dim");
        }
        if (list.image_ids().back() >= gammas_.size()) {
            throw InvalidArgument("posting references an image outside the gamma table");
        }
        slot_[list.word()] = static_cast<std::int32_t>(i);
    }
}

const PostingList* InvertedIndex::find(std::uint32_t word) const noexcept
{
    if (word >= slot_.size() || slot_[word] < 0) return nullptr;
    return &postings_[static_cast<std::size_t>(slot_[word])];
}

InvertedIndex build_index(std::span<const AggregatedImageRecord> records,
                          const KernelParams& params, std::size_t kappa)
{
    params.validate();
    const std::size_t n = records.size();
    std::vector<const AggregatedImageRecord*> by_id(n, nullptr);
    for (const auto& rec : records) {
        if (rec.image_id >= n) {
            throw InvalidArgument("image id " + std::to_string(rec.image_id) +
                                  " outside [0, " + std::to_string(n) + ")");
        }
        if (by_id[rec.image_id] != nullptr) {
            throw InvalidArgument("duplicate image id " + std::to_string(rec.image_id));
        }
        by_id[rec.image_id] = &rec;
    }

    std::vector<PostingList> lists(kappa);
    for (std::size_t w = 0; w < kappa; ++w) {
        lists[w] = PostingList(static_cast<std::uint32_t>(w), params.dim);
    }
    std::vector<double> gammas(n, 0.0);
    for (std::size_t id = 0; id < n; ++id) {
        const auto& rec = *by_id[id];
        if (rec.gamma) gammas[id] = *rec.gamma;
        for (const auto& entry : rec.entries) {
            if (entry.word >= kappa) {
                throw InvalidArgument("record word " + std::to_string(entry.word) +
                                      " outside codebook of " + std::to_string(kappa));
            }
            lists[entry.word].append(static_cast<std::uint32_t>(id), entry.signature);
        }
    }
    std::erase_if(lists, [](const PostingList& l) { return l.empty(); });
    return InvertedIndex(params, kappa, std::move(gammas), std::move(lists));
}

namespace {

void rank(std::vector<SearchHit>& hits, std::size_t top_k)
{
    const auto better = [](const SearchHit& a, const SearchHit& b) {
        return a.score != b.score ? a.score > b.score : a.image_id < b.image_id;
    };
    if (top_k != 0 && top_k < hits.size()) {
        std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(top_k),
                          hits.end(), better);
        hits.resize(top_k);
    } else {
        std::sort(hits.begin(), hits.end(), better);
    }
}

}  // namespace

SearchResult search_record(const InvertedIndex& idx, const AggregatedImageRecord& query,
                           std::size_t top_k)
{
    const auto& params = idx.params();
    const std::size_t n = idx.image_count();
    std::vector<double> acc(n, 0.0);
    std::vector<char> touched(n, 0);
    SearchResult result;
    if (!query.gamma) return result;

    for (const auto& entry : query.entries) {
        if (entry.signature.dim() != params.dim) {
            throw InvalidArgument("query signature dim does not match index");
        }
        const PostingList* list = idx.find(entry.word);
        if (list == nullptr) continue;
        auto ids = list->encoded_ids();
        auto sigs = list->packed_signatures();
        auto q = entry.signature.words();
        const std::size_t stride = list->words_per_signature();
        std::size_t pos = 0;
        std::uint64_t id = 0;
        for (std::size_t i = 0; i < list->size(); ++i) {
            std::uint64_t gap = 0;
            varint::decode(ids, pos, gap);
            id += gap;
            std::size_t h = 0;
            for (std::size_t k = 0; k < stride; ++k) {
                h += std::popcount(q[k] ^ sigs[i * stride + k]);
            }
            acc[id] += selectivity_from_hamming(h, params);
            touched[id] = 1;
        }
        result.hamming_comparisons += list->size();
    }

    std::vector<SearchHit> hits;
    hits.reserve(top_k == 0 ? n : std::min(n, top_k * 4));
    const auto gammas = idx.gammas();
    for (std::size_t id = 0; id < n; ++id) {
        double score = 0.0;
        if (touched[id] && gammas[id] > 0.0) score = (*query.gamma * gammas[id]) * acc[id];
        if (top_k == 0 || touched[id]) hits.push_back({static_cast<std::uint32_t>(id), score});
    }
    if (top_k != 0 && hits.size() < top_k) {
        // Pad with unmatched images so that top_k results are returned when available.
        for (std::size_t id = 0; id < n && hits.size() < std::min(n, top_k); ++id) {
            if (!touched[id]) hits.push_back({static_cast<std::uint32_t>(id), 0.0});
        }
    }
    rank(hits, top_k);
    result.ranking = std::move(hits);
    return result;
}

SearchResult search(const InvertedIndex& idx, const Codebook& cb, const MatrixF& query,
                    std::size_t multiplicity, std::size_t top_k)
{
    if (multiplicity < 1) throw InvalidArgument("multiple assignment factor must be >= 1");
    if (cb.kappa() != idx.kappa()) {
        throw InvalidArgument("codebook size does not match the index");
    }
    if (query.rows() == 0) return {};
    const auto quantized = quantize(cb, query, multiplicity);
    return search_record(idx, build_record(quantized), top_k);
}

IndexStats index_stats(const InvertedIndex& idx)
{
    IndexStats s;
    s.image_count = idx.image_count();
    const std::size_t sig_bytes = (idx.params().dim + 7) / 8;
    for (const auto& list : idx.postings()) {
        s.total_signatures += list.size();
        s.id_bytes += list.encoded_ids().size();
        s.signature_bytes += list.size() * sig_bytes;
        ++s.nonempty_words;
    }
    s.bytes = s.id_bytes + s.signature_bytes;
    if (s.image_count > 0) {
        s.mean_words_per_image =
            static_cast<double>(s.total_signatures) / static_cast<double>(s.image_count);
    }
    return s;
}

}  // namespace asmk
