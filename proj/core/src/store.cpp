#include "asmk/store.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <limits>

#include "asmk/varint.hpp"

namespace asmk {

FormatError::FormatError(Kind kind, const std::string& what)
    : Error(
          [&] {
              switch (kind) {
              case Kind::bad_magic: return "format error (bad magic): " + what;
              case Kind::bad_version: return "format error (unsupported version): " + what;
              case Kind::truncated: return "format error (truncated): " + what;
              case Kind::invalid: break;
              }
              return "format error (invalid content): " + what;
          }()),
      kind_(kind)
{
}

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

class Writer {
public:
    void magic(std::string_view m) { out_.insert(out_.end(), m.begin(), m.end()); }
    void u32(std::uint32_t v) { put(v); }
    void u64(std::uint64_t v) { put(v); }
    void f32(float v) { put(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
    void raw(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
    Bytes take() { return std::move(out_); }

private:
    template <class T>
    void put(T v)
    {
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    Bytes out_;
};

class Reader {
public:
    Reader(std::span<const std::uint8_t> in, const char* what) : in_(in), what_(what) {}

    void magic(std::string_view m)
    {
        if (in_.size() < m.size()) {
            throw FormatError(FormatError::Kind::truncated,
                              std::string(what_) + " is shorter than its magic");
        }
        if (std::memcmp(in_.data(), m.data(), m.size()) != 0) {
            throw FormatError(FormatError::Kind::bad_magic,
                              std::string(what_) + " does not start with '" + std::string(m) + "'");
        }
        pos_ = m.size();
    }
    std::uint32_t u32() { return get<std::uint32_t>(); }
    std::uint64_t u64() { return get<std::uint64_t>(); }
    float f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
    double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
    std::span<const std::uint8_t> raw(std::size_t n)
    {
        need(n);
        auto s = in_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    std::span<const std::uint8_t> rest() const { return in_.subspan(pos_); }
    void skip(std::size_t n) { pos_ += n; }
    bool done() const { return pos_ == in_.size(); }
    void expect_end() const
    {
        if (!done()) invalid("trailing bytes after payload");
    }
    void need(std::size_t n) const
    {
        if (in_.size() - pos_ < n) {
            throw FormatError(FormatError::Kind::truncated,
                              std::string(what_) + " ends before its declared payload");
        }
    }
    [[noreturn]] void invalid(const std::string& msg) const
    {
        throw FormatError(FormatError::Kind::invalid, std::string(what_) + ": " + msg);
    }

private:
    template <class T>
    T get()
    {
        need(sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(in_[pos_ + i]) << (8 * i);
        pos_ += sizeof(T);
        return v;
    }
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
    const char* what_;
};

void check_version(std::uint32_t version, const char* what)
{
    if (version != 1) {
        throw FormatError(FormatError::Kind::bad_version,
                          std::string(what) + " version " + std::to_string(version));
    }
}

std::uint32_t checked_u32(std::size_t v, const char* field)
{
    if (v > std::numeric_limits<std::uint32_t>::max()) {
        throw InvalidArgument(std::string(field) + " does not fit in 32 bits");
    }
    return static_cast<std::uint32_t>(v);
}

}  // namespace

DescriptorSetFile to_descriptor_file(const LocalDescriptorSet& set, std::size_t dim)
{
    DescriptorSetFile f;
    f.image_id = set.image_id;
    f.vectors = MatrixF(0, dim);
    for (const auto& d : set.descriptors) {
        f.strengths.push_back(d.strength);
        f.vectors.append_row(d.vector);
    }
    return f;
}

// ---------------------------------------------------------------- feature map

Bytes encode_feature_map(const DenseFeatureMap& map)
{
    Writer w;
    w.magic("DFMP");
    w.u32(1);
    w.u32(map.width());
    w.u32(map.height());
    w.u32(map.depth());
    w.f32(map.scale_factor());
    for (float v : map.data()) w.f32(v);
    return w.take();
}

DenseFeatureMap decode_feature_map(std::span<const std::uint8_t> bytes, bool allow_negative)
{
    Reader r(bytes, "feature map");
    r.magic("DFMP");
    check_version(r.u32(), "feature map");
    const std::uint32_t width = r.u32();
    const std::uint32_t height = r.u32();
    const std::uint32_t depth = r.u32();
    const float scale = r.f32();
    const std::uint64_t count = std::uint64_t{width} * height * depth;
    r.need(count * 4);
    std::vector<float> data(count);
    for (auto& v : data) v = r.f32();
    r.expect_end();
    try {
        return DenseFeatureMap(width, height, depth, scale, std::move(data), allow_negative);
    } catch (const InvalidArgument& e) {
        r.invalid(e.what());
    }
}

// ---------------------------------------------------------------- whitening

Bytes encode_whitening(const WhiteningTransform& t)
{
    Writer w;
    w.magic("WHIT");
    w.u32(checked_u32(t.input_dim(), "whitening input dim"));
    w.u32(checked_u32(t.output_dim(), "whitening output dim"));
    for (Eigen::Index i = 0; i < t.mean.size(); ++i) w.f32(static_cast<float>(t.mean[i]));
    for (Eigen::Index i = 0; i < t.projection.rows(); ++i) {
        for (Eigen::Index j = 0; j < t.projection.cols(); ++j) {
            w.f32(static_cast<float>(t.projection(i, j)));
        }
    }
    return w.take();
}

WhiteningTransform decode_whitening(std::span<const std::uint8_t> bytes)
{
    Reader r(bytes, "whitening");
    r.magic("WHIT");
    const std::uint32_t in_dim = r.u32();
    const std::uint32_t out_dim = r.u32();
    if (in_dim == 0 || out_dim == 0 || out_dim > in_dim) r.invalid("dimensions out of range");
    r.need((std::uint64_t{in_dim} + std::uint64_t{in_dim} * out_dim) * 4);
    WhiteningTransform t;
    t.mean.resize(in_dim);
    for (Eigen::Index i = 0; i < t.mean.size(); ++i) t.mean[i] = r.f32();
    t.projection.resize(out_dim, in_dim);
    for (Eigen::Index i = 0; i < t.projection.rows(); ++i) {
        for (Eigen::Index j = 0; j < t.projection.cols(); ++j) t.projection(i, j) = r.f32();
    }
    r.expect_end();
    return t;
}

// ---------------------------------------------------------------- codebook

Bytes encode_codebook(const Codebook& cb)
{
    Writer w;
    w.magic("CBOK");
    w.u32(checked_u32(cb.kappa(), "kappa"));
    w.u32(checked_u32(cb.dim(), "codebook dim"));
    w.u64(cb.seed());
    for (double v : cb.centroids().data()) w.f32(static_cast<float>(v));
    return w.take();
}

Codebook decode_codebook(std::span<const std::uint8_t> bytes)
{
    Reader r(bytes, "codebook");
    r.magic("CBOK");
    const std::uint32_t kappa = r.u32();
    const std::uint32_t dim = r.u32();
    const std::uint64_t seed = r.u64();
    if (kappa == 0 || dim == 0) r.invalid("empty codebook");
    r.need(std::uint64_t{kappa} * dim * 4);
    MatrixD centroids(kappa, dim);
    for (double& v : centroids.data()) v = r.f32();
    r.expect_end();
    try {
        return Codebook(std::move(centroids), seed);
    } catch (const InvalidArgument& e) {
        r.invalid(e.what());
    }
}

// ---------------------------------------------------------------- descriptor set

Bytes encode_descriptor_set(const DescriptorSetFile& set)
{
    if (set.vectors.rows() != set.strengths.size()) {
        throw InvalidArgument("descriptor set strengths and vectors differ in length");
    }
    if (set.size() > (std::size_t{1} << 24)) {
        throw InvalidArgument("descriptor set exceeds 2^24 descriptors");
    }
    Writer w;
    w.magic("DSET");
    w.u32(1);
    w.u32(checked_u32(set.image_id.size(), "image id length"));
    w.raw({reinterpret_cast<const std::uint8_t*>(set.image_id.data()), set.image_id.size()});
    w.u32(static_cast<std::uint32_t>(set.size()));
    w.u32(checked_u32(set.dim(), "descriptor dim"));
    for (std::size_t i = 0; i < set.size(); ++i) {
        w.f32(set.strengths[i]);
        for (float v : set.vectors.row(i)) w.f32(v);
    }
    return w.take();
}

DescriptorSetFile decode_descriptor_set(std::span<const std::uint8_t> bytes)
{
    Reader r(bytes, "descriptor set");
    r.magic("DSET");
    check_version(r.u32(), "descriptor set");
    const std::uint32_t id_len = r.u32();
    auto id = r.raw(id_len);
    DescriptorSetFile set;
    set.image_id.assign(reinterpret_cast<const char*>(id.data()), id.size());
    const std::uint32_t count = r.u32();
    const std::uint32_t dim = r.u32();
    if (count > (1U << 24)) r.invalid("descriptor count exceeds 2^24");
    r.need(std::uint64_t{count} * (std::uint64_t{dim} + 1) * 4);
    set.strengths.resize(count);
    set.vectors = MatrixF(count, dim);
    for (std::uint32_t i = 0; i < count; ++i) {
        set.strengths[i] = r.f32();
        for (float& v : set.vectors.row(i)) v = r.f32();
    }
    r.expect_end();
    return set;
}

// ---------------------------------------------------------------- index

Bytes encode_index(const InvertedIndex& idx)
{
    const auto& p = idx.params();
    Writer w;
    w.magic("ASMK");
    w.u32(1);
    w.u32(checked_u32(idx.kappa(), "kappa"));
    w.u32(checked_u32(p.dim, "signature dim"));
    w.f32(static_cast<float>(p.alpha));
    w.f32(static_cast<float>(p.tau));
    w.u64(idx.image_count());
    for (double g : idx.gammas()) w.f64(g);
    const std::size_t sig_bytes = (p.dim + 7) / 8;
    for (const auto& list : idx.postings()) {
        w.u32(list.word());
        w.u32(checked_u32(list.size(), "posting length"));
        w.raw(list.encoded_ids());
        auto packed = list.packed_signatures();
        const std::size_t stride = list.words_per_signature();
        for (std::size_t i = 0; i < list.size(); ++i) {
            for (std::size_t b = 0; b < sig_bytes; ++b) {
                const std::uint64_t word = packed[i * stride + b / 8];
                const std::uint8_t byte = static_cast<std::uint8_t>(word >> (8 * (b % 8)));
                w.raw({&byte, 1});
            }
        }
    }
    return w.take();
}

InvertedIndex decode_index(std::span<const std::uint8_t> bytes)
{
    Reader r(bytes, "index");
    r.magic("ASMK");
    check_version(r.u32(), "index");
    const std::uint32_t kappa = r.u32();
    KernelParams p;
    p.dim = r.u32();
    p.alpha = r.f32();
    p.tau = r.f32();
    const std::uint64_t image_count = r.u64();
    if (kappa == 0 || p.dim == 0) r.invalid("zero kappa or signature dim");
    try {
        p.validate();
    } catch (const InvalidArgument& e) {
        r.invalid(e.what());
    }
    r.need(image_count * 8);
    std::vector<double> gammas(image_count);
    for (double& g : gammas) g = r.f64();

    const std::size_t sig_bytes = (p.dim + 7) / 8;
    const std::size_t stride = (p.dim + 63) / 64;
    std::vector<PostingList> lists;
    while (!r.done()) {
        const std::uint32_t word = r.u32();
        const std::uint32_t length = r.u32();
        if (length == 0) r.invalid("empty posting list");
        auto rest = r.rest();
        std::size_t pos = 0;
        for (std::uint32_t i = 0; i < length; ++i) {
            std::uint64_t v = 0;
            if (!varint::decode(rest, pos, v)) {
                throw FormatError(FormatError::Kind::truncated, "index posting ids are cut short");
            }
        }
        std::vector<std::uint8_t> ids(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(pos));
        r.skip(pos);
        auto raw = r.raw(std::size_t{length} * sig_bytes);
        std::vector<std::uint64_t> packed(std::size_t{length} * stride, 0);
        for (std::size_t i = 0; i < length; ++i) {
            for (std::size_t b = 0; b < sig_bytes; ++b) {
                packed[i * stride + b / 8] |= std::uint64_t{raw[i * sig_bytes + b]} << (8 * (b % 8));
            }
            if (p.dim % 64 != 0) {
                const std::uint64_t spare = ~((std::uint64_t{1} << (p.dim % 64)) - 1);
                if (packed[i * stride + stride - 1] & spare) r.invalid("signature padding bits set");
            }
        }
        try {
            lists.push_back(PostingList::from_encoded(word, p.dim, length, std::move(ids),
                                                      std::move(packed)));
        } catch (const InvalidArgument& e) {
            r.invalid(e.what());
        }
    }
    try {
        return InvertedIndex(p, kappa, std::move(gammas), std::move(lists));
    } catch (const InvalidArgument& e) {
        r.invalid(e.what());
    }
}

// ---------------------------------------------------------------- files

Bytes read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

std::string read_text(const std::filesystem::path& path)
{
    auto bytes = read_file(path);
    return {bytes.begin(), bytes.end()};
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes)
{
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("short write to " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
}

void write_text_atomic(const std::filesystem::path& path, std::string_view text)
{
    write_file_atomic(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

// ---------------------------------------------------------------- text formats

namespace {

std::vector<std::string_view> split(std::string_view s, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t end = s.find(sep, start);
        out.push_back(s.substr(start, end == std::string_view::npos ? end : end - start));
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    return out;
}

template <class F>
void for_each_line(std::string_view text, F&& f)
{
    std::size_t line_no = 0;
    for (auto line : split(text, '\n')) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#') continue;
        f(line, line_no);
    }
}

[[noreturn]] void bad_line(const char* what, std::size_t line_no, const std::string& msg)
{
    throw FormatError(FormatError::Kind::invalid,
                      std::string(what) + " line " + std::to_string(line_no) + ": " + msg);
}

std::set<std::string> id_list(std::string_view field, std::string_view prefix, const char* what,
                              std::size_t line_no)
{
    if (field.substr(0, prefix.size()) != prefix) {
        bad_line(what, line_no, "expected field starting with '" + std::string(prefix) + "'");
    }
    field.remove_prefix(prefix.size());
    std::set<std::string> ids;
    if (field.empty()) return ids;
    for (auto id : split(field, ',')) {
        if (!id.empty()) ids.emplace(id);
    }
    return ids;
}

std::string join(const std::set<std::string>& ids)
{
    std::string out;
    for (const auto& id : ids) {
        if (!out.empty()) out += ',';
        out += id;
    }
    return out;
}

}  // namespace

RetrievalGroundTruth parse_retrieval_gt(std::string_view text)
{
    RetrievalGroundTruth gt;
    for_each_line(text, [&](std::string_view line, std::size_t n) {
        auto fields = split(line, '\t');
        if (fields.size() < 2 || fields.size() > 3) bad_line("ground truth", n, "expected 2 or 3 fields");
        QueryGroundTruth q;
        q.positives = id_list(fields[1], "positives:", "ground truth", n);
        if (fields.size() == 3) q.ignores = id_list(fields[2], "ignores:", "ground truth", n);
        for (const auto& id : q.positives) {
            if (q.ignores.contains(id)) bad_line("ground truth", n, "id " + id + " is both positive and ignored");
        }
        if (!gt.emplace(std::string(fields[0]), std::move(q)).second) {
            bad_line("ground truth", n, "duplicate query " + std::string(fields[0]));
        }
    });
    return gt;
}

std::string format_retrieval_gt(const RetrievalGroundTruth& gt)
{
    std::string out;
    for (const auto& [query, q] : gt) {
        out += query + "\tpositives:" + join(q.positives) + "\tignores:" + join(q.ignores) + "\n";
    }
    return out;
}

std::map<std::string, std::string> parse_image_labels(std::string_view text)
{
    std::map<std::string, std::string> labels;
    for_each_line(text, [&](std::string_view line, std::size_t n) {
        auto fields = split(line, '\t');
        if (fields.size() != 2 || fields[1].empty()) bad_line("image labels", n, "expected id<TAB>class");
        labels[std::string(fields[0])] = std::string(fields[1]);
    });
    return labels;
}

std::map<std::string, std::optional<std::string>> parse_query_labels(std::string_view text)
{
    std::map<std::string, std::optional<std::string>> labels;
    for_each_line(text, [&](std::string_view line, std::size_t n) {
        auto fields = split(line, '\t');
        if (fields.size() != 2 || fields[1].empty()) bad_line("query labels", n, "expected id<TAB>class|NONE");
        std::optional<std::string> cls;
        if (fields[1] != "NONE") cls = std::string(fields[1]);
        labels[std::string(fields[0])] = cls;
    });
    return labels;
}

std::string format_image_labels(const std::map<std::string, std::string>& labels)
{
    std::string out;
    for (const auto& [id, cls] : labels) out += id + "\t" + cls + "\n";
    return out;
}

std::string format_query_labels(const std::map<std::string, std::optional<std::string>>& labels)
{
    std::string out;
    for (const auto& [id, cls] : labels) out += id + "\t" + cls.value_or("NONE") + "\n";
    return out;
}

std::string format_rankings(std::span<const RankingRow> rows)
{
    std::string out;
    char buf[64];
    for (const auto& row : rows) {
        auto res = std::to_chars(buf, buf + sizeof(buf), row.score, std::chars_format::general, 17);
        out += row.query_id + "\t" + row.image_id + "\t" + std::string(buf, res.ptr) + "\t" +
               std::to_string(row.rank) + "\n";
    }
    return out;
}

std::map<std::string, ScoredRanking> parse_rankings(std::string_view text)
{
    std::map<std::string, std::vector<std::pair<std::size_t, std::pair<std::string, double>>>> rows;
    for_each_line(text, [&](std::string_view line, std::size_t n) {
        auto fields = split(line, '\t');
        if (fields.size() != 4) bad_line("rankings", n, "expected 4 fields");
        double score = 0.0;
        std::size_t rank = 0;
        auto s = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), score);
        auto k = std::from_chars(fields[3].data(), fields[3].data() + fields[3].size(), rank);
        if (s.ec != std::errc{} || k.ec != std::errc{}) bad_line("rankings", n, "bad score or rank");
        rows[std::string(fields[0])].push_back({rank, {std::string(fields[1]), score}});
    });
    std::map<std::string, ScoredRanking> out;
    for (auto& [query, entries] : rows) {
        std::stable_sort(entries.begin(), entries.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        auto& ranking = out[query];
        for (auto& e : entries) ranking.push_back(std::move(e.second));
    }
    return out;
}

}  // namespace asmk
