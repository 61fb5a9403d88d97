// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <sstream>

#include "asmk/store.hpp"
#include "asmk/synthetic.hpp"
#include "commands.hpp"
#include "oracles.hpp"

using namespace asmk;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof(buf), f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

WhiteningTransform random_whitening(SplitMix64& rng, std::size_t in, std::size_t out)
{
    WhiteningTransform t;
    t.projection.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
    t.mean.resize(static_cast<Eigen::Index>(in));
    for (Eigen::Index i = 0; i < t.projection.size(); ++i) t.projection.data()[i] = rng.uniform(-1, 1);
    for (Eigen::Index i = 0; i < t.mean.size(); ++i) t.mean[i] = rng.uniform(0, 0.5);
    return t;
}

/// Every descriptor of the database, strided down to roughly `target` rows.
MatrixF training_sample(const SyntheticCorpus& c, std::size_t target)
{
    std::size_t total = 0;
    for (const auto& img : c.database) total += img.size();
    const std::size_t stride = std::max<std::size_t>(1, total / target);
    MatrixF sample(0, c.database.front().dim());
    std::size_t k = 0;
    for (const auto& img : c.database) {
        for (std::size_t i = 0; i < img.size(); ++i, ++k) {
            if (k % stride == 0) sample.append_row(img.vectors.row(i));
        }
    }
    return sample;
}

struct Engine {
    Codebook codebook;
    KernelParams params;
    std::vector<AggregatedImageRecord> records;
    InvertedIndex index;
    double mean_words = 0.0;
};

Engine build_engine(const SyntheticCorpus& c, std::size_t kappa, std::size_t sample_size,
                    std::size_t iterations)
{
    Engine e;
    KMeansOptions o;
    o.kappa = kappa;
    o.iterations = iterations;
    o.seed = 1;
    e.codebook = train_codebook(training_sample(c, sample_size), o);
    e.params.dim = c.database.front().dim();
    for (std::size_t i = 0; i < c.database.size(); ++i) {
        e.records.push_back(
            build_record(quantize(e.codebook, c.database[i].vectors, 1), static_cast<std::uint32_t>(i)));
        e.mean_words += static_cast<double>(e.records.back().entries.size());
    }
    e.mean_words /= static_cast<double>(c.database.size());
    e.index = build_index(e.records, e.params, kappa);
    return e;
}

double asmk_map(const SyntheticCorpus& c, const Engine& e, std::size_t ma)
{
    std::map<std::string, std::vector<std::string>> runs;
    for (const auto& q : c.queries) {
        auto& run = runs[q.image_id];
        for (const auto& hit : search(e.index, e.codebook, q.vectors, ma, 0).ranking) {
            run.push_back(c.database[hit.image_id].image_id);
        }
    }
    return mean_average_precision(runs, c.retrieval);
}

double smk_map(const SyntheticCorpus& c, const Engine& e)
{
    std::vector<SmkImage> db;
    for (const auto& img : c.database) db.push_back(prepare_smk(quantize(e.codebook, img.vectors, 1), e.params));
    std::map<std::string, std::vector<std::string>> runs;
    for (const auto& q : c.queries) {
        const auto qs = prepare_smk(quantize(e.codebook, q.vectors, 1), e.params);
        std::vector<std::pair<double, std::size_t>> scored;
        for (std::size_t i = 0; i < db.size(); ++i) scored.emplace_back(-smk_score(qs, db[i], e.params), i);
        std::sort(scored.begin(), scored.end());
        auto& run = runs[q.image_id];
        for (const auto& [s, i] : scored) run.push_back(c.database[i].image_id);
    }
    return mean_average_precision(runs, c.retrieval);
}

std::vector<double> average_ranks(const std::vector<double>& v)
{
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = (static_cast<double>(i + j) / 2.0) + 1.0;
        i = j + 1;
    }
    return ranks;
}

/// Pearson correlation of average ranks, so ties are handled.
double spearman(const std::vector<double>& a, const std::vector<double>& b)
{
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0.0;
    double saa = 0.0;
    double sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

// ------------------------------------------------------------------ criteria

Verdict kernel_equivalences()
{
    const auto t0 = std::chrono::steady_clock::now();
    SplitMix64 rng(101);
    double smk_err = 0.0;
    double spoc_err = 0.0;
    double how_err = 0.0;
    const int trials = 1000;
    for (int i = 0; i < trials; ++i) {
        KernelParams p;
        p.dim = 1 + rng.below(32);
        p.alpha = 1.0 + 3.0 * rng.uniform();
        p.tau = i % 2 == 0 ? 0.0 : rng.uniform(0.0, 0.5);
        const std::size_t kappa = 1 + rng.below(64);
        const auto x = oracle::random_quantized(rng, 1 + rng.below(64), kappa, p.dim);
        const auto y = oracle::random_quantized(rng, 1 + rng.below(64), kappa, p.dim);
        const double want = oracle::smk_all_pairs(x, y, p.alpha, p.tau);
        const double got = smk_score(x, y, p);
        smk_err = std::max(smk_err, want == 0.0 ? std::abs(got) : oracle::relative_error(got, want));
    }
    for (int i = 0; i < trials; ++i) {
        const auto depth = static_cast<std::uint32_t>(1 + rng.below(32));
        const auto a = oracle::random_map(rng, 1 + rng.below(8), 1 + rng.below(8), depth);
        const auto b = oracle::random_map(rng, 1 + rng.below(8), 1 + rng.below(8), depth);
        const double got = oracle::dot(spoc_pool(a).vector, spoc_pool(b).vector);
        spoc_err = std::max(spoc_err, oracle::relative_error(got, oracle::spoc_double_sum(a, b)));
    }
    for (int i = 0; i < trials; ++i) {
        const auto depth = static_cast<std::uint32_t>(2 + rng.below(31));
        const auto t = random_whitening(rng, depth, 1 + rng.below(depth));
        const auto a = oracle::random_map(rng, 1 + rng.below(8), 1 + rng.below(8), depth);
        const auto b = oracle::random_map(rng, 1 + rng.below(8), 1 + rng.below(8), depth);
        const double got = oracle::dot(how_pool(a, t, 3).vector, how_pool(b, t, 3).vector);
        how_err = std::max(how_err, oracle::relative_error(got, oracle::how_double_sum(a, b, t, 3)));
    }
    const double secs = seconds_since(t0);
    const double worst = std::max({smk_err, spoc_err, how_err});
    return {worst < 1e-6 && secs < 30.0,
            fmt("%d instances each; max rel err smk=%.2e spoc=%.2e how=%.2e; %.1f s", trials, smk_err, spoc_err,
                how_err, secs)};
}

SyntheticCorpus small_corpus()
{
    SyntheticSpec s;
    s.n_images = 200;
    s.n_queries = 20;
    s.descriptors_per_image = 150;
    s.dim = 64;
    s.n_objects = 20;
    s.noise_sigma = 0.1;
    s.seed = 2;
    return generate_synthetic(s);
}

Verdict index_matches_pairwise(const SyntheticCorpus& c, const Engine& e)
{
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    std::size_t pairs = 0;
    for (const std::size_t ma : {1, 5}) {
        for (const auto& q : c.queries) {
            const auto ranking = search(e.index, e.codebook, q.vectors, ma, 0).ranking;
            std::vector<double> got(c.database.size(), 0.0);
            for (const auto& hit : ranking) got[hit.image_id] = hit.score;
            const auto qr = build_record(quantize(e.codebook, q.vectors, ma));
            for (std::size_t i = 0; i < c.database.size(); ++i, ++pairs) {
                worst = std::max(worst, std::abs(got[i] - asmk_score(qr, e.records[i], e.params)));
            }
        }
    }
    const double secs = seconds_since(t0);
    return {worst < 1e-9 && secs < 60.0, fmt("%zu pairs, ma in {1,5}; max |delta|=%.2e; %.1f s", pairs, worst, secs)};
}

Verdict self_retrieval(const SyntheticCorpus& c, const Engine& e)
{
    std::size_t first = 0;
    double worst = 0.0;
    for (std::size_t i = 0; i < c.database.size(); ++i) {
        const auto ranking = search(e.index, e.codebook, c.database[i].vectors, 1, 1).ranking;
        if (!ranking.empty() && ranking[0].image_id == i) {
            ++first;
            worst = std::max(worst, std::abs(ranking[0].score - 1.0));
        } else {
            worst = std::max(worst, 1.0);
        }
    }
    return {first == c.database.size() && worst <= 1e-9,
            fmt("%zu/%zu ranked first; max |score-1|=%.2e", first, c.database.size(), worst)};
}

Verdict smk_equals_asmk()
{
    SplitMix64 rng(404);
    double worst = 0.0;
    const int trials = 500;
    for (int t = 0; t < trials; ++t) {
        KernelParams p;
        p.dim = 1 + rng.below(64);
        p.alpha = 1.0 + 4.0 * rng.uniform();
        p.tau = t % 3 == 0 ? 0.0 : rng.uniform(0.0, 0.6);
        const std::size_t kappa = 8 + rng.below(120);
        auto make = [&] {
            std::vector<std::uint32_t> words(kappa);
            std::iota(words.begin(), words.end(), 0u);
            for (std::size_t i = 0; i < words.size(); ++i) std::swap(words[i], words[i + rng.below(kappa - i)]);
            auto x = oracle::random_quantized(rng, 1 + rng.below(kappa), kappa, p.dim);
            for (std::size_t i = 0; i < x.size(); ++i) x[i].word = words[i];
            return x;
        };
        const auto x = make();
        const auto y = make();
        worst = std::max(worst, std::abs(asmk_score(build_record(x), build_record(y), p) - smk_score(x, y, p)));
    }
    return {worst <= 1e-12, fmt("%d trials; max |asmk-smk|=%.2e", trials, worst)};
}

Verdict burstiness()
{
    const auto t0 = std::chrono::steady_clock::now();
    SyntheticSpec s;
    s.n_images = 500;
    s.n_queries = 50;
    s.descriptors_per_image = 300;
    s.dim = 64;
    s.n_objects = 50;
    s.object_fraction = 0.6;
    s.shared_fraction = 0.35;
    s.shared_patterns = 64;
    s.seed = 5;

    s.burst_factor = 1;
    const auto plain = generate_synthetic(s);
    s.burst_factor = 8;
    const auto bursty = generate_synthetic(s);

    const auto e_plain = build_engine(plain, 1024, 40000, 10);
    const auto e_bursty = build_engine(bursty, 1024, 40000, 10);
    const double ratio = e_plain.mean_words / e_bursty.mean_words;
    const double asmk = asmk_map(bursty, e_bursty, 1);
    const double smk = smk_map(bursty, e_bursty);
    const double secs = seconds_since(t0);
    return {ratio >= 4.0 && asmk > smk && secs < 300.0,
            fmt("mean |C_X| %.1f -> %.1f (%.2fx); burst 8 mAP asmk=%.3f smk=%.3f; %.1f s", e_plain.mean_words,
                e_bursty.mean_words, ratio, asmk, smk, secs)};
}

Verdict whitening()
{
    SplitMix64 rng(606);
    const std::size_t dim = 32;
    const std::size_t n = 4000;
    std::vector<std::vector<double>> mix(dim, std::vector<double>(dim));
    for (auto& row : mix) {
        for (double& v : row) v = rng.uniform(-1, 1);
    }
    MatrixF sample(n, dim);
    std::vector<double> z(dim);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < dim; ++j) z[j] = rng.normal() * std::pow(0.85, static_cast<double>(j));
        for (std::size_t r = 0; r < dim; ++r) {
            double v = 3.0;
            for (std::size_t j = 0; j < dim; ++j) v += mix[r][j] * z[j];
            sample(i, r) = static_cast<float>(v);
        }
    }
    double off = 0.0;
    double diag = 0.0;
    for (const std::size_t out : {std::size_t{16}, dim}) {
        for (const bool zero_eps : {false, true}) {
            const auto t = zero_eps ? fit_whitening(sample, out, 0.0) : fit_whitening(sample, out);
            std::vector<std::vector<double>> rows;
            for (std::size_t i = 0; i < n; ++i) rows.push_back(apply_whitening(t, sample.row(i)));
            const auto cov = oracle::covariance(rows);
            for (std::size_t a = 0; a < out; ++a) {
                for (std::size_t b = 0; b < out; ++b) {
                    if (a != b) {
                        off = std::max(off, std::abs(cov[a][b]));
                    } else if (zero_eps) {
                        diag = std::max(diag, std::abs(cov[a][a] - 1.0));
                    }
                }
            }
        }
    }
    return {off < 1e-6 && diag <= 1e-6,
            fmt("max |off-diagonal|=%.2e; eps=0 max |diag-1|=%.2e", off, diag)};
}

Verdict metrics()
{
    SplitMix64 rng(707);
    double worst = 0.0;
    bool labels_agree = true;
    const int trials = 1000;
    auto id = [](std::size_t i) { return "i" + std::to_string(i); };
    for (int t = 0; t < trials; ++t) {
        // Retrieval: AP and mAP.
        RetrievalGroundTruth gt;
        std::map<std::string, std::vector<std::string>> runs;
        double sum = 0.0;
        std::size_t used = 0;
        const std::size_t nq = 1 + rng.below(8);
        for (std::size_t q = 0; q < nq; ++q) {
            const std::size_t n = 1 + rng.below(40);
            std::vector<std::string> ranking;
            for (std::size_t i = 0; i < n; ++i) ranking.push_back(id(i));
            for (std::size_t i = 0; i < n; ++i) std::swap(ranking[i], ranking[i + rng.below(n - i)]);
            QueryGroundTruth g;
            for (std::size_t i = 0; i < n; ++i) {
                const auto roll = rng.below(10);
                if (roll < 3) g.positives.insert(id(i));
                if (roll == 3) g.ignores.insert(id(i));
            }
            if (rng.below(3) == 0) g.positives.insert("absent");
            const std::string qid = "q" + std::to_string(q);
            const auto want = oracle::average_precision(ranking, g);
            const auto got = average_precision(ranking, g);
            if (got.has_value() != want.has_value()) labels_agree = false;
            if (got && want) {
                worst = std::max(worst, std::abs(*got - *want));
                sum += *want;
                ++used;
            }
            gt[qid] = g;
            runs[qid] = ranking;
        }
        if (used > 0) worst = std::max(worst, std::abs(mean_average_precision(runs, gt) - sum / static_cast<double>(used)));

        // Classification: CLS1/2/3 and micro-AP.
        ClassGroundTruth labels;
        const std::size_t n_classes = 2 + rng.below(6);
        const std::size_t n_images = 10 + rng.below(40);
        for (std::size_t i = 0; i < n_images; ++i) labels.image_class[id(i)] = "c" + std::to_string(rng.below(n_classes));
        std::map<std::string, ScoredRanking> scored;
        for (std::size_t q = 0; q < 1 + rng.below(15); ++q) {
            const std::string qid = "q" + std::to_string(q);
            if (rng.below(5) == 0) {
                labels.query_class[qid] = std::nullopt;
            } else {
                labels.query_class[qid] = "c" + std::to_string(rng.below(n_classes));
            }
            ScoredRanking r;
            double score = 1.0;
            for (std::size_t i = 0; i < n_images; ++i) {
                if (rng.below(4) == 0) continue;
                score -= static_cast<double>(rng.below(3)) * 0.01;
                r.emplace_back(rng.below(20) == 0 ? "unlabelled" : id(rng.below(n_images)), std::max(score, 0.0));
            }
            // Image ids must be unique within a ranking.
            std::set<std::string> seen;
            std::erase_if(r, [&](const auto& p) { return !seen.insert(p.first).second; });
            scored[qid] = r;
        }
        const auto freq = class_frequencies(labels);
        std::size_t m = 0;
        for (const auto& [q, c] : labels.query_class) m += c.has_value();
        for (auto v : {ClassifierVariant::cls1, ClassifierVariant::cls2, ClassifierVariant::cls3}) {
            std::vector<ClassPrediction> preds;
            for (const auto& [q, r] : scored) {
                const auto got = classify(q, r, labels, v, freq, freq.size());
                const auto want = oracle::classify(r, labels, v, freq, freq.size());
                if (got.has_value() != want.has_value()) {
                    labels_agree = false;
                    continue;
                }
                if (!got) continue;
                if (got->predicted_class != want->first) labels_agree = false;
                worst = std::max(worst, std::abs(got->confidence - want->second));
                preds.push_back(*got);
            }
            if (m > 0) {
                worst = std::max(worst,
                                 std::abs(micro_average_precision(preds, labels) - oracle::micro_ap(preds, labels)));
            }
        }
    }
    return {labels_agree && worst <= 1e-12,
            fmt("%d instances; predictions %s; max |delta|=%.2e", trials, labels_agree ? "agree" : "DIFFER", worst)};
}

int cli(const std::vector<std::string>& args, std::string* err_text = nullptr)
{
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run(args, out, err);
    if (err_text) *err_text = err.str();
    return code;
}

Verdict determinism(const fs::path& scratch)
{
    auto pipeline = [&](const fs::path& d) -> std::string {
        const auto s = d.string();
        std::string err;
        const std::vector<std::vector<std::string>> steps = {
            {"synth", "--images", "150", "--queries", "15", "--per-image", "80", "--dim", "32", "--objects", "10",
             "--noise", "0.05", "--seed", "8", "--out-dir", s},
            {"train-codebook", "@" + s + "/db.lst", "--kappa", "256", "--iters", "10", "--sample", "8000", "--seed",
             "8", "--out", s + "/codebook.bin"},
            {"index", "@" + s + "/db.lst", "--codebook", s + "/codebook.bin", "--out", s + "/index.bin"},
            {"search", "@" + s + "/queries.lst", "--index", s + "/index.bin", "--codebook", s + "/codebook.bin",
             "--out", s + "/rankings.tsv"},
            {"evaluate", "--rankings", s + "/rankings.tsv", "--gt", s + "/gt_retrieval.tsv", "--out",
             s + "/metrics.txt"},
            {"evaluate", "--rankings", s + "/rankings.tsv", "--mode", "cls3", "--db-labels", s + "/db_labels.tsv",
             "--query-labels", s + "/query_labels.tsv", "--out", s + "/cls3.txt"},
        };
        for (const auto& step : steps) {
            if (cli(step, &err) != 0) return step[0] + ": " + err;
        }
        return {};
    };
    fs::remove_all(scratch);
    for (const char* run : {"run1", "run2"}) {
        if (auto failure = pipeline(scratch / run); !failure.empty()) return {false, failure};
    }
    std::size_t same = 0;
    std::size_t bytes = 0;
    const std::vector<std::string> files = {"codebook.bin", "index.bin", "index.bin.ids", "rankings.tsv",
                                            "metrics.txt", "cls3.txt"};
    for (const auto& f : files) {
        const auto a = read_file(scratch / "run1" / f);
        const auto b = read_file(scratch / "run2" / f);
        same += a == b;
        bytes += a.size();
    }
    fs::remove_all(scratch);
    return {same == files.size(), fmt("%zu/%zu files byte-identical (%zu bytes)", same, files.size(), bytes)};
}

Verdict round_trips()
{
    SplitMix64 rng(909);
    auto f32 = [&](double lo, double hi) { return static_cast<double>(static_cast<float>(rng.uniform(lo, hi))); };
    std::size_t checked = 0;
    std::size_t failed = 0;
    std::set<std::string> broken;
    auto check = [&](const char* what, bool ok) {
        ++checked;
        failed += !ok;
        if (!ok) broken.insert(what);
    };
    for (int t = 0; t < 50; ++t) {
        const auto map = oracle::random_map(rng, 1 + rng.below(12), 1 + rng.below(12), 1 + rng.below(40),
                                            static_cast<float>(f32(0.1, 3.0)));
        const auto mb = encode_feature_map(map);
        check("map", decode_feature_map(mb) == map && encode_feature_map(decode_feature_map(mb)) == mb);

        WhiteningTransform w;
        const auto in = 1 + rng.below(40);
        w.projection.resize(static_cast<Eigen::Index>(1 + rng.below(in)), static_cast<Eigen::Index>(in));
        w.mean.resize(static_cast<Eigen::Index>(in));
        for (Eigen::Index i = 0; i < w.projection.size(); ++i) w.projection.data()[i] = f32(-2, 2);
        for (Eigen::Index i = 0; i < w.mean.size(); ++i) w.mean[i] = f32(-2, 2);
        const auto wb = encode_whitening(w);
        const auto w2 = decode_whitening(wb);
        check("whitening", w2.projection == w.projection && w2.mean == w.mean && encode_whitening(w2) == wb);

        MatrixD centroids(1 + rng.below(100), 1 + rng.below(64));
        for (auto& v : centroids.data()) v = f32(-5, 5);
        const Codebook cb(centroids, rng.next());
        const auto cbb = encode_codebook(cb);
        check("codebook", decode_codebook(cbb) == cb && encode_codebook(decode_codebook(cbb)) == cbb);

        DescriptorSetFile set;
        set.image_id = "img" + std::to_string(rng.next());
        set.vectors = oracle::random_matrix(rng, rng.below(50), 1 + rng.below(64));
        for (std::size_t i = 0; i < set.vectors.rows(); ++i) set.strengths.push_back(static_cast<float>(f32(0, 9)));
        const auto sb = encode_descriptor_set(set);
        check("descriptors", decode_descriptor_set(sb) == set && encode_descriptor_set(decode_descriptor_set(sb)) == sb);

        const std::size_t kappa = 1 + rng.below(400);
        const std::size_t dim = 1 + rng.below(140);
        std::vector<AggregatedImageRecord> records;
        for (std::size_t i = 0; i < 1 + rng.below(200); ++i) {
            records.push_back(build_record(oracle::random_quantized(rng, rng.below(40), kappa, dim),
                                           static_cast<std::uint32_t>(i)));
        }
        KernelParams p;
        p.dim = dim;
        p.alpha = f32(1, 5);
        p.tau = f32(0, 0.9);
        const auto idx = build_index(records, p, kappa);
        const auto ib = encode_index(idx);
        check("index", decode_index(ib) == idx && encode_index(decode_index(ib)) == ib);

        std::vector<double> scores(20);
        for (double& v : scores) v = rng.uniform();
        std::sort(scores.rbegin(), scores.rend());
        std::vector<RankingRow> rows;
        for (std::size_t r = 0; r < scores.size(); ++r) {
            rows.push_back({"q" + std::to_string(t), "db" + std::to_string(r), scores[r], r + 1});
        }
        const auto text = format_rankings(rows);
        const auto parsed = parse_rankings(text);
        bool same = parsed.size() == 1 && parsed.begin()->second.size() == rows.size();
        for (std::size_t r = 0; same && r < rows.size(); ++r) {
            same = parsed.begin()->second[r].first == rows[r].image_id && parsed.begin()->second[r].second == rows[r].score;
        }
        check("rankings", same);
    }
    std::string detail = fmt("%zu/%zu artifacts round-tripped bitwise", checked - failed, checked);
    for (const auto& b : broken) detail += "; " + b + " differs";
    return {failed == 0, detail};
}

Verdict end_to_end()
{
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<double> noise = {0.0, 0.1, 0.3, 1.0};
    std::vector<double> maps;
    for (const double sigma : noise) {
        SyntheticSpec s;
        s.n_images = 2000;
        s.n_queries = 50;
        s.descriptors_per_image = 300;
        s.dim = 128;
        s.n_objects = 50;
        s.noise_sigma = sigma;
        s.seed = 10;
        const auto c = generate_synthetic(s);
        const auto e = build_engine(c, 4096, 40000, 8);
        maps.push_back(asmk_map(c, e, 5));
        std::fprintf(stderr, "  noise %.1f: mAP %.4f (%.0f s elapsed)\n", sigma, maps.back(), seconds_since(t0));
    }
    const double rho = spearman(noise, maps);
    const double secs = seconds_since(t0);
    return {maps[0] >= 0.9 && rho < 0.0 && secs < 600.0,
            fmt("mAP %.3f/%.3f/%.3f/%.3f at noise 0/0.1/0.3/1.0; spearman %.2f; %.0f s", maps[0], maps[1], maps[2],
                maps[3], rho, secs)};
}

}  // namespace

int main(int argc, char** argv)
{
    // Optional argument: run only the listed criteria, e.g. `acceptance 1 4 7`.
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

    std::optional<SyntheticCorpus> corpus;
    std::optional<Engine> engine;
    auto shared = [&]() -> std::pair<const SyntheticCorpus&, const Engine&> {
        if (!corpus) {
            corpus = small_corpus();
            engine = build_engine(*corpus, 1024, 20000, 10);
        }
        return {*corpus, *engine};
    };

    const fs::path scratch = fs::temp_directory_path() / "asmk_acceptance";
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
        {"kernel equivalences", kernel_equivalences},
        {"index equals pairwise scoring", [&] { auto [c, e] = shared(); return index_matches_pairwise(c, e); }},
        {"self-retrieval", [&] { auto [c, e] = shared(); return self_retrieval(c, e); }},
        {"smk/asmk coincidence", smk_equals_asmk},
        {"burstiness", burstiness},
        {"whitening", whitening},
        {"metrics", metrics},
        {"determinism", [&] { return determinism(scratch); }},
        {"format round-trips", round_trips},
        {"end-to-end retrieval", end_to_end},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int number = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(number)) continue;
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        failures += !v.pass;
        std::printf("%s  %2d %-30s %s\n", v.pass ? "PASS" : "FAIL", number, criteria[i].first.c_str(),
                    v.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
