#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "asmk/codebook.hpp"
#include "asmk/eval.hpp"
#include "asmk/features.hpp"
#include "asmk/index.hpp"
#include "asmk/kernel.hpp"
#include "asmk/random.hpp"
#include "asmk/store.hpp"
#include "asmk/synthetic.hpp"

namespace asmk::cli {

namespace fs = std::filesystem;

namespace {

/// Expands `@list` arguments into the paths listed in that file (one per line, relative
/// paths resolved against the list's directory).
std::vector<fs::path> expand_inputs(const std::vector<std::string>& args)
{
    std::vector<fs::path> out;
    for (const auto& a : args) {
        if (a.size() > 1 && a.front() == '@') {
            const fs::path list = a.substr(1);
            std::istringstream in(read_text(list));
            std::string line;
            while (std::getline(in, line)) {
                if (!line.empty() && line.back() == '\r') line.pop_back();
                if (line.empty() || line.front() == '#') continue;
                fs::path p = line;
                out.push_back(p.is_absolute() ? p : list.parent_path() / p);
            }
        } else {
            out.emplace_back(a);
        }
    }
    return out;
}

void require_inputs(const std::vector<fs::path>& inputs, const char* what)
{
    if (inputs.empty()) throw InvalidArgument(std::string("no ") + what + " given");
}

std::string format_double(double v)
{
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
}

fs::path ids_path(const fs::path& index)
{
    auto p = index;
    p += ".ids";
    return p;
}

std::vector<std::string> read_lines(const fs::path& path)
{
    std::vector<std::string> lines;
    std::istringstream in(read_text(path));
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

/// Keeps the first `topn` rows (descriptor sets are stored strongest first).
MatrixF strongest(const DescriptorSetFile& set, std::size_t topn)
{
    if (topn == 0 || set.size() <= topn) return set.vectors;
    MatrixF out(topn, set.dim());
    std::copy_n(set.vectors.data().begin(), topn * set.dim(), out.data().begin());
    return out;
}

// ------------------------------------------------------------------ commands

struct FitWhiteningArgs {
    std::vector<std::string> inputs;
    std::size_t dim = 128;
    std::optional<double> eps;
    unsigned smooth = 3;
    bool allow_negative = false;
    std::string out;
};

int fit_whitening_cmd(const FitWhiteningArgs& a, std::ostream& out)
{
    const auto inputs = expand_inputs(a.inputs);
    require_inputs(inputs, "feature maps");
    MatrixF sample;
    for (const auto& path : inputs) {
        const auto map = local_smooth(load_feature_map(path, a.allow_negative), a.smooth);
        if (sample.cols() == 0) sample = MatrixF(0, map.depth());
        if (map.depth() != sample.cols()) throw InvalidArgument("feature maps differ in depth");
        for (std::uint32_t y = 0; y < map.height(); ++y) {
            for (std::uint32_t x = 0; x < map.width(); ++x) sample.append_row(map.at(x, y));
        }
    }
    const auto t = fit_whitening(sample, a.dim, a.eps);
    save_whitening(a.out, t);
    out << "whitening input_dim=" << t.input_dim() << " output_dim=" << t.output_dim()
        << " samples=" << sample.rows() << "\n";
    return 0;
}

struct TrainArgs {
    std::vector<std::string> inputs;
    std::size_t kappa = 65536;
    std::size_t iters = 25;
    std::size_t sample = 0;
    std::size_t topn = 1000;
    std::uint64_t seed = 0;
    std::string out;
};

int train_cmd(const TrainArgs& a, std::ostream& out)
{
    const auto inputs = expand_inputs(a.inputs);
    require_inputs(inputs, "descriptor sets");
    MatrixF all;
    for (const auto& path : inputs) {
        const auto set = load_descriptor_set(path);
        const MatrixF rows = strongest(set, a.topn);
        if (all.cols() == 0) all = MatrixF(0, set.dim());
        if (rows.cols() != all.cols()) throw InvalidArgument("descriptor sets differ in dimension");
        for (std::size_t i = 0; i < rows.rows(); ++i) all.append_row(rows.row(i));
    }
    MatrixF sample = std::move(all);
    if (a.sample != 0 && a.sample < sample.rows()) {
        // Partial Fisher-Yates over row indices, then restore input order.
        SplitMix64 rng(a.seed ^ 0x5eed5eedULL);
        std::vector<std::size_t> idx(sample.rows());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        for (std::size_t i = 0; i < a.sample; ++i) {
            std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
        }
        idx.resize(a.sample);
        std::sort(idx.begin(), idx.end());
        MatrixF picked(0, sample.cols());
        for (std::size_t i : idx) picked.append_row(sample.row(i));
        sample = std::move(picked);
    }
    KMeansReport report;
    const auto cb = train_codebook(sample, {a.kappa, a.iters, a.seed}, &report);
    save_codebook(a.out, cb);
    out << "codebook kappa=" << cb.kappa() << " dim=" << cb.dim() << " samples=" << sample.rows()
        << " iterations=" << report.iterations_run
        << " objective=" << format_double(report.objective.empty() ? 0.0 : report.objective.back())
        << "\n";
    return 0;
}

struct ExtractArgs {
    std::vector<std::string> inputs;
    std::string manifest;
    std::string whitening;
    unsigned smooth = 3;
    std::size_t topn = 1000;
    std::vector<double> scales;
    bool allow_negative = false;
    std::string out_dir;
};

int extract_cmd(const ExtractArgs& a, std::ostream& out)
{
    std::vector<std::pair<std::string, std::vector<fs::path>>> groups;
    if (!a.manifest.empty()) {
        const fs::path base = fs::path(a.manifest).parent_path();
        std::size_t line_no = 0;
        for (const auto& line : read_lines(a.manifest)) {
            ++line_no;
            if (line.empty() || line.front() == '#') continue;
            const auto tab = line.find('\t');
            if (tab == std::string::npos) {
                throw FormatError(FormatError::Kind::invalid,
                                  "manifest line " + std::to_string(line_no) +
                                      ": expected image_id<TAB>map[,map...]");
            }
            std::vector<fs::path> maps;
            std::istringstream list(line.substr(tab + 1));
            std::string item;
            while (std::getline(list, item, ',')) {
                if (item.empty()) continue;
                fs::path p = item;
                maps.push_back(p.is_absolute() ? p : base / p);
            }
            groups.emplace_back(line.substr(0, tab), std::move(maps));
        }
    }
    for (const auto& path : expand_inputs(a.inputs)) {
        groups.emplace_back(path.stem().string(), std::vector<fs::path>{path});
    }
    if (groups.empty()) throw InvalidArgument("no feature maps given");

    const auto whitening = load_whitening(a.whitening);
    fs::create_directories(a.out_dir);
    std::string listing;
    for (const auto& [image_id, paths] : groups) {
        std::vector<DenseFeatureMap> maps;
        for (const auto& p : paths) {
            auto map = load_feature_map(p, a.allow_negative);
            const bool wanted = std::any_of(a.scales.begin(), a.scales.end(), [&](double s) {
                return std::abs(s - map.scale_factor()) <= 1e-3 * std::max(1.0, std::abs(s));
            });
            if (!wanted) {
                log(LogLevel::warn, "skipping " + p.string() + ": scale " +
                                        std::to_string(map.scale_factor()) + " not in --scales");
                continue;
            }
            maps.push_back(std::move(map));
        }
        const auto set = extract_multiscale(maps, whitening, a.smooth, a.topn, image_id);
        const auto file = to_descriptor_file(set, whitening.output_dim());
        const std::string name = image_id + ".dset";
        save_descriptor_set(fs::path(a.out_dir) / name, file);
        listing += name + "\n";
    }
    write_text_atomic(fs::path(a.out_dir) / "descriptors.lst", listing);
    out << "extracted images=" << groups.size() << "\n";
    return 0;
}

struct IndexArgs {
    std::vector<std::string> inputs;
    std::string codebook;
    double alpha = 3.0;
    double tau = 0.0;
    std::size_t topn = 1000;
    std::string out;
};

int index_cmd(const IndexArgs& a, std::ostream& out)
{
    const auto inputs = expand_inputs(a.inputs);
    require_inputs(inputs, "descriptor sets");
    const auto cb = load_codebook(a.codebook);
    KernelParams params{a.alpha, a.tau, cb.dim()};
    params.validate();

    std::vector<AggregatedImageRecord> records;
    std::string names;
    std::size_t descriptors = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const auto set = load_descriptor_set(inputs[i]);
        const MatrixF rows = strongest(set, a.topn);
        descriptors += rows.rows();
        records.push_back(build_record(quantize(cb, rows, 1), static_cast<std::uint32_t>(i)));
        names += set.image_id + "\n";
    }
    const auto idx = build_index(records, params, cb.kappa());
    save_index(a.out, idx);
    write_text_atomic(ids_path(a.out), names);
    const auto stats = index_stats(idx);
    out << "indexed images=" << stats.image_count << " descriptors=" << descriptors
        << " signatures=" << stats.total_signatures << " bytes=" << stats.bytes << "\n";
    return 0;
}

struct SearchArgs {
    std::vector<std::string> inputs;
    std::string index;
    std::string codebook;
    std::size_t ma = 5;
    std::size_t top_k = 0;
    std::size_t topn = 1000;
    std::string out;
};

int search_cmd(const SearchArgs& a, std::ostream& out)
{
    const auto inputs = expand_inputs(a.inputs);
    require_inputs(inputs, "query descriptor sets");
    if (a.ma < 1) throw InvalidArgument("--ma must be at least 1");
    const auto idx = load_index(a.index);
    const auto cb = load_codebook(a.codebook);
    if (cb.dim() != idx.params().dim || cb.kappa() != idx.kappa()) {
        throw InvalidArgument("codebook does not match the index (kappa or dim differ)");
    }
    std::vector<std::string> names;
    if (fs::exists(ids_path(a.index))) names = read_lines(ids_path(a.index));
    if (!names.empty() && names.size() != idx.image_count()) {
        throw FormatError(FormatError::Kind::invalid, "index id list does not match image count");
    }

    std::vector<RankingRow> rows;
    std::size_t comparisons = 0;
    for (const auto& path : inputs) {
        const auto set = load_descriptor_set(path);
        const auto result = search(idx, cb, strongest(set, a.topn), a.ma, a.top_k);
        comparisons += result.hamming_comparisons;
        for (std::size_t r = 0; r < result.ranking.size(); ++r) {
            const auto& hit = result.ranking[r];
            rows.push_back({set.image_id,
                            names.empty() ? std::to_string(hit.image_id) : names[hit.image_id],
                            hit.score, r + 1});
        }
    }
    write_text_atomic(a.out, format_rankings(rows));
    out << "searched queries=" << inputs.size() << " hamming_comparisons=" << comparisons << "\n";
    return 0;
}

struct EvaluateArgs {
    std::string rankings;
    std::string mode = "map";
    std::string gt;
    std::string db_labels;
    std::string query_labels;
    std::string out;
};

int evaluate_cmd(const EvaluateArgs& a, std::ostream& out)
{
    const auto rankings = parse_rankings(read_text(a.rankings));
    std::string report = "mode=" + a.mode + "\n";
    if (a.mode == "map") {
        if (a.gt.empty()) throw InvalidArgument("--gt is required for mode map");
        const auto gt = parse_retrieval_gt(read_text(a.gt));
        std::map<std::string, std::vector<std::string>> ids;
        for (const auto& [query, ranking] : rankings) {
            auto& v = ids[query];
            for (const auto& [image, score] : ranking) v.push_back(image);
        }
        std::size_t used = 0;
        for (const auto& [query, r] : ids) {
            auto it = gt.find(query);
            if (it != gt.end() && !it->second.positives.empty()) ++used;
        }
        report += "mAP=" + format_double(mean_average_precision(ids, gt)) + "\n";
        report += "queries=" + std::to_string(used) + "\n";
    } else if (a.mode == "uap" || a.mode == "cls1" || a.mode == "cls2" || a.mode == "cls3") {
        if (a.db_labels.empty() || a.query_labels.empty()) {
            throw InvalidArgument("--db-labels and --query-labels are required for mode " + a.mode);
        }
        ClassGroundTruth labels;
        labels.image_class = parse_image_labels(read_text(a.db_labels));
        labels.query_class = parse_query_labels(read_text(a.query_labels));
        const auto freq = class_frequencies(labels);
        const auto variant = a.mode == "cls2"   ? ClassifierVariant::cls2
                             : a.mode == "cls3" ? ClassifierVariant::cls3
                                                : ClassifierVariant::cls1;
        std::vector<ClassPrediction> predictions;
        for (const auto& [query, ranking] : rankings) {
            if (auto p = classify(query, ranking, labels, variant, freq, freq.size())) {
                predictions.push_back(std::move(*p));
            }
        }
        report += "uAP=" + format_double(micro_average_precision(predictions, labels)) + "\n";
        report += "predictions=" + std::to_string(predictions.size()) + "\n";
    } else {
        throw InvalidArgument("unknown evaluation mode '" + a.mode + "'");
    }
    if (!a.out.empty()) write_text_atomic(a.out, report);
    out << report;
    return 0;
}

struct SynthArgs {
    SyntheticSpec spec;
    std::string out_dir;
};

int synth_cmd(const SynthArgs& a, std::ostream& out)
{
    const auto corpus = generate_synthetic(a.spec);
    const fs::path dir = a.out_dir;
    fs::create_directories(dir / "db");
    fs::create_directories(dir / "queries");
    std::string db_list;
    std::string query_list;
    for (const auto& set : corpus.database) {
        save_descriptor_set(dir / "db" / (set.image_id + ".dset"), set);
        db_list += "db/" + set.image_id + ".dset\n";
    }
    for (const auto& set : corpus.queries) {
        save_descriptor_set(dir / "queries" / (set.image_id + ".dset"), set);
        query_list += "queries/" + set.image_id + ".dset\n";
    }
    write_text_atomic(dir / "db.lst", db_list);
    write_text_atomic(dir / "queries.lst", query_list);
    write_text_atomic(dir / "gt_retrieval.tsv", format_retrieval_gt(corpus.retrieval));
    write_text_atomic(dir / "db_labels.tsv", format_image_labels(corpus.classes.image_class));
    write_text_atomic(dir / "query_labels.tsv", format_query_labels(corpus.classes.query_class));
    out << "synthetic database=" << corpus.database.size() << " queries=" << corpus.queries.size()
        << "\n";
    return 0;
}

int stats_cmd(const std::string& index, std::ostream& out)
{
    const auto s = index_stats(load_index(index));
    out << "image_count=" << s.image_count << "\n"
        << "mean_words_per_image=" << format_double(s.mean_words_per_image) << "\n"
        << "total_signatures=" << s.total_signatures << "\n"
        << "nonempty_words=" << s.nonempty_words << "\n"
        << "id_bytes=" << s.id_bytes << "\n"
        << "signature_bytes=" << s.signature_bytes << "\n"
        << "bytes=" << s.bytes << "\n";
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    const PipelineConfig defaults;
    CLI::App app{"ASMK / HOW local-descriptor retrieval pipeline", "asmk"};
    app.require_subcommand(1);
    unsigned threads = 0;
    app.add_option("--threads", threads, "Worker thread cap (0 = all cores)");
    app.fallthrough();
    app.option_defaults()->always_capture_default();

    FitWhiteningArgs fw;
    fw.dim = defaults.dim;
    fw.smooth = defaults.smooth;
    auto* fw_cmd = app.add_subcommand("fit-whitening", "Fit PCA whitening on feature maps");
    fw_cmd->add_option("maps", fw.inputs, "Feature map files (or @list)")->required()->default_str("");
    fw_cmd->add_option("--dim", fw.dim, "Output dimension d");
    fw_cmd->add_option("--eps", fw.eps, "Eigenvalue regulariser (default 1e-6*trace/D)");
    fw_cmd->add_option("--smooth", fw.smooth, "Local smoothing window M");
    fw_cmd->add_flag("--allow-negative", fw.allow_negative, "Accept negative activations");
    fw_cmd->add_option("--out", fw.out, "Whitening file")->required();

    TrainArgs tr;
    tr.kappa = defaults.kappa;
    tr.topn = defaults.topn;
    auto* tr_cmd = app.add_subcommand("train-codebook", "Train the k-means codebook");
    tr_cmd->add_option("descriptors", tr.inputs, "Descriptor set files (or @list)")->required()->default_str("");
    tr_cmd->add_option("--kappa", tr.kappa, "Number of visual words");
    tr_cmd->add_option("--iters", tr.iters, "Lloyd iterations");
    tr_cmd->add_option("--sample", tr.sample, "Random training subsample size (0 = all)");
    tr_cmd->add_option("--topn", tr.topn, "Descriptors kept per image (0 = all)");
    tr_cmd->add_option("--seed", tr.seed, "Random seed");
    tr_cmd->add_option("--out", tr.out, "Codebook file")->required();

    ExtractArgs ex;
    ex.smooth = defaults.smooth;
    ex.topn = defaults.topn;
    ex.scales = defaults.scales;
    auto* ex_cmd = app.add_subcommand("extract", "Extract local descriptors from feature maps");
    ex_cmd->add_option("maps", ex.inputs, "Feature map files, one image each (or @list)")->default_str("");
    ex_cmd->add_option("--manifest", ex.manifest, "Lines image_id<TAB>map[,map...]");
    ex_cmd->add_option("--whitening", ex.whitening, "Whitening file")->required();
    ex_cmd->add_option("--smooth", ex.smooth, "Local smoothing window M");
    ex_cmd->add_option("--topn", ex.topn, "Strongest descriptors kept per image");
    ex_cmd->add_option("--scales", ex.scales, "Accepted scale factors")->delimiter(',');
    ex_cmd->add_flag("--allow-negative", ex.allow_negative, "Accept negative activations");
    ex_cmd->add_option("--out-dir", ex.out_dir, "Output directory")->required();

    IndexArgs ix;
    ix.alpha = defaults.alpha;
    ix.tau = defaults.tau;
    ix.topn = defaults.topn;
    auto* ix_cmd = app.add_subcommand("index", "Build the inverted file");
    ix_cmd->add_option("descriptors", ix.inputs, "Descriptor set files (or @list)")->required()->default_str("");
    ix_cmd->add_option("--codebook", ix.codebook, "Codebook file")->required();
    ix_cmd->add_option("--alpha", ix.alpha, "Selectivity exponent");
    ix_cmd->add_option("--tau", ix.tau, "Selectivity threshold");
    ix_cmd->add_option("--topn", ix.topn, "Descriptors kept per image (0 = all)");
    ix_cmd->add_option("--out", ix.out, "Index file")->required();

    SearchArgs se;
    se.ma = defaults.ma_query;
    se.topn = defaults.topn;
    auto* se_cmd = app.add_subcommand("search", "Query the inverted file");
    se_cmd->add_option("queries", se.inputs, "Query descriptor set files (or @list)")->required()->default_str("");
    se_cmd->add_option("--index", se.index, "Index file")->required();
    se_cmd->add_option("--codebook", se.codebook, "Codebook file")->required();
    se_cmd->add_option("--ma", se.ma, "Visual words per query descriptor");
    se_cmd->add_option("--top-k", se.top_k, "Results per query (0 = all)");
    se_cmd->add_option("--topn", se.topn, "Descriptors kept per query (0 = all)");
    se_cmd->add_option("--out", se.out, "Rankings TSV")->required();

    EvaluateArgs ev;
    auto* ev_cmd = app.add_subcommand("evaluate", "Score rankings against ground truth");
    ev_cmd->add_option("--rankings", ev.rankings, "Rankings TSV")->required();
    ev_cmd->add_option("--mode", ev.mode, "map | uap | cls1 | cls2 | cls3");
    ev_cmd->add_option("--gt", ev.gt, "Retrieval ground truth");
    ev_cmd->add_option("--db-labels", ev.db_labels, "Database image classes");
    ev_cmd->add_option("--query-labels", ev.query_labels, "Query classes (NONE allowed)");
    ev_cmd->add_option("--out", ev.out, "key=value report file");

    SynthArgs sy;
    auto* sy_cmd = app.add_subcommand("synth", "Generate a synthetic descriptor corpus");
    sy_cmd->add_option("--images", sy.spec.n_images, "Database images");
    sy_cmd->add_option("--queries", sy.spec.n_queries, "Query images");
    sy_cmd->add_option("--per-image", sy.spec.descriptors_per_image, "Descriptors per image");
    sy_cmd->add_option("--dim", sy.spec.dim, "Descriptor dimension");
    sy_cmd->add_option("--objects", sy.spec.n_objects, "Distinct objects");
    sy_cmd->add_option("--burst", sy.spec.burst_factor, "Mean repetitions per element");
    sy_cmd->add_option("--noise", sy.spec.noise_sigma, "Jitter standard deviation");
    sy_cmd->add_option("--object-fraction", sy.spec.object_fraction, "Share of object elements");
    sy_cmd->add_option("--shared-fraction", sy.spec.shared_fraction, "Share of shared patterns");
    sy_cmd->add_option("--shared-patterns", sy.spec.shared_patterns, "Shared pattern pool size");
    sy_cmd->add_option("--seed", sy.spec.seed, "Random seed");
    sy_cmd->add_option("--out-dir", sy.out_dir, "Output directory")->required();

    std::string stats_index;
    auto* st_cmd = app.add_subcommand("stats", "Print inverted file statistics");
    st_cmd->add_option("--index", stats_index, "Index file")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(std::move(reversed));
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "asmk: usage error: " << e.what() << "\n";
        return 2;
    }

    try {
        set_max_threads(threads);
        if (fw_cmd->parsed()) return fit_whitening_cmd(fw, out);
        if (tr_cmd->parsed()) return train_cmd(tr, out);
        if (ex_cmd->parsed()) return extract_cmd(ex, out);
        if (ix_cmd->parsed()) return index_cmd(ix, out);
        if (se_cmd->parsed()) return search_cmd(se, out);
        if (ev_cmd->parsed()) return evaluate_cmd(ev, out);
        if (sy_cmd->parsed()) return synth_cmd(sy, out);
        if (st_cmd->parsed()) return stats_cmd(stats_index, out);
    } catch (const FormatError& e) {
        err << "asmk: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        err << "asmk: io error: " << e.what() << "\n";
        return 1;
    } catch (const InvalidArgument& e) {
        err << "asmk: invalid argument: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "asmk: error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

}  // namespace asmk::cli
