#pragma once

// Retrieval (AP / mAP) and classification (micro-AP, k-NN voting) metrics.

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace asmk {

struct QueryGroundTruth {
    std::set<std::string> positives;
    std::set<std::string> ignores;
};

/// query id -> positives / ignores.
using RetrievalGroundTruth = std::map<std::string, QueryGroundTruth>;

struct ClassGroundTruth {
    std::map<std::string, std::string> image_class;
    /// Queries without a true class (out-of-class / distractors) map to nullopt.
    std::map<std::string, std::optional<std::string>> query_class;
};

struct ClassPrediction {
    std::string query_id;
    std::string predicted_class;
    double confidence = 0.0;
};

/// A scored ranking as consumed by the classifiers: (image id, score), best first.
using ScoredRanking = std::vector<std::pair<std::string, double>>;

enum class ClassifierVariant { cls1, cls2, cls3 };

/// AP after removing ignored items; nullopt when the query has no positives.
std::optional<double> average_precision(std::span<const std::string> ranking,
                                        const QueryGroundTruth& gt);

/// Mean AP over the ranked queries that appear in `gt` with at least one positive.
/// Throws when no query is usable.
double mean_average_precision(const std::map<std::string, std::vector<std::string>>& rankings,
                              const RetrievalGroundTruth& gt);

/// Global average precision. Predictions are ranked by confidence (ties by query id);
/// the normaliser counts the queries that have a true class.
double micro_average_precision(std::span<const ClassPrediction> predictions,
                               const ClassGroundTruth& gt);

/// k-NN vote over a ranking. class_freq holds database image counts per class (used by
/// CLS3 weights log(n_classes / freq)). Ranked images without a label are skipped.
std::optional<ClassPrediction> classify(const std::string& query_id, const ScoredRanking& ranking,
                                        const ClassGroundTruth& labels, ClassifierVariant variant,
                                        const std::map<std::string, std::size_t>& class_freq,
                                        std::size_t n_classes);

/// Database image count per class.
std::map<std::string, std::size_t> class_frequencies(const ClassGroundTruth& labels);

}  // namespace asmk
