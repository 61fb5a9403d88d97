#include "asmk/eval.hpp"

#include <algorithm>
#include <cmath>

#include "asmk/common.hpp"

namespace asmk {

std::optional<double> average_precision(std::span<const std::string> ranking,
                                        const QueryGroundTruth& gt)
{
    if (gt.positives.empty()) return std::nullopt;
    std::size_t rank = 0;
    std::size_t hits = 0;
    double sum = 0.0;
    std::set<std::string> seen;
    for (const auto& id : ranking) {
        if (!seen.insert(id).second) throw InvalidArgument("ranking contains duplicate id " + id);
        if (gt.ignores.contains(id)) continue;
        ++rank;
        if (gt.positives.contains(id)) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(rank);
        }
    }
    return sum / static_cast<double>(gt.positives.size());
}

double mean_average_precision(const std::map<std::string, std::vector<std::string>>& rankings,
                              const RetrievalGroundTruth& gt)
{
    double total = 0.0;
    std::size_t used = 0;
    for (const auto& [query, ranking] : rankings) {
        auto it = gt.find(query);
        if (it == gt.end()) continue;
        if (auto ap = average_precision(ranking, it->second)) {
            total += *ap;
            ++used;
        }
    }
    if (used == 0) throw InvalidArgument("no query with positives to evaluate");
    return total / static_cast<double>(used);
}

double micro_average_precision(std::span<const ClassPrediction> predictions,
                               const ClassGroundTruth& gt)
{
    std::size_t m = 0;
    for (const auto& [query, cls] : gt.query_class) {
        if (cls) ++m;
    }
    if (m == 0) throw InvalidArgument("micro-AP needs at least one query with a true class");

    std::vector<const ClassPrediction*> order;
    order.reserve(predictions.size());
    for (const auto& p : predictions) order.push_back(&p);
    std::sort(order.begin(), order.end(), [](const ClassPrediction* a, const ClassPrediction* b) {
        return a->confidence != b->confidence ? a->confidence > b->confidence
                                              : a->query_id < b->query_id;
    });

    double sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        auto it = gt.query_class.find(order[i]->query_id);
        const bool relevant = it != gt.query_class.end() && it->second &&
                              *it->second == order[i]->predicted_class;
        if (relevant) {
            ++correct;
            sum += static_cast<double>(correct) / static_cast<double>(i + 1);
        }
    }
    return sum / static_cast<double>(m);
}

std::optional<ClassPrediction> classify(const std::string& query_id, const ScoredRanking& ranking,
                                        const ClassGroundTruth& labels, ClassifierVariant variant,
                                        const std::map<std::string, std::size_t>& class_freq,
                                        std::size_t n_classes)
{
    constexpr std::size_t per_class_budget = 10;

    std::vector<std::string> classes;  // first-appearance order
    std::map<std::string, std::pair<double, std::size_t>> votes;
    for (const auto& [image, score] : ranking) {
        auto label = labels.image_class.find(image);
        if (label == labels.image_class.end()) continue;
        const std::string& cls = label->second;
        if (variant == ClassifierVariant::cls1) {
            return ClassPrediction{query_id, cls, score};
        }
        auto [it, inserted] = votes.try_emplace(cls, 0.0, 0);
        if (inserted) classes.push_back(cls);
        auto& [sum, count] = it->second;
        if (count >= per_class_budget) continue;
        ++count;
        if (variant == ClassifierVariant::cls2) {
            sum += score;
        } else {
            if (score < 0.0) throw InvalidArgument("CLS3 needs non-negative similarities");
            sum += std::sqrt(score);
        }
    }
    if (classes.empty()) return std::nullopt;

    ClassPrediction best{query_id, {}, 0.0};
    bool have = false;
    for (const auto& cls : classes) {
        double confidence = votes[cls].first;
        if (variant == ClassifierVariant::cls3) {
            auto f = class_freq.find(cls);
            const double freq = f == class_freq.end() ? 1.0 : static_cast<double>(f->second);
            confidence *= std::log(static_cast<double>(n_classes) / freq);
        }
        if (!have || confidence > best.confidence) {
            best.predicted_class = cls;
            best.confidence = confidence;
            have = true;
        }
    }
    return best;
}

std::map<std::string, std::size_t> class_frequencies(const ClassGroundTruth& labels)
{
    std::map<std::string, std::size_t> freq;
    for (const auto& [image, cls] : labels.image_class) ++freq[cls];
    return freq;
}

}  // namespace asmk
