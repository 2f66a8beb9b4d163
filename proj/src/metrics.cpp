#include "iclmod/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "iclmod/common.hpp"

namespace iclmod {

using nlohmann::json;

double f1_score(double precision, double recall) {
    double denom = precision + recall;
    if (denom <= 0.0) return 0.0;
    return 2.0 * precision * recall / denom;
}

namespace {

double ratio_or_zero(long num, long denom, bool& flagged) {
    if (denom == 0) {
        flagged = true;
        return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(denom);
}

}  // namespace

Metrics compute_binary_metrics(const std::vector<ScoredItem>& items, const std::string& positive) {
    if (items.empty()) throw Error("compute_metrics: empty input");
    Metrics m;
    m.n = static_cast<long>(items.size());
    for (const auto& item : items) {
        bool gold_positive = item.gold == positive;
        if (!item.predicted) ++m.n_failures;
        // A failure counts as incorrect against the gold class: a missed
        // positive is a false negative, a missed negative a false positive.
        bool predicted_positive = item.predicted ? (*item.predicted == positive) : !gold_positive;
        if (gold_positive && predicted_positive) ++m.confusion.tp;
        else if (gold_positive && !predicted_positive) ++m.confusion.fn;
        else if (!gold_positive && predicted_positive) ++m.confusion.fp;
        else ++m.confusion.tn;
    }
    m.precision = ratio_or_zero(m.confusion.tp, m.confusion.tp + m.confusion.fp, m.zero_denominator);
    m.recall = ratio_or_zero(m.confusion.tp, m.confusion.tp + m.confusion.fn, m.zero_denominator);
    m.f1 = f1_score(m.precision, m.recall);
    m.fpr = ratio_or_zero(m.confusion.fp, m.confusion.fp + m.confusion.tn, m.zero_denominator);
    m.accuracy = static_cast<double>(m.confusion.tp + m.confusion.tn) / static_cast<double>(m.n);
    return m;
}

Metrics compute_multiclass_metrics(const std::vector<ScoredItem>& items,
                                   const std::vector<std::string>& classes) {
    if (items.empty()) throw Error("compute_metrics: empty input");
    if (classes.empty()) throw Error("compute_metrics: empty class set");
    Metrics m;
    m.class_names = classes;
    m.n = static_cast<long>(items.size());
    const std::size_t c = classes.size();
    m.matrix.assign(c, std::vector<long>(c + 1, 0));  // last column: failures
    auto class_index = [&](const std::string& name) -> std::size_t {
        auto it = std::find(classes.begin(), classes.end(), name);
        if (it == classes.end()) throw Error("label '" + name + "' is not in the class set");
        return static_cast<std::size_t>(it - classes.begin());
    };
    long correct = 0;
    for (const auto& item : items) {
        std::size_t g = class_index(item.gold);
        if (!item.predicted) {
            ++m.n_failures;
            ++m.matrix[g][c];
            continue;
        }
        std::size_t p = class_index(*item.predicted);
        ++m.matrix[g][p];
        if (p == g) ++correct;
    }
    // Macro one-vs-rest averages.
    double sum_p = 0, sum_r = 0, sum_f1 = 0, sum_fpr = 0;
    for (std::size_t k = 0; k < c; ++k) {
        long tp = m.matrix[k][k];
        long row = 0, col = 0;
        for (std::size_t j = 0; j <= c; ++j) row += m.matrix[k][j];
        for (std::size_t i = 0; i < c; ++i) col += m.matrix[i][k];
        long fn = row - tp;
        long fp = col - tp;
        long tn = m.n - tp - fn - fp;
        double p_k = ratio_or_zero(tp, tp + fp, m.zero_denominator);
        double r_k = ratio_or_zero(tp, tp + fn, m.zero_denominator);
        sum_p += p_k;
        sum_r += r_k;
        sum_f1 += f1_score(p_k, r_k);
        sum_fpr += ratio_or_zero(fp, fp + tn, m.zero_denominator);
    }
    m.precision = sum_p / static_cast<double>(c);
    m.recall = sum_r / static_cast<double>(c);
    m.f1 = sum_f1 / static_cast<double>(c);
    m.fpr = sum_fpr / static_cast<double>(c);
    m.accuracy = static_cast<double>(correct) / static_cast<double>(m.n);
    return m;
}

json Metrics::to_json() const {
    json j;
    j["precision"] = precision;
    j["recall"] = recall;
    j["f1"] = f1;
    j["fpr"] = fpr;
    j["accuracy"] = accuracy;
    j["n"] = n;
    j["n_failures"] = n_failures;
    if (zero_denominator) j["zero_denominator"] = true;
    if (class_names.empty()) {
        j["confusion"] = {{"tp", confusion.tp},
                          {"fp", confusion.fp},
                          {"tn", confusion.tn},
                          {"fn", confusion.fn}};
    } else {
        j["classes"] = class_names;
        j["matrix"] = matrix;
    }
    return j;
}

Aggregate aggregate_series(const std::vector<double>& values) {
    if (values.empty()) throw Error("aggregate over empty series");
    Aggregate agg;
    agg.single_seed = values.size() == 1;
    double sum = 0;
    for (double v : values) sum += v;
    agg.mean = sum / static_cast<double>(values.size());
    bool all_equal = true;
    for (double v : values) all_equal = all_equal && v == values[0];
    if (all_equal) {
        agg.mean = values[0];  // no rounding residue on constant series
        return agg;
    }
    if (values.size() >= 2) {
        double ss = 0;
        for (double v : values) ss += (v - agg.mean) * (v - agg.mean);
        agg.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return agg;
}

std::map<std::string, Aggregate> aggregate_seeds(const std::vector<Metrics>& per_seed) {
    if (per_seed.empty()) throw Error("aggregate_seeds: empty input");
    std::map<std::string, Aggregate> out;
    auto collect = [&](const char* name, auto getter) {
        std::vector<double> values;
        values.reserve(per_seed.size());
        for (const auto& m : per_seed) values.push_back(getter(m));
        out[name] = aggregate_series(values);
    };
    collect("precision", [](const Metrics& m) { return m.precision; });
    collect("recall", [](const Metrics& m) { return m.recall; });
    collect("f1", [](const Metrics& m) { return m.f1; });
    collect("fpr", [](const Metrics& m) { return m.fpr; });
    collect("accuracy", [](const Metrics& m) { return m.accuracy; });
    return out;
}

}  // namespace iclmod
