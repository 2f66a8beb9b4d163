#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace iclmod {

// f1 = 2PR/(P+R), 0 when the denominator is 0.
double f1_score(double precision, double recall);

struct BinaryConfusion {
    long tp = 0;
    long fp = 0;
    long tn = 0;
    long fn = 0;
};

struct Metrics {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    double fpr = 0;
    double accuracy = 0;
    BinaryConfusion confusion;                // binary task
    std::vector<std::vector<long>> matrix;    // multiclass: C rows, C+1 cols (last = failures)
    std::vector<std::string> class_names;
    long n = 0;
    long n_failures = 0;
    bool zero_denominator = false;  // some ratio had an empty denominator

    nlohmann::json to_json() const;
};

// One scored item: gold task label and the predicted task label, nullopt for
// a parse/transport failure. Failures count as incorrect against the gold
// class.
struct ScoredItem {
    std::string gold;
    std::optional<std::string> predicted;
};

Metrics compute_binary_metrics(const std::vector<ScoredItem>& items, const std::string& positive);

// Macro-averaged one-vs-rest metrics over the given class set.
Metrics compute_multiclass_metrics(const std::vector<ScoredItem>& items,
                                   const std::vector<std::string>& classes);

struct Aggregate {
    double mean = 0;
    double std = 0;  // sample standard deviation (n-1); 0 when n < 2
    bool single_seed = false;
};

// Mean and sample std per headline metric, keyed by metric name.
std::map<std::string, Aggregate> aggregate_seeds(const std::vector<Metrics>& per_seed);

// Mean / sample std over a plain series (shared by the per-metric and the
// per-permutation aggregations).
Aggregate aggregate_series(const std::vector<double>& values);

}  // namespace iclmod
