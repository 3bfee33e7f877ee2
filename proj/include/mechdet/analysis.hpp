#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "mechdet/features.hpp"
#include "mechdet/stats.hpp"

namespace mechdet {

struct CorrelationRecord {
    FeatureColumn feature;
    double pearson_r = 0.0;
    bool degenerate = false;
    double mean_truthful = 0.0;
    double mean_hallucinated = 0.0;
    std::size_t n = 0;
};

// Correlations are computed over spans. ECS features are correlated against
// (1 - label) when `ecs_inverted`, PKS features always against the label.
struct CorrelationReport {
    std::vector<CorrelationRecord> records;
    bool ecs_inverted = true;
    std::string unit = "span";
};

struct GroupMeans {
    std::vector<double> truthful;      // label 0
    std::vector<double> hallucinated;  // label 1
};

// Throws InputError when either class is empty or a row is unlabeled.
GroupMeans group_means(const FeatureMatrix& fm);

CorrelationReport correlation_report(const FeatureMatrix& fm, bool invert_labels_for_ecs = true);

// Columns: feature_kind,layer,head,pearson_r,mean_truthful,mean_hallucinated,n
std::string report_to_csv(const CorrelationReport& report);
nlohmann::json report_to_json(const CorrelationReport& report);

// Shortest decimal that round-trips to the same double.
std::string format_double(double v);

}  // namespace mechdet
