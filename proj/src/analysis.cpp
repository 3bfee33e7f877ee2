#include "mechdet/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "mechdet/error.hpp"

namespace mechdet {

namespace {

void require_labels(const FeatureMatrix& fm) {
    if (!fm.fully_labeled()) {
        throw InputError("UNLABELED", "every span needs a 0/1 label for correlation analysis");
    }
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

GroupMeans group_means(const FeatureMatrix& fm) {
    require_labels(fm);
    const auto C = fm.values.cols();
    GroupMeans g{std::vector<double>(C, 0.0), std::vector<double>(C, 0.0)};
    std::size_t n0 = 0, n1 = 0;
    for (std::size_t r = 0; r < fm.values.rows(); ++r) {
        auto& dst = fm.labels[r] == 1 ? g.hallucinated : g.truthful;
        (fm.labels[r] == 1 ? n1 : n0)++;
        const auto row = fm.values.row(r);
        for (std::size_t c = 0; c < C; ++c) dst[c] += row[c];
    }
    if (n0 == 0 || n1 == 0) {
        throw InputError("SINGLE_CLASS", "group means need both truthful and hallucinated spans");
    }
    for (auto& v : g.truthful) v /= static_cast<double>(n0);
    for (auto& v : g.hallucinated) v /= static_cast<double>(n1);
    return g;
}

CorrelationReport correlation_report(const FeatureMatrix& fm, bool invert_labels_for_ecs) {
    const GroupMeans g = group_means(fm);
    std::vector<double> y(fm.labels.begin(), fm.labels.end());
    std::vector<double> y_inv(y.size());
    std::transform(y.begin(), y.end(), y_inv.begin(), [](double v) { return 1.0 - v; });

    CorrelationReport rep;
    rep.ecs_inverted = invert_labels_for_ecs;
    for (std::size_t c = 0; c < fm.columns.size(); ++c) {
        const auto& col = fm.columns[c];
        const auto x = fm.values.column(c);
        const bool invert = invert_labels_for_ecs && col.kind == FeatureKind::ecs;
        const auto pr = pearson(x, invert ? y_inv : y);
        rep.records.push_back({col, pr.r, pr.degenerate, g.truthful[c], g.hallucinated[c], x.size()});
    }
    return rep;
}

std::string report_to_csv(const CorrelationReport& report) {
    std::ostringstream os;
    os << "feature_kind,layer,head,pearson_r,mean_truthful,mean_hallucinated,n\n";
    for (const auto& r : report.records) {
        os << (r.feature.kind == FeatureKind::ecs ? "ECS" : "PKS") << ',' << r.feature.layer << ','
           << (r.feature.head >= 0 ? std::to_string(r.feature.head) : std::string("none")) << ','
           << format_double(r.pearson_r) << ',' << format_double(r.mean_truthful) << ','
           << format_double(r.mean_hallucinated) << ',' << r.n << '\n';
    }
    return os.str();
}

nlohmann::json report_to_json(const CorrelationReport& report) {
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& r : report.records) {
        recs.push_back({{"feature_kind", r.feature.kind == FeatureKind::ecs ? "ECS" : "PKS"},
                        {"layer", r.feature.layer},
                        {"head", r.feature.head >= 0 ? nlohmann::json(r.feature.head) : nlohmann::json(nullptr)},
                        {"pearson_r", r.pearson_r},
                        {"degenerate", r.degenerate},
                        {"mean_truthful", r.mean_truthful},
                        {"mean_hallucinated", r.mean_hallucinated},
                        {"n", r.n}});
    }
    return {{"unit", report.unit}, {"ecs_label", report.ecs_inverted ? "1 - label" : "label"},
            {"pks_label", "label"}, {"records", recs}};
}

}  // namespace mechdet
