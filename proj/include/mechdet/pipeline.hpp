#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mechdet/classify.hpp"
#include "mechdet/features.hpp"

namespace mechdet {

inline constexpr std::string_view kPipelineMagic = "MHPL";

// Preprocessing state + classifier + the feature schema it was trained on.
struct FittedPipeline {
    PreprocessState preprocess;
    ClassifierModel model;
    std::uint64_t schema_hash = 0;
    std::int64_t n_layers = 0;
    std::int64_t n_heads = 0;
    nlohmann::json config = nlohmann::json::object();  // creation config, echoed for provenance

    friend bool operator==(const FittedPipeline&, const FittedPipeline&) = default;
};

// Fits preprocessing on `train` (fully labeled), then the classifier on the
// transformed rows.
FittedPipeline train_pipeline(const FeatureMatrix& train, const PreprocessConfig& pre, const ClassifierConfig& cls,
                              nlohmann::json config = nlohmann::json::object());

// Throws InputError SCHEMA_MISMATCH when the matrix columns differ from the
// training schema.
Predictions predict_pipeline(const FittedPipeline& p, const FeatureMatrix& fm);
void check_schema(const FittedPipeline& p, std::span<const FeatureColumn> columns);

std::vector<std::byte> encode_pipeline(const FittedPipeline& p);
FittedPipeline decode_pipeline(std::span<const std::byte> data);
void save_pipeline(const FittedPipeline& p, std::ostream& out);
FittedPipeline load_pipeline(std::istream& in);
void save_pipeline(const FittedPipeline& p, const std::filesystem::path& path);
FittedPipeline load_pipeline(const std::filesystem::path& path);

nlohmann::json to_json(const PreprocessConfig& c);
PreprocessConfig preprocess_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ClassifierConfig& c);
ClassifierConfig classifier_config_from_json(const nlohmann::json& j);

}  // namespace mechdet
