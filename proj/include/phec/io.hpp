#pragma once

#include "phec/classify.hpp"
#include "phec/federated.hpp"
#include "phec/reduce.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace phec {

using Json = nlohmann::ordered_json;

inline constexpr int kModelFormatVersion = 1;
inline constexpr int kReportFormatVersion = 1;
inline constexpr const char* kArtifactVersion = "1.0.0";

// Every real is written as its shortest round-trip decimal, so load(save(m)) is bit-exact.

Json to_json(const PcaModel& model);
Json to_json(const KnnModel& model);
Json to_json(const ForestModel& model);
Json to_json(const LinearModel& model);
Json to_json(const MlpModel& model);
Json to_json(const StackedModel& model);

PcaModel pca_from_json(const Json& j);
KnnModel knn_from_json(const Json& j);
ForestModel forest_from_json(const Json& j);
LinearModel linear_from_json(const Json& j);
MlpModel mlp_from_json(const Json& j);
StackedModel stacked_from_json(const Json& j);

/// Wraps `body` as {"format": "phec-model", "version": N, "kind": kind, ...body}.
Json model_envelope(const std::string& kind, const Json& body);
/// Checks the envelope and returns it; throws DataError on a missing or unsupported version.
Json open_model_envelope(const Json& j, const std::string& expected_kind = {});

void save_json(const std::filesystem::path& path, const Json& j);
Json load_json(const std::filesystem::path& path);

template <typename Model>
void save_model(const Model& model, const std::filesystem::path& path, const std::string& kind) {
  save_json(path, model_envelope(kind, to_json(model)));
}

/// Writes a report with stable key order, creating parent directories as needed.
void emit_report(const Json& report, const std::filesystem::path& path);

}  // namespace phec
