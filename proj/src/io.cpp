#include "phec/io.hpp"

#include "phec/error.hpp"

#include <fstream>
#include <sstream>

namespace phec {

namespace {

const std::string kModule = "io";

Json vector_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Json matrix_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::VectorXd vector_from(const Json& j) {
  Eigen::VectorXd v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = j[i].get<double>();
  return v;
}

Eigen::MatrixXd matrix_from(const Json& j, Index cols_if_empty = 0) {
  const auto rows = static_cast<Index>(j.size());
  const Index cols = rows ? static_cast<Index>(j[0].size()) : cols_if_empty;
  Eigen::MatrixXd m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (static_cast<Index>(row.size()) != cols) throw DataError(kModule, "ragged matrix in model file");
    for (Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::optional<double> optional_from(const Json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

template <typename Fn>
auto guarded(const char* what, Fn&& fn) {
  try {
    return fn();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(kModule, std::string("corrupt ") + what + ": " + e.what());
  }
}

}  // namespace

Json to_json(const PcaModel& model) {
  Json j;
  j["mean"] = vector_json(model.mean);
  j["components"] = matrix_json(model.components);
  j["explained_variance"] = vector_json(model.explained_variance);
  j["total_variance"] = model.total_variance;
  return j;
}

PcaModel pca_from_json(const Json& j) {
  return guarded("PCA model", [&] {
    PcaModel m;
    m.mean = vector_from(j.at("mean"));
    m.components = matrix_from(j.at("components"), m.mean.size());
    m.explained_variance = vector_from(j.at("explained_variance"));
    m.total_variance = j.at("total_variance").get<double>();
    if (m.components.cols() != m.mean.size() || m.explained_variance.size() != m.components.rows())
      throw DataError(kModule, "PCA model dimensions are inconsistent");
    return m;
  });
}

Json to_json(const KnnModel& model) {
  Json j;
  j["k"] = model.k;
  j["points"] = matrix_json(model.points);
  j["labels"] = model.labels;
  return j;
}

KnnModel knn_from_json(const Json& j) {
  return guarded("KNN model", [&] {
    KnnModel m;
    m.k = j.at("k").get<int>();
    m.points = matrix_from(j.at("points"));
    m.labels = j.at("labels").get<std::vector<int>>();
    if (static_cast<Index>(m.labels.size()) != m.points.rows() || m.k < 1 || m.k > m.points.rows())
      throw DataError(kModule, "KNN model is inconsistent");
    return m;
  });
}

Json to_json(const ForestModel& model) {
  Json j;
  j["input_dim"] = model.input_dim;
  Json trees = Json::array();
  for (const auto& tree : model.trees) {
    Json nodes = Json::array();
    for (const auto& n : tree.nodes()) nodes.push_back(Json::array({n.feature, n.threshold, n.left, n.right, n.value}));
    trees.push_back(std::move(nodes));
  }
  j["trees"] = std::move(trees);
  return j;
}

ForestModel forest_from_json(const Json& j) {
  return guarded("forest model", [&] {
    ForestModel m;
    m.input_dim = j.at("input_dim").get<Index>();
    for (const auto& tree : j.at("trees")) {
      std::vector<DecisionTree::Node> nodes;
      for (const auto& n : tree) {
        DecisionTree::Node node;
        node.feature = n.at(0).get<int>();
        node.threshold = n.at(1).get<double>();
        node.left = n.at(2).get<int>();
        node.right = n.at(3).get<int>();
        node.value = n.at(4).get<double>();
        nodes.push_back(node);
      }
      const auto count = static_cast<int>(nodes.size());
      for (const auto& node : nodes)
        if (node.feature >= 0 && (node.feature >= m.input_dim || node.left <= 0 || node.left >= count ||
                                  node.right <= 0 || node.right >= count))
          throw DataError(kModule, "forest model has a dangling node");
      if (nodes.empty()) throw DataError(kModule, "forest model has an empty tree");
      m.trees.emplace_back(std::move(nodes));
    }
    if (m.trees.empty()) throw DataError(kModule, "forest model has no trees");
    return m;
  });
}

Json to_json(const LinearModel& model) {
  Json j;
  j["weights"] = vector_json(model.weights);
  j["bias"] = model.bias;
  j["alpha"] = optional_json(model.alpha);
  return j;
}

LinearModel linear_from_json(const Json& j) {
  return guarded("linear model", [&] {
    LinearModel m;
    m.weights = vector_from(j.at("weights"));
    m.bias = j.at("bias").get<double>();
    m.alpha = optional_from(j.at("alpha"));
    return m;
  });
}

Json to_json(const MlpModel& model) {
  Json j;
  Json layers = Json::array();
  for (const auto& l : model.layers) {
    Json layer;
    layer["weights"] = matrix_json(l.weights);
    layer["bias"] = vector_json(l.bias);
    layers.push_back(std::move(layer));
  }
  j["layers"] = std::move(layers);
  j["alpha"] = optional_json(model.alpha);
  return j;
}

MlpModel mlp_from_json(const Json& j) {
  return guarded("MLP model", [&] {
    MlpModel m;
    for (const auto& layer : j.at("layers")) {
      DenseLayer l{matrix_from(layer.at("weights")), vector_from(layer.at("bias"))};
      if (l.bias.size() != l.weights.rows()) throw DataError(kModule, "MLP layer bias does not match its weights");
      if (!m.layers.empty() && m.layers.back().weights.rows() != l.weights.cols())
        throw DataError(kModule, "MLP layers have incompatible sizes");
      m.layers.push_back(std::move(l));
    }
    if (m.layers.empty() || m.layers.back().weights.rows() != 1)
      throw DataError(kModule, "MLP must end in a single output unit");
    m.alpha = optional_from(j.at("alpha"));
    return m;
  });
}

Json to_json(const StackedModel& model) {
  Json j;
  j["aggregator"] = std::string(to_string(model.aggregator));
  j["gamma_star"] = model.gamma_star;
  Json columns = Json::array();
  for (const auto& c : model.columns) columns.push_back(to_json(c));
  j["columns"] = std::move(columns);
  return j;
}

StackedModel stacked_from_json(const Json& j) {
  return guarded("stacked model", [&] {
    std::vector<MlpModel> columns;
    for (const auto& c : j.at("columns")) columns.push_back(mlp_from_json(c));
    StackedModel m = fed_stack(columns);
    const auto agg = j.at("aggregator").get<std::string>();
    if (agg != "max" && agg != "mean") throw DataError(kModule, "unknown aggregator " + agg);
    m.aggregator = agg == "max" ? Aggregator::Max : Aggregator::Mean;
    m.gamma_star = j.at("gamma_star").get<double>();
    return m;
  });
}

Json model_envelope(const std::string& kind, const Json& body) {
  Json j;
  j["format"] = "phec-model";
  j["version"] = kModelFormatVersion;
  j["kind"] = kind;
  for (const auto& [key, value] : body.items()) j[key] = value;
  return j;
}

Json open_model_envelope(const Json& j, const std::string& expected_kind) {
  if (!j.is_object() || !j.contains("format") || j["format"] != "phec-model")
    throw DataError(kModule, "not a phec model file");
  if (!j.contains("version")) throw DataError(kModule, "model file has no format version");
  if (!j["version"].is_number_integer() || j["version"].get<int>() != kModelFormatVersion)
    throw DataError(kModule, "unsupported model format version " + j["version"].dump());
  if (!expected_kind.empty() && j.value("kind", "") != expected_kind)
    throw DataError(kModule, "model file holds a " + j.value("kind", std::string("?")) + ", expected " + expected_kind);
  return j;
}

void save_json(const std::filesystem::path& path, const Json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(kModule, "cannot write " + path.string());
  out << j.dump(1) << '\n';
  if (!out) throw DataError(kModule, "failed writing " + path.string());
}

Json load_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(kModule, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return Json::parse(ss.str());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(kModule, "corrupt file " + path.string() + ": " + e.what());
  }
}

void emit_report(const Json& report, const std::filesystem::path& path) {
  try {
    save_json(path, report);
  } catch (const std::filesystem::filesystem_error& e) {
    throw DataError(kModule, std::string("cannot write report: ") + e.what());
  }
}

}  // namespace phec
