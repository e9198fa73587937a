#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace phec {

using Index = Eigen::Index;

/// Broad category names. Categories are open-ended strings so that datasets grouped into
/// more than the four classic classes can still be partitioned.
namespace category {
inline constexpr std::string_view Normal = "Normal";
inline constexpr std::string_view DoS = "DoS";
inline constexpr std::string_view Probe = "Probe";
inline constexpr std::string_view R2L = "R2L";
inline constexpr std::string_view U2R = "U2R";
}  // namespace category

enum class ColumnKind { Categorical, Numeric, Label, Ignore };

std::string_view to_string(ColumnKind kind);
ColumnKind column_kind_from_string(std::string_view text);

/// Sidecar schema of a raw CSV file.
struct ColumnSpec {
  std::vector<ColumnKind> kinds;
  std::string normal_label = "normal";
  bool header = false;

  std::size_t feature_count() const;
  std::size_t label_column() const;

  /// Parses the JSON schema text: {"columns": [...], "normal_label": "...", "header": false}.
  /// A column entry is either a kind name or {"kind": name, "repeat": count}.
  static ColumnSpec parse(std::string_view json_text);
  static ColumnSpec load(const std::filesystem::path& path);
};

struct RawRecord {
  /// Feature cells in column order; categorical cells keep their text, numeric cells are parsed.
  std::vector<std::string> categorical;
  std::vector<double> numeric;
  std::string label;
};

struct RawDataset {
  ColumnSpec spec;
  std::vector<RawRecord> rows;
};

/// Encoded samples. Features are one row per sample.
struct Dataset {
  Eigen::MatrixXd features;
  std::vector<int> binary_label;  // 1 = threat, 0 = normal
  std::vector<std::string> attack_name;
  std::vector<std::string> category;  // empty until grouped (threats only)
  std::vector<bool> noisy;            // label flipped by noise injection

  Index size() const { return features.rows(); }
  Index dim() const { return features.cols(); }

  Dataset subset(std::span<const Index> rows) const;
  std::size_t threat_count() const;

  /// Throws DataError if the shape, finiteness or label/category consistency is broken.
  void validate() const;
};

/// Per categorical column code table, assigned in sorted order of the training values.
class LabelEncoder {
public:
  LabelEncoder() = default;
  explicit LabelEncoder(std::vector<std::map<std::string, int>> columns) : columns_(std::move(columns)) {}

  static LabelEncoder fit(const RawDataset& raw);

  /// Code of `value` in categorical column `column`; unseen values get the reserved code.
  int code(std::size_t column, const std::string& value) const;
  int unknown_code(std::size_t column) const { return static_cast<int>(columns_.at(column).size()); }
  std::size_t column_count() const { return columns_.size(); }
  const std::vector<std::map<std::string, int>>& columns() const { return columns_; }

  std::string to_json() const;
  static LabelEncoder from_json(std::string_view text);

  friend bool operator==(const LabelEncoder&, const LabelEncoder&) = default;

private:
  std::vector<std::map<std::string, int>> columns_;
};

/// Attack name -> broad category.
class GroupingTable {
public:
  GroupingTable() = default;
  GroupingTable(std::vector<std::string> categories, std::map<std::string, std::string> by_name);

  /// The NSL-KDD grouping into DoS, Probe, R2L and U2R.
  static GroupingTable nsl_kdd();
  /// {"categories": [...], "groups": {"DoS": ["back", ...], ...}}
  static GroupingTable parse(std::string_view json_text);
  static GroupingTable load(const std::filesystem::path& path);

  std::optional<std::string> category_of(std::string_view attack_name) const;
  /// Declared category order; node i of a partition receives categories()[i].
  const std::vector<std::string>& categories() const { return categories_; }
  const std::map<std::string, std::string>& entries() const { return by_name_; }

  /// Lower-cases, trims and maps blanks to underscores.
  static std::string canonical_name(std::string_view name);

private:
  std::vector<std::string> categories_;
  std::map<std::string, std::string> by_name_;
};

struct NoiseSpec {
  double rho = 0.0;  // percent, [0, 50)
  std::uint64_t seed = 0;
};

struct Partition {
  std::vector<Dataset> nodes;
  std::vector<std::string> categories;  // categories[i] is the malicious class of nodes[i]
  bool normals_resampled = false;       // normal pool ran out; some normals drawn with replacement

  std::size_t size() const { return nodes.size(); }
};

struct SplitIndices {
  std::vector<Index> train;
  std::vector<Index> test;
};

struct NoisyDataset {
  Dataset dataset;
  std::vector<Index> flipped;
};

struct EncodedDataset {
  Dataset dataset;
  LabelEncoder encoder;
};

using CategoryCounts = std::vector<std::pair<std::string, std::size_t>>;

RawDataset read_csv(std::istream& in, const ColumnSpec& spec);
RawDataset load_csv(const std::filesystem::path& path, const ColumnSpec& spec);

/// Label-encodes categorical columns (fitting an encoder unless one is given) and scales each
/// sample to unit L2 norm. Zero vectors are left as they are.
EncodedDataset encode_and_normalize(const RawDataset& raw, const LabelEncoder* fitted = nullptr);

/// Scales every non-zero row to unit L2 norm.
void normalize_rows(Eigen::MatrixXd& features);

Dataset group_attacks(Dataset dataset, const GroupingTable& table);

SplitIndices split_indices(const Dataset& dataset, double train_fraction, bool stratified, std::uint64_t seed);
std::pair<Dataset, Dataset> split(const Dataset& dataset, double train_fraction, bool stratified, std::uint64_t seed);

Partition partition_federated(const Dataset& dataset, std::size_t n, const GroupingTable& table, std::uint64_t seed);

NoisyDataset inject_sln_noise(const Dataset& dataset, const NoiseSpec& spec);

inline constexpr Index kSynthDim = 10;

/// Gaussian clusters, one per category. Presets: separable, overlapping, xor.
Dataset synth_generate(std::string_view preset, const CategoryCounts& sizes, std::uint64_t seed,
                       Index dim = kSynthDim);

/// Four attack categories with `per_attack` samples each plus `normal` normals.
CategoryCounts standard_counts(std::size_t per_attack, std::size_t normal);

/// Dataset file: a "# phec-dataset v1" line, a header row, then one CSV row per sample.
void write_dataset(std::ostream& out, const Dataset& dataset);
Dataset read_dataset(std::istream& in);
void save_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace phec
