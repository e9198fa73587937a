#include "phec/data.hpp"

#include "phec/error.hpp"
#include "phec/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace phec {

namespace {

const std::string kModule = "data";

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

std::optional<double> parse_real(std::string_view text) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::string format_real(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::string category_key(const Dataset& d, Index i) {
  const auto& c = d.category[static_cast<std::size_t>(i)];
  if (!c.empty()) return c;
  return d.binary_label[static_cast<std::size_t>(i)] ? "?threat" : std::string(category::Normal);
}

}  // namespace

std::string_view to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::Categorical: return "categorical";
    case ColumnKind::Numeric: return "numeric";
    case ColumnKind::Label: return "label";
    case ColumnKind::Ignore: return "ignore";
  }
  return "ignore";
}

ColumnKind column_kind_from_string(std::string_view text) {
  if (text == "categorical") return ColumnKind::Categorical;
  if (text == "numeric") return ColumnKind::Numeric;
  if (text == "label") return ColumnKind::Label;
  if (text == "ignore") return ColumnKind::Ignore;
  throw UsageError(kModule, "unknown column kind \"" + std::string(text) + "\"");
}

std::size_t ColumnSpec::feature_count() const {
  return static_cast<std::size_t>(std::count_if(kinds.begin(), kinds.end(), [](ColumnKind k) {
    return k == ColumnKind::Categorical || k == ColumnKind::Numeric;
  }));
}

std::size_t ColumnSpec::label_column() const {
  const auto it = std::find(kinds.begin(), kinds.end(), ColumnKind::Label);
  if (it == kinds.end()) throw UsageError(kModule, "schema declares no label column");
  return static_cast<std::size_t>(it - kinds.begin());
}

ColumnSpec ColumnSpec::parse(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(kModule, std::string("schema is not valid JSON: ") + e.what());
  }
  ColumnSpec spec;
  for (const auto& [key, value] : j.items()) {
    if (key == "columns") {
      for (const auto& entry : value) {
        if (entry.is_string()) {
          spec.kinds.push_back(column_kind_from_string(entry.get<std::string>()));
        } else {
          const auto kind = column_kind_from_string(entry.at("kind").get<std::string>());
          const auto repeat = entry.value("repeat", std::size_t{1});
          spec.kinds.insert(spec.kinds.end(), repeat, kind);
        }
      }
    } else if (key == "normal_label") {
      spec.normal_label = value.get<std::string>();
    } else if (key == "header") {
      spec.header = value.get<bool>();
    } else {
      throw UsageError(kModule, "unknown schema key \"" + key + "\"");
    }
  }
  if (std::count(spec.kinds.begin(), spec.kinds.end(), ColumnKind::Label) != 1)
    throw UsageError(kModule, "schema must declare exactly one label column");
  return spec;
}

ColumnSpec ColumnSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError(kModule, "cannot open schema " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

Dataset Dataset::subset(std::span<const Index> rows) const {
  Dataset out;
  out.features.resize(static_cast<Index>(rows.size()), dim());
  out.binary_label.reserve(rows.size());
  out.attack_name.reserve(rows.size());
  out.category.reserve(rows.size());
  out.noisy.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Index i = rows[r];
    const auto s = static_cast<std::size_t>(i);
    out.features.row(static_cast<Index>(r)) = features.row(i);
    out.binary_label.push_back(binary_label[s]);
    out.attack_name.push_back(attack_name[s]);
    out.category.push_back(category[s]);
    out.noisy.push_back(noisy[s]);
  }
  return out;
}

std::size_t Dataset::threat_count() const {
  return static_cast<std::size_t>(std::count(binary_label.begin(), binary_label.end(), 1));
}

void Dataset::validate() const {
  const auto n = static_cast<std::size_t>(size());
  if (n == 0) throw DataError(kModule, "dataset has no samples");
  if (binary_label.size() != n || attack_name.size() != n || category.size() != n || noisy.size() != n)
    throw DataError(kModule, "dataset columns have inconsistent lengths");
  if (!features.allFinite()) throw DataError(kModule, "dataset contains non-finite feature values");
  for (std::size_t i = 0; i < n; ++i) {
    if (binary_label[i] != 0 && binary_label[i] != 1)
      throw DataError(kModule, "row " + std::to_string(i) + ": binary label must be 0 or 1");
    if (noisy[i] || category[i].empty()) continue;
    if ((binary_label[i] == 0) != (category[i] == category::Normal))
      throw DataError(kModule, "row " + std::to_string(i) + ": label disagrees with category " + category[i]);
  }
}

LabelEncoder LabelEncoder::fit(const RawDataset& raw) {
  std::size_t cat_columns = 0;
  for (auto k : raw.spec.kinds) cat_columns += k == ColumnKind::Categorical;
  std::vector<std::set<std::string>> seen(cat_columns);
  for (const auto& row : raw.rows)
    for (std::size_t c = 0; c < cat_columns; ++c) seen[c].insert(row.categorical[c]);
  std::vector<std::map<std::string, int>> columns(cat_columns);
  for (std::size_t c = 0; c < cat_columns; ++c) {
    int code = 0;
    for (const auto& value : seen[c]) columns[c].emplace(value, code++);
  }
  return LabelEncoder(std::move(columns));
}

int LabelEncoder::code(std::size_t column, const std::string& value) const {
  const auto& map = columns_.at(column);
  const auto it = map.find(value);
  return it == map.end() ? static_cast<int>(map.size()) : it->second;
}

std::string LabelEncoder::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "phec-encoder";
  j["version"] = 1;
  auto cols = nlohmann::ordered_json::array();
  for (const auto& map : columns_) {
    auto values = nlohmann::ordered_json::array();
    std::vector<std::string> ordered(map.size());
    for (const auto& [value, code] : map) ordered[static_cast<std::size_t>(code)] = value;
    for (auto& v : ordered) values.push_back(v);
    cols.push_back(values);
  }
  j["columns"] = cols;
  return j.dump(2) + "\n";
}

LabelEncoder LabelEncoder::from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.value("format", "") != "phec-encoder" || j.value("version", 0) != 1)
      throw DataError(kModule, "encoder file has a missing or unsupported format version");
    std::vector<std::map<std::string, int>> columns;
    for (const auto& values : j.at("columns")) {
      std::map<std::string, int> map;
      int code = 0;
      for (const auto& v : values) map.emplace(v.get<std::string>(), code++);
      columns.push_back(std::move(map));
    }
    return LabelEncoder(std::move(columns));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(kModule, std::string("corrupt encoder file: ") + e.what());
  }
}

GroupingTable::GroupingTable(std::vector<std::string> categories, std::map<std::string, std::string> by_name)
    : categories_(std::move(categories)) {
  for (auto& [name, cat] : by_name) {
    if (std::find(categories_.begin(), categories_.end(), cat) == categories_.end())
      throw UsageError(kModule, "grouping maps \"" + name + "\" to undeclared category \"" + cat + "\"");
    by_name_.emplace(canonical_name(name), cat);
  }
}

GroupingTable GroupingTable::nsl_kdd() {
  const std::vector<std::pair<std::string, std::vector<std::string>>> groups = {
      {"DoS", {"back", "land", "neptune", "pod", "smurf", "teardrop", "apache2", "mailbomb", "processtable",
               "udpstorm", "worm"}},
      {"Probe", {"ipsweep", "nmap", "portsweep", "satan", "mscan", "saint"}},
      {"R2L", {"ftp_write", "spy", "guess_passwd", "imap", "multihop", "multhop", "phf", "xlock", "xsnoop",
               "warezclient", "warezmaster", "snmpguess", "sendmail", "named", "snmpgetattack", "httptunnel"}},
      {"U2R", {"buffer_overflow", "perl", "loadmodule", "rootkit", "ps", "sqlattack", "xterm"}},
  };
  std::vector<std::string> categories;
  std::map<std::string, std::string> by_name;
  for (const auto& [cat, names] : groups) {
    categories.push_back(cat);
    for (const auto& n : names) by_name.emplace(n, cat);
  }
  return GroupingTable(std::move(categories), std::move(by_name));
}

GroupingTable GroupingTable::parse(std::string_view json_text) {
  try {
    const auto j = nlohmann::ordered_json::parse(json_text);
    std::vector<std::string> categories;
    std::map<std::string, std::string> by_name;
    for (const auto& [key, value] : j.items()) {
      if (key == "categories") {
        categories = value.get<std::vector<std::string>>();
      } else if (key == "groups") {
        for (const auto& [cat, names] : value.items())
          for (const auto& n : names) by_name.emplace(n.get<std::string>(), cat);
      } else {
        throw UsageError(kModule, "unknown grouping key \"" + key + "\"");
      }
    }
    if (categories.empty()) throw UsageError(kModule, "grouping declares no categories");
    return GroupingTable(std::move(categories), std::move(by_name));
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(kModule, std::string("grouping is not valid: ") + e.what());
  }
}

GroupingTable GroupingTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError(kModule, "cannot open grouping " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::optional<std::string> GroupingTable::category_of(std::string_view attack_name) const {
  const auto it = by_name_.find(canonical_name(attack_name));
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

std::string GroupingTable::canonical_name(std::string_view name) {
  std::string out(trim(name));
  for (auto& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (c == ' ') c = '_';
  }
  return out;
}

RawDataset read_csv(std::istream& in, const ColumnSpec& spec) {
  RawDataset raw;
  raw.spec = spec;
  const std::size_t label_col = spec.label_column();
  std::string line;
  std::size_t line_no = 0;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (spec.header && line_no == 1) continue;
    ++row_no;
    const auto fields = split_fields(line);
    if (fields.size() != spec.kinds.size())
      throw DataError(kModule, "row " + std::to_string(row_no) + ": expected " + std::to_string(spec.kinds.size()) +
                                   " fields, found " + std::to_string(fields.size()));
    RawRecord rec;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      switch (spec.kinds[c]) {
        case ColumnKind::Categorical:
          rec.categorical.emplace_back(fields[c]);
          break;
        case ColumnKind::Numeric: {
          const auto v = parse_real(fields[c]);
          if (!v)
            throw DataError(kModule, "row " + std::to_string(row_no) + ": column " + std::to_string(c + 1) +
                                         " is not a finite number: \"" + std::string(fields[c]) + "\"");
          rec.numeric.push_back(*v);
          break;
        }
        case ColumnKind::Label:
        case ColumnKind::Ignore:
          break;
      }
    }
    rec.label = std::string(fields[label_col]);
    raw.rows.push_back(std::move(rec));
  }
  if (raw.rows.empty()) throw DataError(kModule, "no rows");
  return raw;
}

RawDataset load_csv(const std::filesystem::path& path, const ColumnSpec& spec) {
  std::ifstream in(path);
  if (!in) throw DataError(kModule, "cannot open " + path.string());
  return read_csv(in, spec);
}

void normalize_rows(Eigen::MatrixXd& features) {
  for (Index i = 0; i < features.rows(); ++i) {
    const double norm = features.row(i).norm();
    if (norm > 0.0) features.row(i) /= norm;
  }
}

EncodedDataset encode_and_normalize(const RawDataset& raw, const LabelEncoder* fitted) {
  LabelEncoder encoder = fitted ? *fitted : LabelEncoder::fit(raw);
  const auto& kinds = raw.spec.kinds;
  std::size_t cat_columns = 0;
  for (auto k : kinds) cat_columns += k == ColumnKind::Categorical;
  if (encoder.column_count() != cat_columns)
    throw DataError(kModule, "encoder has " + std::to_string(encoder.column_count()) +
                                 " categorical columns, data has " + std::to_string(cat_columns));

  const auto n = static_cast<Index>(raw.rows.size());
  const auto d = static_cast<Index>(raw.spec.feature_count());
  EncodedDataset out{Dataset{}, std::move(encoder)};
  Dataset& ds = out.dataset;
  ds.features.resize(n, d);
  for (Index i = 0; i < n; ++i) {
    const auto& rec = raw.rows[static_cast<std::size_t>(i)];
    std::size_t ci = 0, ni = 0;
    Index f = 0;
    for (auto k : kinds) {
      if (k == ColumnKind::Categorical) {
        ds.features(i, f++) = out.encoder.code(ci, rec.categorical[ci]);
        ++ci;
      } else if (k == ColumnKind::Numeric) {
        ds.features(i, f++) = rec.numeric[ni++];
      }
    }
    const bool normal = rec.label == raw.spec.normal_label;
    ds.binary_label.push_back(normal ? 0 : 1);
    ds.attack_name.push_back(rec.label);
    ds.category.emplace_back(normal ? std::string(category::Normal) : std::string());
    ds.noisy.push_back(false);
  }
  normalize_rows(ds.features);
  return out;
}

Dataset group_attacks(Dataset dataset, const GroupingTable& table) {
  std::set<std::string> unknown;
  for (std::size_t i = 0; i < dataset.attack_name.size(); ++i) {
    const int original = dataset.noisy[i] ? 1 - dataset.binary_label[i] : dataset.binary_label[i];
    if (original == 0) {
      dataset.category[i] = std::string(category::Normal);
      continue;
    }
    if (auto cat = table.category_of(dataset.attack_name[i])) {
      dataset.category[i] = *cat;
    } else {
      unknown.insert(dataset.attack_name[i]);
    }
  }
  if (!unknown.empty()) {
    std::string names;
    for (const auto& n : unknown) names += (names.empty() ? "" : ", ") + n;
    throw DataError(kModule, "unknown attack names: " + names);
  }
  return dataset;
}

SplitIndices split_indices(const Dataset& dataset, double train_fraction, bool stratified, std::uint64_t seed) {
  const Index n = dataset.size();
  if (n < 2) throw DataError(kModule, "split needs at least 2 samples");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw UsageError(kModule, "train fraction must lie in (0, 1)");

  std::map<std::string, std::vector<Index>> strata;
  if (stratified) {
    for (Index i = 0; i < n; ++i) strata[category_key(dataset, i)].push_back(i);
  } else {
    auto& all = strata[""];
    for (Index i = 0; i < n; ++i) all.push_back(i);
  }

  Rng rng(derive_seed(seed, "split"));
  SplitIndices out;
  for (auto& [key, rows] : strata) {
    rng.shuffle(rows);
    const auto take = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(rows.size())));
    out.train.insert(out.train.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(take));
    out.test.insert(out.test.end(), rows.begin() + static_cast<std::ptrdiff_t>(take), rows.end());
  }
  if (out.train.empty() || out.test.empty())
    throw DataError(kModule, "train fraction " + format_real(train_fraction) + " leaves one side of the split empty");
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double train_fraction, bool stratified, std::uint64_t seed) {
  const auto idx = split_indices(dataset, train_fraction, stratified, seed);
  return {dataset.subset(idx.train), dataset.subset(idx.test)};
}

Partition partition_federated(const Dataset& dataset, std::size_t n, const GroupingTable& table, std::uint64_t seed) {
  if (n == 0) throw UsageError(kModule, "node count must be positive");
  if (n > table.categories().size())
    throw UsageError(kModule, "node count " + std::to_string(n) + " exceeds the " +
                                  std::to_string(table.categories().size()) + " declared categories");

  std::vector<Index> pool;
  for (Index i = 0; i < dataset.size(); ++i)
    if (dataset.binary_label[static_cast<std::size_t>(i)] == 0) pool.push_back(i);
  if (pool.empty()) throw DataError(kModule, "no normal samples to pair with malicious ones");

  Rng rng(derive_seed(seed, "partition"));
  rng.shuffle(pool);
  std::size_t cursor = 0;

  Partition out;
  for (std::size_t node = 0; node < n; ++node) {
    const std::string& cat = table.categories()[node];
    std::vector<Index> rows;
    for (Index i = 0; i < dataset.size(); ++i) {
      const auto s = static_cast<std::size_t>(i);
      if (dataset.binary_label[s] == 1 && dataset.category[s] == cat) rows.push_back(i);
    }
    if (rows.empty()) throw DataError(kModule, "category " + cat + " has no malicious samples");
    const std::size_t malicious = rows.size();
    for (std::size_t k = 0; k < malicious; ++k) {
      if (cursor < pool.size()) {
        rows.push_back(pool[cursor++]);
      } else {
        rows.push_back(pool[rng.index(pool.size())]);
        out.normals_resampled = true;
      }
    }
    out.nodes.push_back(dataset.subset(rows));
    out.categories.push_back(cat);
  }
  return out;
}

NoisyDataset inject_sln_noise(const Dataset& dataset, const NoiseSpec& spec) {
  if (!(spec.rho >= 0.0 && spec.rho < 50.0)) throw UsageError(kModule, "rho must be < 50 and >= 0");
  NoisyDataset out{dataset, {}};
  if (spec.rho == 0.0) return out;
  Rng rng(derive_seed(spec.seed, "sln"));
  for (Index i = 0; i < dataset.size(); ++i) {
    const double v = rng.uniform();
    if (100.0 * v <= spec.rho) {
      const auto s = static_cast<std::size_t>(i);
      out.dataset.binary_label[s] = 1 - out.dataset.binary_label[s];
      out.dataset.noisy[s] = !out.dataset.noisy[s];
      out.flipped.push_back(i);
    }
  }
  return out;
}

CategoryCounts standard_counts(std::size_t per_attack, std::size_t normal) {
  return {{std::string(category::DoS), per_attack},
          {std::string(category::Probe), per_attack},
          {std::string(category::R2L), per_attack},
          {std::string(category::U2R), per_attack},
          {std::string(category::Normal), normal}};
}

Dataset synth_generate(std::string_view preset, const CategoryCounts& sizes, std::uint64_t seed, Index dim) {
  enum class Preset { Separable, Overlapping, Xor };
  Preset kind;
  if (preset == "separable") kind = Preset::Separable;
  else if (preset == "overlapping") kind = Preset::Overlapping;
  else if (preset == "xor") kind = Preset::Xor;
  else throw UsageError(kModule, "unknown synthetic preset \"" + std::string(preset) + "\"");
  if (dim < 4) throw UsageError(kModule, "synthetic data needs at least 4 dimensions");

  constexpr double sigma = 0.5;
  std::size_t total = 0;
  for (const auto& [cat, count] : sizes) {
    if (count == 0) throw UsageError(kModule, "category " + cat + " has a zero count");
    total += count;
  }

  Rng rng(derive_seed(seed, "synth"));
  Dataset ds;
  ds.features.resize(static_cast<Index>(total), dim);
  Index row = 0;
  std::size_t attack_index = 0;
  for (const auto& [cat, count] : sizes) {
    const bool normal = cat == category::Normal;
    const std::size_t k = normal ? 0 : attack_index++;
    std::string name = normal ? "normal" : "synthetic_" + GroupingTable::canonical_name(cat);

    Eigen::VectorXd center = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd alt = Eigen::VectorXd::Zero(dim);
    bool two_clusters = false;
    switch (kind) {
      case Preset::Separable:
        if (!normal) center(static_cast<Index>(k % static_cast<std::size_t>(dim))) = 3.0 + 3.0 * static_cast<double>(k / static_cast<std::size_t>(dim));
        break;
      case Preset::Overlapping: {
        if (!normal) {
          const bool stealthy = cat == category::R2L || cat == category::U2R;
          center(static_cast<Index>(k % static_cast<std::size_t>(dim))) = stealthy ? 0.9 : 3.0;
        }
        break;
      }
      case Preset::Xor:
        if (normal) {
          center(0) = 2.0, center(1) = -2.0;
          alt(0) = -2.0, alt(1) = 2.0;
          two_clusters = true;
        } else {
          const double s = (k % 2 == 0) ? 2.0 : -2.0;
          center(0) = s, center(1) = s;
        }
        break;
    }

    for (std::size_t j = 0; j < count; ++j, ++row) {
      const Eigen::VectorXd& c = (two_clusters && j % 2 == 1) ? alt : center;
      for (Index f = 0; f < dim; ++f) ds.features(row, f) = c(f) + sigma * rng.normal();
      ds.binary_label.push_back(normal ? 0 : 1);
      ds.attack_name.push_back(name);
      ds.category.push_back(cat);
      ds.noisy.push_back(false);
    }
  }

  std::vector<Index> order(total);
  for (std::size_t i = 0; i < total; ++i) order[i] = static_cast<Index>(i);
  rng.shuffle(order);
  return ds.subset(order);
}

void write_dataset(std::ostream& out, const Dataset& dataset) {
  out << "# phec-dataset v1\n";
  for (Index f = 0; f < dataset.dim(); ++f) out << 'f' << f << ',';
  out << "label,attack,category,noisy\n";
  for (Index i = 0; i < dataset.size(); ++i) {
    const auto s = static_cast<std::size_t>(i);
    for (Index f = 0; f < dataset.dim(); ++f) out << format_real(dataset.features(i, f)) << ',';
    out << dataset.binary_label[s] << ',' << dataset.attack_name[s] << ',' << dataset.category[s] << ','
        << (dataset.noisy[s] ? 1 : 0) << '\n';
  }
}

Dataset read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != "# phec-dataset v1")
    throw DataError(kModule, "not a phec dataset file (missing version line)");
  if (!std::getline(in, line)) throw DataError(kModule, "dataset file has no header");
  const auto header = split_fields(line);
  if (header.size() < 5 || header[header.size() - 4] != "label")
    throw DataError(kModule, "dataset header is malformed");
  const std::size_t d = header.size() - 4;

  std::vector<double> values;
  Dataset ds;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    ++row_no;
    const auto fields = split_fields(line);
    if (fields.size() != d + 4)
      throw DataError(kModule, "dataset row " + std::to_string(row_no) + " has " + std::to_string(fields.size()) +
                                   " fields, expected " + std::to_string(d + 4));
    for (std::size_t f = 0; f < d; ++f) {
      const auto v = parse_real(fields[f]);
      if (!v) throw DataError(kModule, "dataset row " + std::to_string(row_no) + ": bad number");
      values.push_back(*v);
    }
    if (fields[d] != "0" && fields[d] != "1")
      throw DataError(kModule, "dataset row " + std::to_string(row_no) + ": label must be 0 or 1");
    ds.binary_label.push_back(fields[d] == "1");
    ds.attack_name.emplace_back(fields[d + 1]);
    ds.category.emplace_back(fields[d + 2]);
    ds.noisy.push_back(fields[d + 3] == "1");
  }
  if (row_no == 0) throw DataError(kModule, "no rows");
  ds.features = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), static_cast<Index>(row_no), static_cast<Index>(d));
  ds.validate();
  return ds;
}

void save_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  std::ofstream out(path);
  if (!out) throw DataError(kModule, "cannot write " + path.string());
  write_dataset(out, dataset);
  if (!out) throw DataError(kModule, "failed writing " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(kModule, "cannot open " + path.string());
  return read_dataset(in);
}

}  // namespace phec
