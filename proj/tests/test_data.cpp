#include "phec/data.hpp"
#include "phec/error.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

using namespace phec;

namespace {

ColumnSpec nsl_style_spec() {
  return ColumnSpec::parse(R"({"columns": ["numeric", {"kind": "categorical", "repeat": 3},
                                            {"kind": "numeric", "repeat": 37}, "label", "ignore"]})");
}

std::string nsl_style_row(const std::string& protocol, const std::string& label) {
  std::string row = "0," + protocol + ",http,SF";
  for (int i = 0; i < 37; ++i) row += "," + std::to_string(i % 5);
  return row + "," + label + ",21\n";
}

Dataset tiny(std::vector<int> labels, std::vector<std::string> categories) {
  Dataset d;
  d.features = Eigen::MatrixXd::Zero(static_cast<Index>(labels.size()), 2);
  for (Index i = 0; i < d.size(); ++i) d.features(i, 0) = static_cast<double>(i);
  d.binary_label = std::move(labels);
  d.category = std::move(categories);
  for (std::size_t i = 0; i < d.binary_label.size(); ++i) {
    d.attack_name.push_back(d.binary_label[i] ? "a" : "normal");
    d.noisy.push_back(false);
  }
  return d;
}

Dataset categorized(std::map<std::string, std::size_t> attacks, std::size_t normals) {
  std::vector<int> labels;
  std::vector<std::string> cats;
  for (const auto& [cat, count] : attacks)
    for (std::size_t i = 0; i < count; ++i) labels.push_back(1), cats.push_back(cat);
  for (std::size_t i = 0; i < normals; ++i) labels.push_back(0), cats.emplace_back(category::Normal);
  return tiny(labels, cats);
}

}  // namespace

TEST_CASE("csv with 41 features, a label and an ignored column") {
  std::stringstream in(nsl_style_row("tcp", "normal") + nsl_style_row("udp", "neptune"));
  const RawDataset raw = read_csv(in, nsl_style_spec());
  CHECK(raw.spec.kinds.size() == 43);
  CHECK(raw.spec.feature_count() == 41);
  REQUIRE(raw.rows.size() == 2);
  CHECK(raw.rows[0].categorical.size() == 3);
  CHECK(raw.rows[0].numeric.size() == 38);
  CHECK(raw.rows[1].label == "neptune");
}

TEST_CASE("empty csv is rejected") {
  std::stringstream in("");
  CHECK_THROWS_WITH_AS(read_csv(in, nsl_style_spec()), "data: no rows", DataError);
}

TEST_CASE("short row names its index") {
  std::string row = "0,tcp,http,SF";
  for (int i = 0; i < 36; ++i) row += ",1";
  std::stringstream in(row + "\n");
  try {
    read_csv(in, nsl_style_spec());
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("row 1") != std::string::npos);
    CHECK(std::string(e.what()).find("40") != std::string::npos);
  }
}

TEST_CASE("unparseable numeric names the row") {
  const auto spec = ColumnSpec::parse(R"({"columns": ["numeric", "label"]})");
  std::stringstream bad("1,normal\nfoo,normal\n");
  CHECK_THROWS_WITH_AS(read_csv(bad, spec), doctest::Contains("row 2"), DataError);
}

TEST_CASE("schema rejects unknown keys and needs one label") {
  CHECK_THROWS_AS(ColumnSpec::parse(R"({"columns": ["label"], "colums": []})"), UsageError);
  CHECK_THROWS_AS(ColumnSpec::parse(R"({"columns": ["numeric"]})"), UsageError);
}

TEST_CASE("rows are scaled to unit norm") {
  std::stringstream in("3,4,normal\n0,0,normal\n");
  const auto spec = ColumnSpec::parse(R"({"columns": ["numeric", "numeric", "label"]})");
  const auto enc = encode_and_normalize(read_csv(in, spec));
  CHECK(enc.dataset.features(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(enc.dataset.features(0, 1) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(enc.dataset.features(1, 0) == 0.0);
  CHECK(enc.dataset.features(1, 1) == 0.0);
}

TEST_CASE("categorical codes follow sorted order and unseen values get the reserved code") {
  const auto spec = ColumnSpec::parse(R"({"columns": ["categorical", "label"]})");
  std::stringstream train("tcp,normal\nudp,normal\nicmp,normal\n");
  const auto enc = encode_and_normalize(read_csv(train, spec));
  CHECK(enc.encoder.code(0, "icmp") == 0);
  CHECK(enc.encoder.code(0, "tcp") == 1);
  CHECK(enc.encoder.code(0, "udp") == 2);
  CHECK(enc.encoder.code(0, "sctp") == 3);
  CHECK(enc.encoder.unknown_code(0) == 3);

  std::stringstream test("sctp,normal\n");
  const auto applied = encode_and_normalize(read_csv(test, spec), &enc.encoder);
  CHECK(applied.dataset.features(0, 0) == 1.0);  // code 3 normalized to unit length

  CHECK(LabelEncoder::from_json(enc.encoder.to_json()) == enc.encoder);
}

TEST_CASE("normalization property on random rows") {
  std::stringstream in;
  for (int i = 0; i < 50; ++i) in << (i * 7 % 13) - 6 << ',' << (i * 3 % 11) << ',' << (i % 2 ? "normal" : "x") << '\n';
  const auto spec = ColumnSpec::parse(R"({"columns": ["numeric", "numeric", "label"]})");
  const auto enc = encode_and_normalize(read_csv(in, spec));
  for (Index i = 0; i < enc.dataset.size(); ++i) {
    const double n = enc.dataset.features.row(i).norm();
    if (n > 0.0) CHECK(std::abs(n - 1.0) < 1e-9);
  }
}

TEST_CASE("attack grouping") {
  const auto table = GroupingTable::nsl_kdd();
  CHECK(table.category_of("neptune") == "DoS");
  CHECK(table.category_of("rootkit") == "U2R");
  CHECK(table.category_of("back") == "DoS");
  CHECK(table.category_of("buffer_overflow") == "U2R");
  CHECK(table.categories() == std::vector<std::string>{"DoS", "Probe", "R2L", "U2R"});

  Dataset d = tiny({1, 0, 1}, {"", "Normal", ""});
  d.attack_name = {"neptune", "normal", "zzz-unknown"};
  CHECK_THROWS_WITH_AS(group_attacks(d, table), doctest::Contains("zzz-unknown"), DataError);
  d.attack_name[2] = "rootkit";
  const Dataset g = group_attacks(d, table);
  CHECK(g.category == std::vector<std::string>{"DoS", "Normal", "U2R"});
  CHECK_NOTHROW(g.validate());
}

TEST_CASE("grouping table from json") {
  const auto t = GroupingTable::parse(R"({"categories": ["A", "B"], "groups": {"A": ["x"], "B": ["y", "Z z"]}})");
  CHECK(t.category_of("z_z") == "B");
  CHECK(t.category_of("x") == "A");
  CHECK_FALSE(t.category_of("w"));
}

TEST_CASE("split sizes, determinism and stratification") {
  std::vector<int> labels;
  std::vector<std::string> cats;
  for (int i = 0; i < 100; ++i) {
    labels.push_back(i % 2);
    cats.emplace_back(i % 2 ? "DoS" : "Normal");
  }
  const Dataset d = tiny(labels, cats);
  const auto a = split_indices(d, 0.8, false, 5);
  CHECK(a.train.size() == 80);
  CHECK(a.test.size() == 20);
  const auto b = split_indices(d, 0.8, false, 5);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);

  std::vector<Index> all(a.train);
  all.insert(all.end(), a.test.begin(), a.test.end());
  std::sort(all.begin(), all.end());
  for (Index i = 0; i < 100; ++i) CHECK(all[static_cast<std::size_t>(i)] == i);

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto [tr, te] = split(d, 0.8, true, seed);
    const auto threats_tr = static_cast<double>(tr.threat_count());
    const auto threats_te = static_cast<double>(te.threat_count());
    CHECK(std::abs(threats_tr - 0.5 * static_cast<double>(tr.size())) <= 1.0);
    CHECK(std::abs(threats_te - 0.5 * static_cast<double>(te.size())) <= 1.0);
  }
  CHECK_THROWS_AS(split_indices(d, 0.001, false, 1), DataError);
}

TEST_CASE("partition keeps 1:1 ratio and disjoint normals") {
  const Dataset d = categorized({{"DoS", 50}, {"Probe", 30}, {"R2L", 20}, {"U2R", 5}}, 1000);
  const Partition p = partition_federated(d, 4, GroupingTable::nsl_kdd(), 3);
  REQUIRE(p.size() == 4);
  CHECK_FALSE(p.normals_resampled);
  std::set<double> normal_ids;
  std::size_t malicious = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const Dataset& node = p.nodes[i];
    std::set<std::string> cats;
    std::size_t threats = 0;
    for (Index r = 0; r < node.size(); ++r) {
      const auto s = static_cast<std::size_t>(r);
      if (node.binary_label[s]) {
        ++threats;
        cats.insert(node.category[s]);
      } else {
        CHECK(normal_ids.insert(node.features(r, 0)).second);
      }
    }
    CHECK(cats == std::set<std::string>{p.categories[i]});
    CHECK(static_cast<Index>(2 * threats) == node.size());
    malicious += threats;
  }
  CHECK(p.nodes[0].size() == 100);
  CHECK(malicious == 105);
}

TEST_CASE("partition falls back to resampled normals") {
  const Dataset d = categorized({{"DoS", 50}}, 10);
  const GroupingTable t({"DoS"}, {});
  const Partition p = partition_federated(d, 1, t, 1);
  CHECK(p.normals_resampled);
  CHECK(p.nodes[0].size() == 100);
  CHECK(p.nodes[0].threat_count() == 50);
}

TEST_CASE("partition rejects an empty category") {
  const Dataset d = categorized({{"DoS", 5}}, 10);
  CHECK_THROWS_WITH_AS(partition_federated(d, 2, GroupingTable::nsl_kdd(), 1), doctest::Contains("Probe"), DataError);
}

TEST_CASE("label noise") {
  std::vector<int> labels(10000);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 2);
  std::vector<std::string> cats;
  for (int y : labels) cats.emplace_back(y ? "DoS" : "Normal");
  const Dataset d = tiny(labels, cats);

  const auto none = inject_sln_noise(d, {0.0, 1});
  CHECK(none.flipped.empty());
  CHECK(none.dataset.binary_label == d.binary_label);

  const auto a = inject_sln_noise(d, {20.0, 42});
  const auto b = inject_sln_noise(d, {20.0, 42});
  CHECK(a.flipped == b.flipped);
  CHECK(a.flipped.size() >= 1880);
  CHECK(a.flipped.size() <= 2120);
  CHECK(a.dataset.features == d.features);

  Dataset restored = a.dataset;
  for (Index i : a.flipped) {
    auto& y = restored.binary_label[static_cast<std::size_t>(i)];
    y = 1 - y;
  }
  CHECK(restored.binary_label == d.binary_label);
  CHECK_NOTHROW(a.dataset.validate());

  CHECK_THROWS_WITH_AS(inject_sln_noise(d, {50.0, 1}), doctest::Contains("rho must be < 50"), UsageError);
  CHECK_THROWS_AS(inject_sln_noise(d, {60.0, 1}), UsageError);
}

TEST_CASE("synthetic presets") {
  const Dataset d = synth_generate("separable", standard_counts(100, 400), 9);
  CHECK(d.size() == 800);
  CHECK(d.threat_count() == 400);
  CHECK_NOTHROW(d.validate());
  const Dataset e = synth_generate("separable", standard_counts(100, 400), 9);
  CHECK(d.features == e.features);
  CHECK(d.category == e.category);
  CHECK_THROWS_AS(synth_generate("spiral", standard_counts(1, 1), 0), UsageError);
  for (const char* preset : {"overlapping", "xor"}) CHECK_NOTHROW(synth_generate(preset, standard_counts(5, 5), 1).validate());
}

TEST_CASE("dataset file round trip is exact") {
  Dataset d = synth_generate("xor", standard_counts(10, 20), 4);
  d = inject_sln_noise(d, {30.0, 2}).dataset;
  std::stringstream ss;
  write_dataset(ss, d);
  const Dataset r = read_dataset(ss);
  CHECK(r.features == d.features);
  CHECK(r.binary_label == d.binary_label);
  CHECK(r.attack_name == d.attack_name);
  CHECK(r.category == d.category);
  CHECK(r.noisy == d.noisy);
}
