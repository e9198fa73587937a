#include "phec/cli.hpp"
#include "phec/pipeline.hpp"
#include "phec/rng.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

using namespace phec;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "phec");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / ("phec_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

std::string config_text(const Workspace& ws, const std::string& pipeline, const std::string& extra = "") {
  return R"({"pipeline": ")" + pipeline + R"(", "data": ")" + (ws / "train.data") + R"(", "model_out": ")" +
         (ws / "model.json") + R"(", "report_out": ")" + (ws / "report.json") +
         R"(", "seed": 3, "forest": {"trees": 8}, "mlp": {"hidden": [8]}, "train": {"epochs": 20},)" +
         R"( "alpha_grid": [0.3, 0.5, 0.7], "federated": {"max_rounds": 3, "epochs_per_round": 2})" + extra + "}";
}

}  // namespace

TEST_CASE("config defaults and validation") {
  const Config c = Config::parse(R"({"pipeline": "phec-centralized", "data": "x.data"})");
  CHECK(c.grid_size == 201);
  CHECK(c.u == 0.05);
  CHECK(c.pipeline == PipelineKind::PhecCentralized);
  CHECK(c.federated.aggregation == Aggregation::FedStack);

  try {
    Config::parse(R"({"pipeline": "phec-centralized", "data": "x", "noise": {"rho": 60}})");
    FAIL("accepted rho = 60");
  } catch (const UsageError& e) {
    CHECK(std::string(e.what()).find("rho must be < 50") != std::string::npos);
  }
  try {
    Config::parse(R"({"pipeline": "phec-centralized", "data": "x", "gammma": 0.5})");
    FAIL("accepted an unknown key");
  } catch (const UsageError& e) {
    CHECK(std::string(e.what()).find("gammma") != std::string::npos);
  }
  try {
    Config::parse(R"({"data": "x"})");
    FAIL("accepted a config without pipeline");
  } catch (const UsageError& e) {
    CHECK(std::string(e.what()).find("pipeline") != std::string::npos);
  }
  CHECK_THROWS_AS(Config::parse(R"({"pipeline": "phec-centralized", "data": "x", "u": 1.5})"), UsageError);
  CHECK_THROWS_AS(Config::parse(R"({"pipeline": "nt-phec-centralized", "data": "x", "knn": {"k": 3}})"), UsageError);
  CHECK_THROWS_AS(Config::parse(R"({"pipeline": "phec-centralized", "data": "x", "pca": {"bogus": 1}})"),
                  UsageError);

  const Config full = Config::parse(config_text(Workspace{}, "nt-phec-federated", R"(, "noise": {"rho": 10})"));
  const Config echoed = Config::parse(full.to_json().dump());
  CHECK(echoed.to_json() == full.to_json());
}

TEST_CASE("model round trips") {
  Rng rng(1);
  Eigen::MatrixXd X(40, 5);
  std::vector<int> y;
  for (Index i = 0; i < 40; ++i) {
    for (Index j = 0; j < 5; ++j) X(i, j) = rng.normal() / 3.0;
    y.push_back(X(i, 0) > 0);
  }
  const std::vector<Index> arch{5, 4, 1};
  const std::vector<MlpModel> cols{mlp_init(arch, 1), mlp_init(arch, 2), mlp_init(arch, 3)};
  StackedModel stacked = fed_stack(cols);
  stacked.gamma_star = 0.37;
  const StackedModel back = stacked_from_json(Json::parse(to_json(stacked).dump()));
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(5, [&] { return rng.normal(); });
    CHECK(stacked_scores(back, x) == stacked_scores(stacked, x));
    CHECK(stacked_predict(back, x) == stacked_predict(stacked, x));
  }

  const PcaModel pca = pca_fit(X, 3);
  const PcaModel pback = pca_from_json(Json::parse(to_json(pca).dump()));
  CHECK(pback.components == pca.components);
  CHECK(pback.mean == pca.mean);
  CHECK(pback.explained_variance == pca.explained_variance);

  ForestConfig fc;
  fc.trees = 3;
  const ForestModel forest = rf_fit(X, y, fc);
  CHECK(forest_from_json(Json::parse(to_json(forest).dump())).trees == forest.trees);
  const KnnModel knn = knn_fit(X, y, 5);
  const KnnModel kback = knn_from_json(Json::parse(to_json(knn).dump()));
  CHECK(kback.points == knn.points);
  CHECK(kback.labels == knn.labels);

  Json env = model_envelope("pca", to_json(pca));
  CHECK_NOTHROW(open_model_envelope(env, "pca"));
  CHECK_THROWS_AS(open_model_envelope(env, "knn"), DataError);
  env.erase("version");
  CHECK_THROWS_AS(open_model_envelope(env, "pca"), DataError);
  env["version"] = kModelFormatVersion + 1;
  CHECK_THROWS_AS(open_model_envelope(env, "pca"), DataError);
}

TEST_CASE("train, eval and report through the command line") {
  const Workspace ws;
  REQUIRE(cli({"synth", "--preset", "separable", "--out", ws / "train.data", "--seed", "1", "--per-attack", "60",
               "--normal", "240"})
              .code == 0);
  REQUIRE(cli({"synth", "--preset", "separable", "--out", ws / "test.data", "--seed", "2", "--per-attack", "30",
               "--normal", "120"})
              .code == 0);

  for (const std::string pipeline : {"phec-centralized", "phec-federated", "nt-phec-centralized"}) {
    CAPTURE(pipeline);
    write(ws / "config.json", config_text(ws, pipeline));
    const Run t1 = cli({"train", "--config", ws / "config.json"});
    REQUIRE_MESSAGE(t1.code == 0, t1.err);
    const std::string model1 = slurp(ws / "model.json"), report1 = slurp(ws / "report.json");
    REQUIRE(cli({"train", "--config", ws / "config.json"}).code == 0);
    CHECK(slurp(ws / "model.json") == model1);
    CHECK(slurp(ws / "report.json") == report1);

    const Json report = Json::parse(report1);
    CHECK(report["command"] == "train");
    CHECK(report["threshold"].contains("gamma_star"));
    if (is_federated(pipeline_from_string(pipeline))) {
      CHECK(report["federated"]["history"].size() == report["federated"]["rounds"].get<std::size_t>());
    }

    // The echoed config alone reproduces the run.
    write(ws / "echo.json", report["config"].dump());
    REQUIRE(cli({"train", "--config", ws / "echo.json"}).code == 0);
    CHECK(slurp(ws / "model.json") == model1);

    const Run e = cli({"eval", "--model", ws / "model.json", "--test", ws / "test.data", "--report", ws / "eval.json"});
    REQUIRE_MESSAGE(e.code == 0, e.err);
    const Json er = Json::parse(slurp(ws / "eval.json"));
    const double fpr = er["metrics"]["fpr"], u = er["model"]["u"];
    bool warned = false;
    for (const auto& w : er["warnings"]) warned = warned || w.get<std::string>().find("exceeds u") != std::string::npos;
    CHECK((fpr <= u || warned));
    CHECK(cli({"report", "--in", ws / "eval.json"}).code == 0);
  }

  REQUIRE(cli({"synth", "--preset", "separable", "--out", ws / "narrow.data", "--dim", "5"}).code == 0);
  const Run bad = cli({"eval", "--model", ws / "model.json", "--test", ws / "narrow.data", "--report", ws / "x.json"});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("features") != std::string::npos);

  const TrainedModel loaded = load_trained_model(ws / "model.json");
  const TrainedModel again = trained_model_from_json(to_json(loaded));
  const Dataset test = load_dataset(ws / "test.data");
  CHECK(loaded.scores(test.features) == again.scores(test.features));
}

TEST_CASE("noise command and failure exit codes") {
  const Workspace ws;
  REQUIRE(cli({"synth", "--preset", "overlapping", "--out", ws / "d.data", "--per-attack", "50", "--normal", "200"})
              .code == 0);
  CHECK(cli({"noise", "--rho", "20", "--seed", "4", "--input", ws / "d.data", "--out", ws / "n.data"}).code == 0);
  const Dataset clean = load_dataset(ws / "d.data"), noisy = load_dataset(ws / "n.data");
  std::size_t flips = 0;
  for (Index i = 0; i < clean.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    flips += clean.binary_label[k] != noisy.binary_label[k];
    CHECK(noisy.noisy[k] == (clean.binary_label[k] != noisy.binary_label[k]));
  }
  CHECK(flips > 0);

  CHECK(cli({"noise", "--rho", "60", "--seed", "4", "--input", ws / "d.data", "--out", ws / "m.data"}).code == 1);
  CHECK(cli({"frobnicate"}).code == 1);
  CHECK(cli({"eval", "--model", ws / "missing.json", "--test", ws / "d.data", "--report", ws / "r.json"}).code == 2);
  write(ws / "bad.json", R"({"pipeline": "phec-centralized", "data": "d.data", "gammma": 1})");
  const Run r = cli({"train", "--config", ws / "bad.json"});
  CHECK(r.code == 1);
  CHECK(r.err.find("gammma") != std::string::npos);
}

TEST_CASE("installed tool reports usage errors") {
  const std::string cmd = std::string(PHEC_TOOL) + " train --config /nonexistent/phec.json > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  CHECK(WEXITSTATUS(status) == 1);
  const int ok = std::system((std::string(PHEC_TOOL) + " --help > /dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(ok) == 0);
}
