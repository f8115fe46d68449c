#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pentadrive/commands.hpp"

using namespace pentadrive;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("pentadrive_cli_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

int cli(const std::vector<std::string>& args, std::string* out_text = nullptr,
        std::string* err_text = nullptr) {
  std::ostringstream out, err;
  std::vector<std::string> full = {"pentadrive"};
  full.insert(full.end(), args.begin(), args.end());
  const int code = run_cli(full, out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  f << text;
}

// Small, fast scenario: 0.2 s flux ramp + 0.1 s settle + 0.3 s step window.
std::string fast_config() {
  return R"({
    "scenario": {"omega0": 0, "omega_ref": 60, "duration": 0.3, "settle": 0.1},
    "tuner": {"max_iters": 1, "max_line_search": 2, "duration": 0.3, "settle": 0.1},
    "grid": {"omega0": [0], "omega_ref": [40, 80]}
  })";
}

}  // namespace

TEST_CASE("help and argument errors") {
  std::string out;
  CHECK(cli({"--help"}, &out) == 0);
  CHECK(out.find("simulate") != std::string::npos);
  CHECK(cli({}) == 2);
  CHECK(cli({"frobnicate"}) == 2);
}

TEST_CASE("config validation failures exit with code 2 and name the key") {
  TempDir tmp;
  const auto cfg = tmp.path / "config.json";

  SECTION("unknown key") {
    write_file(cfg, R"({"machine": {"Rz": 1.0}})");
    std::string err;
    CHECK(cli({"simulate", "--config", cfg.string()}, nullptr, &err) == 2);
    CHECK(err.find("machine.Rz") != std::string::npos);
  }

  SECTION("unknown top-level key") {
    write_file(cfg, R"({"mashine": {}})");
    std::string err;
    CHECK(cli({"simulate", "--config", cfg.string()}, nullptr, &err) == 2);
    CHECK(err.find("mashine") != std::string::npos);
  }

  SECTION("wrong value type") {
    write_file(cfg, R"({"machine": {"Rs": "very"}})");
    std::string err;
    CHECK(cli({"simulate", "--config", cfg.string()}, nullptr, &err) == 2);
    CHECK(err.find("machine.Rs") != std::string::npos);
  }

  SECTION("invalid parameter value") {
    write_file(cfg, R"({"machine": {"Rs": -2.0}})");
    CHECK(cli({"simulate", "--config", cfg.string()}) == 2);
  }

  SECTION("malformed JSON") {
    write_file(cfg, "{oops");
    CHECK(cli({"simulate", "--config", cfg.string()}) == 2);
  }

  SECTION("missing config file") {
    CHECK(cli({"simulate", "--config", (tmp.path / "nope.json").string()}) == 2);
  }
}

TEST_CASE("simulate writes the documented artifacts deterministically") {
  TempDir tmp;
  const auto cfg = tmp.path / "config.json";
  write_file(cfg, fast_config());
  const auto out1 = tmp.path / "run1";
  const auto out2 = tmp.path / "run2";

  REQUIRE(cli({"simulate", "--config", cfg.string(), "--out", out1.string()}) == 0);
  REQUIRE(cli({"simulate", "--config", cfg.string(), "--out", out2.string()}) == 0);

  REQUIRE(fs::exists(out1 / "trace.csv"));
  REQUIRE(fs::exists(out1 / "indicators.json"));
  CHECK_FALSE(fs::exists(out1 / "trace.csv.tmp"));

  SECTION("row count is total time over Ts, plus the terminal sample") {
    // 0.2 flux + 0.1 settle + 0.3 step window = 0.6 s at 100 us.
    std::ifstream f(out1 / "trace.csv");
    std::string line;
    long rows = 0;
    std::getline(f, line);  // format tag
    std::getline(f, line);  // columns
    while (std::getline(f, line))
      if (!line.empty()) ++rows;
    CHECK(rows == 6001);
  }

  SECTION("identical runs produce identical bytes") {
    CHECK(read_text(out1 / "trace.csv") == read_text(out2 / "trace.csv"));
    CHECK(read_text(out1 / "indicators.json") == read_text(out2 / "indicators.json"));
  }

  SECTION("the command is a thin wrapper over the library calls") {
    const RunConfig rc = load_config_file(cfg);
    const auto records = run_scenario_records(rc, rc.theta0(), rc.scenario);
    CHECK(trace_to_csv(records) == read_text(out1 / "trace.csv"));
    const Trace trace = trace_from_records(records, rc.machine.Ts);
    const auto j = indicators_to_json(compute_all(trace));
    CHECK(j.dump(2) + "\n" == read_text(out1 / "indicators.json"));
  }

  SECTION("indicators parse and carry the six keys") {
    const auto j = nlohmann::json::parse(read_text(out1 / "indicators.json"));
    for (const char* key : {"PO", "Tr", "ITAE", "Rt", "Exy", "ASF"})
      CHECK(j.contains(key));
  }
}

TEST_CASE("tune writes a result with a non-increasing history") {
  TempDir tmp;
  const auto cfg = tmp.path / "config.json";
  write_file(cfg, fast_config());

  REQUIRE(cli({"tune", "--config", cfg.string(), "--out", tmp.path.string(),
               "--omega0", "0", "--omega-ref", "60"}) == 0);
  const auto j = nlohmann::json::parse(read_text(tmp.path / "tune_result.json"));
  REQUIRE(j.contains("history"));
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& h : j["history"]) {
    const double xi = h["xi_p"].get<double>();
    CHECK(xi <= prev);
    prev = xi;
  }
  const RunConfig rc = load_config_file(cfg);
  const auto& theta = j["theta_star"];
  CHECK(theta["kp"].get<double>() >= rc.bounds.kp_min);
  CHECK(theta["kp"].get<double>() <= rc.bounds.kp_max);
  CHECK(theta["lambda_sc"].get<double>() >= rc.bounds.lsc_min);
  CHECK(theta["lambda_sc"].get<double>() <= rc.bounds.lsc_max);
  CHECK(j.contains("feasible"));
}

TEST_CASE("dataset sweep artifacts") {
  TempDir tmp;
  const auto cfg = tmp.path / "config.json";
  write_file(cfg, fast_config());

  REQUIRE(cli({"dataset", "--config", cfg.string(), "--out", tmp.path.string()}) == 0);
  REQUIRE(fs::exists(tmp.path / "dataset.csv"));
  REQUIRE(fs::exists(tmp.path / "dataset_summary.json"));

  const auto records = read_dataset_csv(tmp.path / "dataset.csv");
  CHECK(records.size() == 2);  // grid 1x2
  const auto j = nlohmann::json::parse(read_text(tmp.path / "dataset_summary.json"));
  CHECK(j["attempted"].get<int>() == 2);
  CHECK(j["succeeded"].get<int>() == 2);
  CHECK(j["total_evals"].get<long>() > 0);
}

TEST_CASE("train refuses an undersized dataset with exit code 4") {
  TempDir tmp;
  std::vector<DatasetRecord> tiny(4);
  for (std::size_t i = 0; i < tiny.size(); ++i) {
    tiny[i].omega0 = 10.0 * i;
    tiny[i].omega_ref = 20.0 + 10.0 * i;
    tiny[i].theta = ControllerParams{};
    tiny[i].pi = IndicatorVector{};
  }
  write_dataset_csv(tmp.path / "dataset.csv", tiny);
  std::string err;
  CHECK(cli({"train", "--dataset", (tmp.path / "dataset.csv").string(), "--out",
             tmp.path.string()},
            nullptr, &err) == 4);
  CHECK(err.find("dataset") != std::string::npos);
}

TEST_CASE("train and evaluate round trip, including the compatibility gate") {
  TempDir tmp;
  const auto cfg_path = tmp.path / "config.json";
  write_file(cfg_path, R"({
    "scenario": {"omega0": 0, "omega_ref": 60, "duration": 0.3, "settle": 0.1},
    "tuner": {"duration": 0.25, "settle": 0.1},
    "train": {"hidden_sizes": [2], "max_epochs": 300, "patience": 100},
    "grid": {"omega0": [0], "omega_ref": [40, 80]},
    "evaluate": {"plot_traces": 1}
  })");

  // Hand-made dataset, no tuning needed for this test.
  std::vector<DatasetRecord> records(12);
  for (std::size_t i = 0; i < records.size(); ++i) {
    DatasetRecord& r = records[i];
    r.omega0 = (i % 4) * 30.0;
    r.omega_ref = 20.0 + (i % 3) * 40.0;
    r.theta.kp = 0.3 + 0.01 * i;
    r.theta.ki = 3.0 + 0.1 * i;
    r.theta.lambda_xy = 0.1;
    r.theta.lambda_sc = 0.02;
    r.pi = IndicatorVector{1.0, 0.2, 10.0, 0.3, 0.3, 800.0, true};
  }
  write_dataset_csv(tmp.path / "dataset.csv", records);

  REQUIRE(cli({"train", "--config", cfg_path.string(), "--dataset",
               (tmp.path / "dataset.csv").string(), "--out", tmp.path.string()}) == 0);
  REQUIRE(fs::exists(tmp.path / "model.txt"));
  REQUIRE(fs::exists(tmp.path / "train_report.json"));

  SECTION("evaluate runs against the training grid") {
    REQUIRE(cli({"evaluate", "--config", cfg_path.string(), "--model",
                 (tmp.path / "model.txt").string(), "--dataset",
                 (tmp.path / "dataset.csv").string(), "--out",
                 tmp.path.string()}) == 0);
    const auto j = nlohmann::json::parse(read_text(tmp.path / "evaluate_report.json"));
    CHECK(j["n_points"].get<int>() == 2);
    REQUIRE(j["points"].is_array());
    for (const auto& row : j["points"]) {
      CHECK(row.contains("fixed"));
      CHECK(row.contains("ann"));  // one network column per scenario row
      CHECK(row.contains("xi_fixed"));
      CHECK(row.contains("xi_ann"));
    }
    CHECK(fs::exists(tmp.path / "eval_trace_0_fixed.csv"));
    CHECK(fs::exists(tmp.path / "eval_trace_0_ann.csv"));
  }

  SECTION("bounds mismatch exits with code 5") {
    const auto cfg2 = tmp.path / "config2.json";
    write_file(cfg2, R"({
      "scenario": {"omega0": 0, "omega_ref": 60, "duration": 0.3, "settle": 0.1},
      "tuner": {"bounds": {"kp": [0.01, 5.0]}},
      "grid": {"omega0": [0], "omega_ref": [40, 80]}
    })");
    std::string err;
    CHECK(cli({"evaluate", "--config", cfg2.string(), "--model",
               (tmp.path / "model.txt").string(), "--out", tmp.path.string()},
              nullptr, &err) == 5);
    CHECK(err.find("bounds") != std::string::npos);
  }

  SECTION("corrupt model file exits with code 4") {
    write_file(tmp.path / "bad_model.txt", "pentadrive-mlp v1\nhidden 2\n");
    CHECK(cli({"evaluate", "--config", cfg_path.string(), "--model",
               (tmp.path / "bad_model.txt").string(), "--out",
               tmp.path.string()}) == 4);
  }
}

TEST_CASE("atomic text writes leave no temporary behind") {
  TempDir tmp;
  const auto p = tmp.path / "nested" / "file.txt";
  atomic_write_text(p, "payload");
  CHECK(read_text(p) == "payload");
  CHECK_FALSE(fs::exists(p.string() + ".tmp"));
}

TEST_CASE("defaults produce a valid configuration") {
  RunConfig cfg;
  REQUIRE_NOTHROW(cfg.validate());
  const ControllerParams theta = cfg.theta0();
  CHECK(theta.kp > 0.0);
  CHECK(theta.ki > 0.0);
  CHECK(make_grid(cfg.grid.omega0s, cfg.grid.omega_refs).size() == 20);
}
