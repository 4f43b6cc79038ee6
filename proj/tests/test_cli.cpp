#include <sstream>

#include <json.hpp>

#include "doctest.h"
#include "popproj/commands.hpp"
#include "popproj/config.hpp"
#include "popproj/csv.hpp"
#include "popproj/inputs.hpp"
#include "popproj/trajectory.hpp"
#include "test_util.hpp"

using namespace popproj;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "popproj");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

// Fixture config with absolute paths, edited by `edit`, written to dir.
template <typename F>
fs::path write_config(const fs::path& dir, F&& edit) {
  auto c = cfg::load(testutil::fixtures() / "two" / "config.json");
  cfg::resolve_paths(c, testutil::fixtures() / "two");
  edit(c);
  const auto path = dir / "config.json";
  testutil::write_file(path, cfg::serialize(c));
  return path;
}

// Estimates e0 and Phase II chains once for all projection tests.
const fs::path& estimated() {
  static const fs::path dir = [] {
    const auto d = testutil::scratch("cli-chains");
    for (const char* model : {"e0", "tfr-phase2"}) {
      const auto cfg_path =
          write_config(d, [&](cfg::RunConfig& c) { c.model = model; });
      const auto r = run({"estimate", "--config", cfg_path.string(), "--out-dir",
                          (d / model).string()});
      REQUIRE_MESSAGE(r.code != 1, r.err);
    }
    return d;
  }();
  return dir;
}

fs::path project_config(const fs::path& dir, int horizon = 4, const std::string& mode = "sample",
                        std::size_t n = 40) {
  return write_config(dir, [&](cfg::RunConfig& c) {
    c.files.e0_chains = (estimated() / "e0").string();
    c.files.phase2_chains = (estimated() / "tfr-phase2").string();
    c.simulation.horizon = horizon;
    c.simulation.mode = mode;
    c.simulation.n_trajectories = n;
  });
}

}  // namespace

TEST_CASE("MLE estimate exits cleanly and reports rho and sigma") {
  const auto d = testutil::scratch("cli-mle");
  const auto cfg_path = write_config(d, [](cfg::RunConfig& c) { c.model = "tfr-phase3-fixed"; });
  const auto r = run({"estimate", "--config", cfg_path.string(), "--out-dir", (d / "out").string()});
  CHECK_MESSAGE(r.code == 0, r.err);
  const auto report = json::parse(testutil::read_file(d / "out" / "mle_report.json"));
  CHECK(report.at("transitions") == 2);
  CHECK(report.at("rho").get<double>() > 0.0);
  CHECK(report.at("rho").get<double>() < 1.0);
  CHECK(report.at("sigma").get<double>() > 0.0);
  const auto manifest = json::parse(testutil::read_file(d / "out" / "manifest.json"));
  CHECK(manifest.at("command") == "estimate");
}

TEST_CASE("invalid config field exits 1 and names the field") {
  const auto d = testutil::scratch("cli-bad");
  testutil::write_file(d / "config.json", R"({"simulation": {"horizn": 3}})");
  const auto r = run({"project", "--config", (d / "config.json").string(), "--out-dir",
                      (d / "out").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("simulation.horizn") != std::string::npos);
  CHECK(run({"nonsense"}).code == 1);
}

TEST_CASE("single chain diagnosis completes with warnings") {
  const auto d = testutil::scratch("cli-diag");
  const auto one = d / "one";
  fs::create_directories(one);
  fs::copy_file(estimated() / "e0" / "chain_1.csv", one / "chain_1.csv");
  fs::copy_file(estimated() / "e0" / "chain_1.meta.json", one / "chain_1.meta.json");
  const auto r = run({"diagnose", "--chains", one.string(), "--out-dir", (d / "out").string()});
  CHECK(r.code == 2);
  CHECK(fs::exists(d / "out" / "diagnostics.txt"));
}

TEST_CASE("same seed gives identical chain files") {
  const auto d = testutil::scratch("cli-seed");
  const auto cfg_path = write_config(d, [](cfg::RunConfig& c) {
    c.model = "e0";
    c.mcmc.iterations = 200;
    c.mcmc.burn_in = 100;
  });
  for (const char* out : {"a", "b"}) {
    run({"estimate", "--config", cfg_path.string(), "--seed", "5", "--out-dir",
         (d / out).string()});
  }
  run({"estimate", "--config", cfg_path.string(), "--seed", "6", "--out-dir", (d / "c").string()});
  const auto a = testutil::read_file(d / "a" / "chain_1.csv");
  CHECK(!a.empty());
  CHECK(a == testutil::read_file(d / "b" / "chain_1.csv"));
  CHECK(a != testutil::read_file(d / "c" / "chain_1.csv"));
}

TEST_CASE("end-to-end projection writes nested quantiles") {
  const auto d = testutil::scratch("cli-project");
  const auto r = run({"project", "--config", project_config(d).string(), "--out-dir",
                      (d / "out").string()});
  REQUIRE_MESSAGE(r.code == 0, std::string(r.err + r.out));
  for (const char* id : {"lowland", "upland"}) {
    std::ifstream q(d / "out" / id / "quantiles.csv");
    const auto tables = traj::read_quantiles(q);
    CHECK(tables.size() == 6);
    for (const auto& t : tables) {
      for (const auto& row : t.values) {
        for (std::size_t j = 1; j < row.size(); ++j) CHECK(row[j - 1] <= row[j]);
      }
    }
    std::ifstream tr(d / "out" / id / "trajectories.csv");
    const auto sets = traj::read_trajectories(tr);
    CHECK(sets.front().trajectories() == 40);
    const auto prov = csv::read(d / "out" / id / "provenance.csv");
    CHECK(prov.rows.size() == 40);
  }
  const auto manifest = json::parse(testutil::read_file(d / "out" / "manifest.json"));
  CHECK(manifest.at("chains").size() == 4);
  CHECK(manifest.at("seed") == 7);
}

TEST_CASE("identical config and seed give byte-identical outputs") {
  const auto d = testutil::scratch("cli-repeat");
  const auto path = project_config(d);
  for (const char* out : {"a", "b"}) {
    REQUIRE(run({"project", "--config", path.string(), "--out-dir", (d / out).string()}).code == 0);
  }
  for (const char* file : {"trajectories.csv", "quantiles.csv", "provenance.csv"}) {
    CHECK(testutil::read_file(d / "a" / "upland" / file) ==
          testutil::read_file(d / "b" / "upland" / file));
  }
  CHECK(testutil::read_file(d / "a" / "manifest.json") ==
        testutil::read_file(d / "b" / "manifest.json"));
}

TEST_CASE("manifest hash changes when the config does") {
  const auto d = testutil::scratch("cli-hash");
  auto hash = [&](const fs::path& cfg_path, const char* out) {
    REQUIRE(run({"project", "--config", cfg_path.string(), "--out-dir", (d / out).string()}).code ==
            0);
    return json::parse(testutil::read_file(d / out / "manifest.json")).at("config_hash");
  };
  const auto h4 = hash(project_config(d, 4), "h4");
  const auto h4b = hash(project_config(d, 4), "h4b");
  const auto h3 = hash(project_config(d, 3), "h3");
  CHECK(h4 == h4b);
  CHECK(h4 != h3);
}

TEST_CASE("median mode equals the deterministic projection of its inputs") {
  const auto d = testutil::scratch("cli-median");
  const auto r = run({"project", "--config", project_config(d, 4, "median").string(), "--out-dir",
                      (d / "out").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  std::ifstream tr(d / "out" / "upland" / "trajectories.csv");
  std::map<std::string, traj::TrajectorySet> sets;
  for (auto& s : traj::read_trajectories(tr)) sets.emplace(s.indicator, s);
  REQUIRE(sets.at("tfr").trajectories() == 1);

  auto c = cfg::load(d / "config.json");
  const auto inputs = io::parse_inputs(c.files);
  const auto& pop = inputs.population.at("upland");
  traj::ProjectionInputs in{pop.pyramid,
                            pop.base_year,
                            sets.at("tfr").values,
                            sets.at("e0_female").values,
                            sets.at("e0_male").values,
                            {},
                            inputs.patterns.at("upland"),
                            std::nullopt,
                            0,
                            *inputs.standard_female,
                            *inputs.standard_male,
                            c.simulation.sex_ratio_at_birth};
  for (const auto& m : inputs.migration.at("upland").periods) in.migration.push_back(m);
  const auto direct = traj::project_paths(in, in.tfr[0], in.e0_female[0], in.e0_male[0]);
  const auto& total = sets.at("total_population").values[0];
  for (std::size_t t = 0; t < total.size(); ++t) {
    CHECK(total[t] == doctest::Approx(total_population(direct.pyramids[t])).epsilon(1e-15));
  }
}

TEST_CASE("chains from another model are refused") {
  const auto d = testutil::scratch("cli-mismatch");
  const auto path = write_config(d, [](cfg::RunConfig& c) {
    c.files.e0_chains = (estimated() / "tfr-phase2").string();
    c.files.phase2_chains = (estimated() / "tfr-phase2").string();
  });
  const auto r = run({"project", "--config", path.string(), "--out-dir", (d / "out").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("expected 'e0'") != std::string::npos);

  const auto changed = write_config(d, [](cfg::RunConfig& c) {
    c.files.e0_chains = (estimated() / "e0").string();
    c.files.phase2_chains = (estimated() / "tfr-phase2").string();
    c.e0.model.shape.a1 = 4.0;
  });
  const auto r2 = run({"project", "--config", changed.string(), "--out-dir", (d / "out").string()});
  CHECK(r2.code == 1);
  CHECK(r2.err.find("model hash") != std::string::npos);
}

TEST_CASE("holdout year after the data is an error") {
  const auto d = testutil::scratch("cli-holdout");
  const auto path = write_config(d, [](cfg::RunConfig& c) {
    c.model = "tfr-phase3-fixed";
    c.validate.holdout_year = 2050;
  });
  const auto r = run({"validate", "--config", path.string(), "--out-dir", (d / "out").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("after the last observation") != std::string::npos);
}

TEST_CASE("holdout validation reports per-country coverage") {
  const auto d = testutil::scratch("cli-holdout-ok");
  const auto path = write_config(d, [](cfg::RunConfig& c) {
    c.model = "e0";
    c.validate.holdout_year = 1990;
  });
  const auto r = run({"validate", "--config", path.string(), "--out-dir", (d / "out").string()});
  CHECK_MESSAGE(r.code != 1, r.err);
  const auto table = csv::read(d / "out" / "calibration.csv");
  CHECK(table.rows.size() == 3);
  CHECK(table.text(2, table.column("country")) == "all");
}
