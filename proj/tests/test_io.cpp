#include <sstream>

#include "doctest.h"
#include "popproj/config.hpp"
#include "popproj/csv.hpp"
#include "popproj/inputs.hpp"
#include "test_util.hpp"

using namespace popproj;
namespace fs = std::filesystem;

namespace {

cfg::FileConfig two_country_files() {
  const auto dir = testutil::fixtures() / "two";
  cfg::FileConfig f;
  f.tfr = (dir / "tfr.csv").string();
  f.e0 = (dir / "e0.csv").string();
  f.population = (dir / "population.csv").string();
  f.migration = (dir / "migration.csv").string();
  f.fertility_pattern = (dir / "fertility_pattern.csv").string();
  f.life_table = (testutil::data() / "standard_life_table.csv").string();
  return f;
}

}  // namespace

TEST_CASE("csv lines with quotes and whitespace") {
  CHECK(csv::split_line(" a , \"b,c\" ,d") == std::vector<std::string>{"a", "b,c", "d"});
  CHECK(csv::split_line("\"say \"\"hi\"\"\",2") == std::vector<std::string>{"say \"hi\"", "2"});
  CHECK(csv::escape("x,y") == "\"x,y\"");
  const auto t = csv::parse("a,b\n\n1,2\n3,x\n", "mem");
  CHECK(t.rows.size() == 2);
  CHECK(t.number(0, 1) == 2.0);
  try {
    t.number(1, 1);
    FAIL("expected a parse error");
  } catch (const csv::ParseError& e) {
    CHECK(e.row() == 4);
    CHECK(e.column() == "b");
  }
  CHECK_THROWS_AS(t.column("c"), csv::ParseError);
}

TEST_CASE("two-country fixture parses cleanly") {
  const auto in = io::parse_inputs(two_country_files());
  CHECK(in.warnings.empty());
  CHECK(in.tfr.size() == 2);
  CHECK(in.e0.size() == 2);
  CHECK(in.population.size() == 2);
  CHECK(in.population.at("lowland").base_year == 2010);
  CHECK(in.population.at("lowland").pyramid.num_groups() == 21);
  CHECK(in.migration.at("upland").periods.size() == 4);
  CHECK(in.patterns.at("upland").proportions.size() == 7);
  REQUIRE(in.standard_female);
  CHECK(in.standard_female->lx.front() == 1.0);
}

TEST_CASE("duplicate key names the row") {
  const auto dir = testutil::scratch("dup");
  testutil::write_file(dir / "tfr.csv",
                       "country_id,period_start,tfr\na,1990,2.0\na,1995,1.9\na,1990,2.1\n");
  try {
    io::read_tfr(dir / "tfr.csv");
    FAIL("expected a parse error");
  } catch (const csv::ParseError& e) {
    CHECK(e.row() == 4);
    CHECK(e.column() == "period_start");
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }
}

TEST_CASE("off-grid period is an alignment error") {
  const auto dir = testutil::scratch("grid");
  testutil::write_file(dir / "tfr.csv", "country_id,period_start,tfr\na,1990,2.0\na,1998,1.9\n");
  try {
    io::read_tfr(dir / "tfr.csv");
    FAIL("expected a parse error");
  } catch (const csv::ParseError& e) {
    CHECK(e.row() == 3);
    CHECK(std::string(e.what()).find("1998") != std::string::npos);
  }
}

TEST_CASE("input tables reject broken rows") {
  const auto dir = testutil::scratch("broken");
  testutil::write_file(dir / "gap.csv", "country_id,period_start,tfr\na,1990,2.0\na,2000,1.9\n");
  CHECK_THROWS_AS(io::read_tfr(dir / "gap.csv"), csv::ParseError);
  testutil::write_file(dir / "nocol.csv", "country_id,period,tfr\na,1990,2.0\n");
  CHECK_THROWS_AS(io::read_tfr(dir / "nocol.csv"), csv::ParseError);
  testutil::write_file(dir / "text.csv", "country_id,period_start,tfr\na,1990,two\n");
  CHECK_THROWS_AS(io::read_tfr(dir / "text.csv"), csv::ParseError);
  testutil::write_file(dir / "e0.csv", "country_id,period_start,sex,e0\na,1990,female,70\n");
  CHECK_THROWS_AS(io::read_e0(dir / "e0.csv"), csv::ParseError);
  testutil::write_file(dir / "pat.csv",
                       "country_id,age_group_start,proportion\na,15,0.5\na,20,0.4\n");
  CHECK_THROWS_AS(io::read_fertility_patterns(dir / "pat.csv"), csv::ParseError);
}

TEST_CASE("missing table for a population country is reported") {
  auto files = two_country_files();
  const auto dir = testutil::scratch("missing");
  testutil::write_file(dir / "tfr.csv", "country_id,period_start,tfr\nlowland,2000,1.6\n"
                                        "lowland,2005,1.7\n");
  files.tfr = (dir / "tfr.csv").string();
  CHECK_THROWS_AS(io::parse_inputs(files), InvalidInput);
}

TEST_CASE("series files re-parse to the same values") {
  const auto in = io::parse_inputs(two_country_files());
  const auto dir = testutil::scratch("roundtrip");
  {
    std::ofstream out(dir / "tfr.csv");
    io::write_tfr(out, in.tfr);
    std::ofstream e0(dir / "e0.csv");
    io::write_e0(e0, in.e0);
  }
  const auto tfr = io::read_tfr(dir / "tfr.csv");
  const auto e0 = io::read_e0(dir / "e0.csv");
  REQUIRE(tfr.size() == in.tfr.size());
  for (std::size_t i = 0; i < tfr.size(); ++i) {
    CHECK(tfr[i].values == in.tfr[i].values);
    CHECK(tfr[i].period_start_years == in.tfr[i].period_start_years);
    CHECK(e0[i].female == in.e0[i].female);
    CHECK(e0[i].male == in.e0[i].male);
  }
}

TEST_CASE("config round-trips and hashes follow content") {
  cfg::RunConfig c;
  c.model = "tfr-phase3-hier";
  c.mcmc.thin = 7;
  c.simulation.seed = 123456789012345ULL;
  c.tfr.phase2.convention = tfr::MidpointConvention::kCumulative;
  c.e0.gap_beta = std::array<double, 5>{0.1, 0.2, 0.3, 0.4, 0.5};
  c.files.tfr = "some/where.csv";
  const auto text = cfg::serialize(c);
  CHECK(cfg::parse(text) == c);
  CHECK(cfg::serialize(cfg::parse(text)) == text);
  CHECK(cfg::parse(cfg::serialize(cfg::RunConfig{})) == cfg::RunConfig{});

  auto d = c;
  CHECK(cfg::config_hash(d) == cfg::config_hash(c));
  d.simulation.horizon += 1;
  CHECK(cfg::config_hash(d) != cfg::config_hash(c));
  // the projection horizon does not change what the chains mean
  CHECK(cfg::model_hash(d, d.model) == cfg::model_hash(c, c.model));
  d.mcmc.iterations += 1;
  CHECK(cfg::model_hash(d, d.model) != cfg::model_hash(c, c.model));
  CHECK(cfg::fnv1a_hex("") == "cbf29ce484222325");
  CHECK(cfg::fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("config errors name the field") {
  try {
    cfg::parse(R"({"mcmc": {"thinning": 3}})");
    FAIL("expected a config error");
  } catch (const cfg::ConfigError& e) {
    CHECK(e.path() == "mcmc.thinning");
    CHECK(std::string(e.what()).find("mcmc.thinning") != std::string::npos);
  }
  try {
    cfg::parse(R"({"mcmc": {"thin": 0}})");
    FAIL("expected a config error");
  } catch (const cfg::ConfigError& e) {
    CHECK(e.path() == "mcmc.thin");
  }
  try {
    cfg::parse(R"({"simulation": {"horizon": "long"}})");
    FAIL("expected a config error");
  } catch (const cfg::ConfigError& e) {
    CHECK(e.path() == "simulation.horizon");
  }
  CHECK_THROWS_AS(cfg::parse(R"({"model": "arima"})"), cfg::ConfigError);
  CHECK_THROWS_AS(cfg::parse("{"), cfg::ConfigError);
}

TEST_CASE("relative paths resolve against the config directory") {
  auto c = cfg::load(testutil::fixtures() / "two" / "config.json");
  cfg::resolve_paths(c, testutil::fixtures() / "two");
  CHECK(fs::exists(c.files.tfr));
  CHECK(fs::exists(c.files.life_table));
  CHECK_NOTHROW(cfg::require_files(c, {"tfr", "e0", "population", "life_table"}));
  CHECK_THROWS_AS(cfg::require_files(c, {"phase2_chains"}), cfg::ConfigError);
}
