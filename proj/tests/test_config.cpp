#include "ersc/config.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace ersc;
using nlohmann::json;

TEST_SUITE("config") {

TEST_CASE("FNV-1a reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("empty object gives the defaults") {
  const auto c = parse_config(json::object());
  CHECK(c.model.name == "ou_lq");
  CHECK(c.grid.counts == std::vector<int>{241});
  CHECK(c.solver.scheme == DriftScheme::hybrid);
  CHECK(c.perturb.C3 == 0.5);
  CHECK(c.simulation.sim.x0.size() == 1);
  CHECK(c.simulation.sim.n_paths == 10000);
  CHECK(c.digest().size() == 16);
  const auto m = build_model(c.model);
  CHECK(m.dim == 1);
  CHECK(build_grid(c.grid).size() == 241);
}

TEST_CASE("canonical dump round-trips to the same digest") {
  json j = {{"model", {{"name", "ou_lq"}, {"c", 1.5}, {"u_max", 2.0}, {"n_controls", 11}}},
            {"grid", {{"radii", {5.0}}, {"counts", {101}}}},
            {"simulation", {{"n_paths", 64}, {"seed", 3}}}};
  const auto a = parse_config(j);
  const auto b = parse_config(a.to_json());
  CHECK(a.digest() == b.digest());
  CHECK(a.to_json() == b.to_json());
  CHECK(a.digest() != parse_config(json::object()).digest());
  CHECK(b.model.ou.n_controls == 11);

  const auto w = parse_config({{"model", {{"name", "w_network"}}}});
  CHECK(parse_config(w.to_json()).digest() == w.digest());
  CHECK(build_model(w.model).dim == 3);
  CHECK(w.simulation.sim.x0.size() == 3);
}

TEST_CASE("unknown keys and bad values are rejected") {
  CHECK_THROWS_WITH_AS(parse_config({{"gird", json::object()}}), doctest::Contains("gird"), ValidationError);
  CHECK_THROWS_AS(parse_config({{"model", {{"nmae", "x"}}}}), ValidationError);
  CHECK_THROWS_AS(parse_config({{"model", {{"name", "nope"}}}}), ValidationError);
  CHECK_THROWS_AS(parse_config({{"solver", {{"tol", -1.0}}}}), ValidationError);
  CHECK_THROWS_AS(parse_config({{"solver", {{"scheme", "central"}}}}), ValidationError);
  CHECK_THROWS_AS(parse_config({{"solver", {{"tol", "small"}}}}), ValidationError);
  CHECK_THROWS_AS(parse_config({{"perturb", {{"C3", 1.0}}}}), ValidationError);
  CHECK_THROWS_AS(parse_config({{"sweep", {{"kappa", {0.0}}}}}), ValidationError);
  CHECK_THROWS_AS(parse_config({{"sweep", {{"l", {2.0, 1.0}}}}}), ValidationError);
  CHECK_THROWS_AS(parse_config({{"grid", {{"radii", {1.0, 1.0}}, {"counts", {5}}}}}), ValidationError);
  CHECK_THROWS_AS(parse_config({{"rep_check", {{"R", 2.0}, {"points", {{1.0}}}}}}), ValidationError);
  CHECK_THROWS_AS(parse_config({{"output", {{"formats", {"xml"}}}}}), ValidationError);
  CHECK_THROWS_AS(parse_config(json::array()), ValidationError);
}

TEST_CASE("loading from disk") {
  const auto dir = std::filesystem::temp_directory_path() / "ersc_config_test";
  std::filesystem::create_directories(dir);
  CHECK_THROWS_AS(load_config(dir / "missing.json"), IoError);
  {
    std::ofstream(dir / "bad.json") << "{ \"grid\": ";
  }
  CHECK_THROWS_AS(load_config(dir / "bad.json"), ValidationError);
  {
    std::ofstream(dir / "ok.json") << R"({"grid": {"radii": [4.0], "counts": [81]}})";
  }
  CHECK(load_config(dir / "ok.json").grid.counts == std::vector<int>{81});
  std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
