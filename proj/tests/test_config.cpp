#include <doctest.h>

#include <sstream>

#include "dlearn/config.hpp"
#include "dlearn/io.hpp"

using namespace dlearn;

namespace {

Config parse(const std::string& text) {
  std::istringstream in(text);
  return Config::parse(in, "test.toml");
}

std::string parse_error(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("config reads sections, arrays, booleans and comments") {
  Config cfg = parse(
      "# header\n"
      "task = \"average\"   # trailing\n"
      "c = 1.5e0\n"
      "[graph]\n"
      "kind = \"rgg\"\n"
      "n = 12\n"
      "[sweep]\n"
      "values = [0.1, 1, 10]\n"
      "on = true\n");
  CHECK(cfg.text("task") == "average");
  CHECK(cfg.number("c") == 1.5);
  CHECK(cfg.text("graph.kind") == "rgg");
  CHECK(cfg.count("graph.n") == 12);
  CHECK(cfg.numbers("sweep.values") == std::vector<double>{0.1, 1, 10});
  CHECK(cfg.flag_or("sweep.on", false));
  CHECK(cfg.number_or("missing", 7.0) == 7.0);
  CHECK(cfg.keys().size() == 6);
}

TEST_CASE("config errors name the line") {
  CHECK(parse_error("task = \"a\"\nc = \n") == "test.toml:2: missing value for key 'c'");
  CHECK(parse_error("a = 1\n\nb = oops\n").find("test.toml:3:") == 0);
  CHECK(parse_error("[graph\n").find("test.toml:1: unterminated section") == 0);
  CHECK(parse_error("x = 1\nx = 2\n").find("test.toml:2: duplicate key 'x'") == 0);
  CHECK(parse_error("v = [1, a]\n").find("test.toml:1: array element 'a'") == 0);
  CHECK(parse_error("s = \"open\n").find("test.toml:1: unterminated string") == 0);
  CHECK(parse_error("just words\n").find("test.toml:1: expected key = value") == 0);
}

TEST_CASE("config parsing is all or nothing") {
  // a bad last line means no partially filled config escapes
  CHECK_THROWS_AS(parse("task = \"average\"\nc = 1\nbad line\n"), ConfigError);
}

TEST_CASE("config accessors report missing keys and wrong kinds") {
  Config cfg = parse("c = 1\nname = \"x\"\nk = 2.5\n");
  try {
    cfg.text("task");
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()) == "test.toml: missing required key 'task'");
  }
  CHECK_THROWS_AS(cfg.text("c"), ConfigError);
  CHECK_THROWS_AS(cfg.number("name"), ConfigError);
  CHECK_THROWS_AS(cfg.count("k"), ConfigError);
  CHECK_THROWS_AS(cfg.flag_or("c", false), ConfigError);
}

TEST_CASE("config overrides parse like the file and accept bare words") {
  Config cfg = parse("c = 1\n");
  cfg.set("c", "2.5");
  cfg.set("graph.kind", "ring");
  cfg.set("name", "\"quoted\"");
  CHECK(cfg.number("c") == 2.5);
  CHECK(cfg.text("graph.kind") == "ring");
  CHECK(cfg.text("name") == "quoted");
  CHECK_THROWS_AS(cfg.set("bad key", "1"), ConfigError);
}

TEST_CASE("doubles survive a text round trip") {
  for (double x : {0.0, -0.0, 1.0 / 3.0, 1e-300, 6.02214076e23, -2.5}) {
    CHECK(parse_double(format_double(x)) == x);
  }
  CHECK(std::isnan(parse_double(format_double(std::nan("")))));
  CHECK(parse_double(format_double(-HUGE_VAL)) == -HUGE_VAL);
  CHECK_THROWS_AS(parse_double("1.0x"), DataError);
  CHECK_THROWS_AS(parse_double(""), DataError);
}

TEST_CASE("trace CSV round trip is exact") {
  std::vector<TraceRecord> recs{{0, 1.0 / 3.0, 2.0, std::nan("")}, {1, 1e-17, -4.25, 0.1}};
  std::stringstream ss;
  write_trace_csv(ss, recs);
  CHECK(ss.str().rfind("iter,consensus_err,objective,dist_to_ref\n", 0) == 0);
  auto back = read_trace_csv(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[0].consensus_error == recs[0].consensus_error);
  CHECK(std::isnan(back[0].distance_to_reference));
  CHECK(back[1].iteration == 1);
  CHECK(back[1].objective == -4.25);

  std::istringstream bad("iter,consensus_err,objective,dist_to_ref\n0,1,2\n");
  CHECK_THROWS_AS(read_trace_csv(bad), DataError);
  std::istringstream wrong_header("k,a,b,c\n");
  CHECK_THROWS_AS(read_trace_csv(wrong_header), DataError);
}

TEST_CASE("snapshot CSV round trip is exact") {
  std::vector<Snapshot> snaps(2);
  for (auto& s : snaps) {
    s.estimates = Matrix::Random(2, 3);
    s.edge_multipliers = Matrix::Random(2, 4);
  }
  std::stringstream ss;
  write_snapshots_csv(ss, snaps);
  auto back = read_snapshots_csv(ss);
  REQUIRE(back.size() == 2);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(back[k].estimates == snaps[k].estimates);
    CHECK(back[k].edge_multipliers == snaps[k].edge_multipliers);
  }
}

TEST_CASE("node data CSV round trip") {
  NodeData d;
  d.features = {Matrix::Random(2, 3), Matrix::Random(2, 1)};
  d.labels = {{1, -1, 1}, {-1}};
  std::stringstream ss;
  write_data_csv(ss, d);
  NodeData back = read_data_csv(ss, 2, true);
  CHECK(back.features[0] == d.features[0]);
  CHECK(back.features[1] == d.features[1]);
  CHECK(back.labels == d.labels);

  std::istringstream out_of_range("3,0.5,1\n");
  CHECK_THROWS_AS(read_data_csv(out_of_range, 2, true), DataError);
  std::istringstream ragged("0,1,2\n1,1\n");
  CHECK_THROWS_AS(read_data_csv(ragged, 2, false), DataError);
}

TEST_CASE("matrix CSV round trip and ragged rows") {
  Matrix m = Matrix::Random(3, 4);
  std::stringstream ss;
  write_matrix_csv(ss, m);
  CHECK(read_matrix_csv(ss) == m);
  std::istringstream ragged("1,2\n3\n");
  CHECK_THROWS_AS(read_matrix_csv(ragged), DataError);
}

TEST_CASE("instance assembly checks link counts against the router graph") {
  NetworkGraph g = ring_graph(3);  // 6 directed pairs
  CHECK_THROWS_AS(assemble_instance(Matrix::Zero(5, 2), Matrix::Ones(5, 2), Matrix::Zero(5, 6), g), DataError);
  auto inst = assemble_instance(Matrix::Zero(6, 2), Matrix::Ones(6, 2), Matrix::Zero(6, 6), g);
  CHECK(inst.link_owner == std::vector<std::size_t>{0, 0, 1, 1, 2, 2});
}
