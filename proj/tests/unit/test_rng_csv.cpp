#include <doctest.h>

#include <cmath>
#include <fstream>

#include "helpers.hpp"
#include "tabfuse/csv.hpp"
#include "tabfuse/errors.hpp"
#include "tabfuse/rng.hpp"

using namespace tabfuse;

TEST_CASE("substreams are deterministic and independent by name") {
  auto a1 = substream(42, "init");
  auto a2 = substream(42, "init");
  CHECK(a1() == a2());
  CHECK(a1() == a2());

  auto b = substream(42, "dropout");
  auto a3 = substream(42, "init");
  // Consuming the dropout stream must not disturb the init stream.
  (void)b();
  CHECK(a3() == substream(42, "init")());

  CHECK(substream(42, "init")() != substream(43, "init")());
  CHECK(substream(42, "init")() != substream(42, "shuffle")());
  CHECK(substream(42, "fold", 0)() != substream(42, "fold", 1)());
}

TEST_CASE("csv round trip and ragged-row rejection") {
  testutil::TempDir tmp("csv");
  const std::string path = tmp.str("t.csv");
  write_csv(path, {"a", "b"}, {{"1", "x"}, {"2", ""}});
  CsvTable t = read_csv(path);
  CHECK(t.header == std::vector<std::string>{"a", "b"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[1][1] == "");
  CHECK(t.column("b") == 1);
  CHECK(t.column("z") == -1);

  std::ofstream bad(tmp.str("bad.csv"));
  bad << "a,b\n1\n";
  bad.close();
  CHECK_THROWS_AS(read_csv(tmp.str("bad.csv")), DataError);
  CHECK_THROWS_AS(read_csv(tmp.str("absent.csv")), DataError);
}

TEST_CASE("format_double round-trips exactly") {
  for (double v : {0.1, -1.0 / 3.0, 1e-17, 123456789.123456789, 0.0, -2.5e300}) {
    double back = 0.0;
    REQUIRE(parse_double(format_double(v), back));
    CHECK(back == v);
  }
  double out = 0.0;
  CHECK_FALSE(parse_double("12x", out));
  CHECK_FALSE(parse_double("", out));
  CHECK(parse_double("-3.5e2", out));
  CHECK(out == -350.0);
}
