#include "doctest.h"

#include <string>
#include <vector>

#include "haid/config.hpp"

using namespace haid;

TEST_CASE("key=value text parses with comments and dotted keys") {
  const std::string text =
      "# run setup\n"
      "\n"
      "run.scenarios = S0\n"
      "cohort.n=10\n"
      "  mpc.r = 120.5  \n"
      "cohort.n=12\n";
  const ConfigMap cfg = ConfigMap::parse_text(text);
  CHECK(cfg.get_string("run.scenarios", "") == "S0");
  CHECK(cfg.get_int("cohort.n", 0) == 12);
  CHECK(cfg.get_double("mpc.r", 0.0) == doctest::Approx(120.5));
  CHECK(cfg.has("mpc.r"));
  CHECK(!cfg.has("mpc.q"));
}

TEST_CASE("missing keys fall back without being recorded as read") {
  const ConfigMap cfg = ConfigMap::parse_text("a=1\n");
  CHECK(cfg.get_double("b", 2.5) == 2.5);
  CHECK(cfg.get_int("c", 7) == 7);
  CHECK(cfg.get_bool("d", true));
  CHECK(cfg.get_string("e", "x") == "x");
  const std::vector<double> arr = cfg.get_double_array("f", {1.0, 2.0});
  CHECK(arr == std::vector<double>{1.0, 2.0});
}

TEST_CASE("parse errors carry the offending line number") {
  try {
    ConfigMap::parse_text("a=1\nnot a pair\n");
    FAIL("expected a parse failure");
  } catch (const ConfigException& e) {
    CHECK(e.error().line == 2);
  }
  try {
    ConfigMap::parse_text("a=1\nb b=2\n");
    FAIL("expected a key failure");
  } catch (const ConfigException& e) {
    CHECK(e.error().line == 2);
    CHECK(e.error().key == "b b");
  }
}

TEST_CASE("typed getters reject values of the wrong shape") {
  const ConfigMap cfg = ConfigMap::parse_text(
      "a=1.5x\nb=fast\nc=maybe\nd=(1,2)\n");
  CHECK_THROWS_AS(cfg.get_double("a", 0.0), ConfigException);
  CHECK_THROWS_AS(cfg.get_int("b", 0), ConfigException);
  CHECK_THROWS_AS(cfg.get_bool("c", false), ConfigException);
  CHECK_THROWS_AS(cfg.get_double_array("d", {}), ConfigException);
  try {
    cfg.get_bool("c", false);
    FAIL("expected a boolean failure");
  } catch (const ConfigException& e) {
    CHECK(e.error().line == 3);
    CHECK(e.error().key == "c");
  }
}

TEST_CASE("boolean spellings are case-insensitive") {
  const ConfigMap cfg = ConfigMap::parse_text(
      "a=TRUE\nb=Yes\nc=on\nd=1\ne=False\nf=NO\ng=off\nh=0\n");
  CHECK(cfg.get_bool("a", false));
  CHECK(cfg.get_bool("b", false));
  CHECK(cfg.get_bool("c", false));
  CHECK(cfg.get_bool("d", false));
  CHECK(!cfg.get_bool("e", true));
  CHECK(!cfg.get_bool("f", true));
  CHECK(!cfg.get_bool("g", true));
  CHECK(!cfg.get_bool("h", true));
}

TEST_CASE("bracketed arrays parse into doubles") {
  const ConfigMap cfg = ConfigMap::parse_text(
      "bias=[1, 1.25, 1, 0.75, 1]\nempty=[]\n");
  const std::vector<double> bias = cfg.get_double_array("bias", {});
  REQUIRE(bias.size() == 5);
  CHECK(bias[1] == doctest::Approx(1.25));
  CHECK(bias[3] == doctest::Approx(0.75));
  CHECK(cfg.get_double_array("empty", {9.0}).empty());
}

TEST_CASE("unread keys surface so typos cannot pass silently") {
  const ConfigMap cfg = ConfigMap::parse_text("good=1\nmispelt=2\n");
  (void)cfg.get_int("good", 0);
  const std::vector<std::string> leftover = cfg.unread_keys();
  REQUIRE(leftover.size() == 1);
  CHECK(leftover[0] == "mispelt");
}

TEST_CASE("canonical form is order-free and hash-stable") {
  const ConfigMap a = ConfigMap::parse_text("x=1\ny=2\n");
  const ConfigMap b = ConfigMap::parse_text("y=2\n# swap\nx=1\n");
  CHECK(a.canonical() == b.canonical());
  CHECK(a.canonical() == "x=1\ny=2\n");
  CHECK(fnv1a_hash(a.canonical()) == fnv1a_hash(b.canonical()));
}

TEST_CASE("the hash matches its published reference vectors") {
  CHECK(fnv1a_hash("") == 14695981039346656037ULL);
  CHECK(fnv1a_hash("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a_hash("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("set writes programmatic overrides") {
  ConfigMap cfg = ConfigMap::parse_text("a=1\n");
  cfg.set("a", " 3 ");
  cfg.set("b.c", "hi");
  CHECK(cfg.get_int("a", 0) == 3);
  CHECK(cfg.get_string("b.c", "") == "hi");
  CHECK_THROWS_AS(cfg.set("bad key", "1"), ConfigException);
}
