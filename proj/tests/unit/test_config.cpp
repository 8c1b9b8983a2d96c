#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "fractfem/config.hpp"

using fractfem::Config;

namespace {

std::string saved(const Config& c) {
  std::ostringstream os;
  c.save(os);
  return os.str();
}

}  // namespace

TEST_CASE("config: parse, getters, fallbacks") {
  Config c = Config::parseString(
      "top = 3\n"
      "[run]\n"
      "s = 0.25\n"
      "name = getoor\n"
      "flag = true\n"
      "# comment line\n"
      "[quad]\n"
      "ell = 1.5\n");
  CHECK(c.getInt("top", -1) == 3);
  CHECK(c.getDouble("run.s", 0.0) == doctest::Approx(0.25));
  CHECK(c.getString("run.name", "") == "getoor");
  CHECK(c.getBool("run.flag", false));
  CHECK(c.getDouble("quad.ell", 0.0) == doctest::Approx(1.5));
  CHECK(c.getInt("absent.key", 42) == 42);
  CHECK_NOTHROW(c.requireConsumed());
}

TEST_CASE("config: malformed values throw, absent ones fall back") {
  Config c = Config::parseString("[run]\ns = zebra\nn = 1.5x\n");
  CHECK_THROWS_AS((void)c.getDouble("run.s", 0.0), std::exception);
  CHECK_THROWS_AS((void)c.getInt("run.n", 0), std::exception);
  CHECK(c.getInt("run.missing", 7) == 7);
}

TEST_CASE("config: unused keys are reported in file order") {
  Config c = Config::parseString("[a]\nx = 1\ny = 2\n[b]\nz = 3\n");
  (void)c.getInt("a.y", 0);
  const auto unused = c.unusedKeys();
  REQUIRE(unused.size() == 2);
  CHECK(unused[0] == "a.x");
  CHECK(unused[1] == "b.z");
  CHECK_THROWS_AS(c.requireConsumed(), std::exception);
}

TEST_CASE("config: has() does not consume") {
  Config c = Config::parseString("[a]\nx = 1\n");
  CHECK(c.has("a.x"));
  CHECK_THROWS_AS(c.requireConsumed(), std::exception);
}

TEST_CASE("config: save/parse round-trips byte for byte") {
  std::mt19937 rng(20240601);
  std::uniform_int_distribution<int> nsec(0, 4), nkey(1, 6), klen(1, 8);
  std::uniform_int_distribution<int> pick(0, 25);
  std::uniform_real_distribution<double> val(-1e3, 1e3);

  auto word = [&](int len) {
    std::string w;
    for (int i = 0; i < len; ++i) w.push_back(char('a' + pick(rng)));
    return w;
  };

  for (int trial = 0; trial < 120; ++trial) {
    Config c;
    // A few sectionless keys, then sections. Duplicate keys overwrite.
    for (int i = 0, n = nkey(rng) / 2; i < n; ++i) {
      c.set(word(klen(rng)), std::to_string(val(rng)));
    }
    const int sections = nsec(rng);
    for (int sIdx = 0; sIdx < sections; ++sIdx) {
      const std::string sec = word(klen(rng));
      for (int k = 0, n = nkey(rng); k < n; ++k) {
        c.set(sec + "." + word(klen(rng)), std::to_string(val(rng)));
      }
    }
    const std::string text1 = saved(c);
    Config back = Config::parseString(text1);
    const std::string text2 = saved(back);
    REQUIRE(text1 == text2);
  }
}

TEST_CASE("config: overwrite keeps position, round-trip still stable") {
  Config c = Config::parseString("[a]\nx = 1\ny = 2\n");
  c.set("a.x", "10");
  const std::string text = saved(c);
  CHECK(text.find("x = 10") < text.find("y = 2"));
  CHECK(saved(Config::parseString(text)) == text);
}
