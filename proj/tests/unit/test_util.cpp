#include <doctest.h>

#include <cstdlib>
#include <set>

#include "chainedit/util.hpp"

using namespace chainedit;

TEST_SUITE("util") {
  TEST_CASE("text helpers") {
    CHECK(text::trim("  a b \t\n") == "a b");
    CHECK(text::trim("   ").empty());
    CHECK(text::to_lower("AbC") == "abc");
    CHECK(text::split("a|b||c", '|') == std::vector<std::string>{"a", "b", "", "c"});
    CHECK(text::join({"x", "y", "z"}, "; ") == "x; y; z");
    CHECK(text::iequals("Mary", "mARY"));
    CHECK_FALSE(text::iequals("Mary", "Mar"));
    CHECK(text::starts_with_icase("Given the", "given"));
    CHECK(text::capitalize("the spouse") == "The spouse");
    CHECK(text::capitalize("").empty());
  }

  TEST_CASE("sha256 known vectors") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }

  TEST_CASE("SOURCE_DATE_EPOCH pins timestamps") {
    ::setenv("SOURCE_DATE_EPOCH", "0", 1);
    CHECK(timestamp_now() == "1970-01-01T00:00:00Z");
    ::setenv("SOURCE_DATE_EPOCH", "1700000000", 1);
    CHECK(timestamp_now() == "2023-11-14T22:13:20Z");
    ::unsetenv("SOURCE_DATE_EPOCH");
    CHECK(timestamp_now().size() == 20);
  }

  TEST_CASE("SplitMix64 is deterministic and bounded") {
    SplitMix64 a(42), b(42), c(43);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
      auto x = a.next();
      CHECK(x == b.next());
      differs |= x != c.next();
    }
    CHECK(differs);
    std::set<std::uint64_t> seen;
    SplitMix64 r(7);
    for (int i = 0; i < 2000; ++i) {
      auto v = r.below(10);
      CHECK(v < 10);
      seen.insert(v);
    }
    CHECK(seen.size() == 10);
  }
}
