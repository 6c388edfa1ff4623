#include <doctest.h>

#include "denmix/errors.hpp"
#include "denmix/vocab.hpp"

using namespace denmix;

TEST_SUITE("vocab") {

TEST_CASE("layout stacks sentinels then paradigms on the base range") {
  const SpecialVocab v = allocate_special_vocab(
      32000, 100, {Paradigm::R, Paradigm::S, Paradigm::X});
  CHECK(v.sentinel(0) == 32000);
  CHECK(v.sentinel(99) == 32099);
  CHECK(v.paradigm_id(Paradigm::R) == 32100);
  CHECK(v.paradigm_id(Paradigm::S) == 32101);
  CHECK(v.paradigm_id(Paradigm::X) == 32102);
  CHECK(v.total_size() == 32103);
  CHECK(v.eos_id == 1);
}

TEST_CASE("small layout") {
  const SpecialVocab v = allocate_special_vocab(10, 2, {Paradigm::R});
  CHECK(v.sentinel(0) == 10);
  CHECK(v.sentinel(1) == 11);
  CHECK(v.paradigm_id(Paradigm::R) == 12);
  CHECK(v.total_size() == 13);
}

TEST_CASE("at least one sentinel is required") {
  CHECK_THROWS_AS(allocate_special_vocab(10, 0, {}), ConfigError);
  CHECK_THROWS_AS(allocate_special_vocab(0, 2, {Paradigm::R}), ConfigError);
}

TEST_CASE("sentinel lookup past the supply throws") {
  const SpecialVocab v = allocate_special_vocab(10, 2, {Paradigm::R});
  CHECK_THROWS_AS(v.sentinel(2), SentinelError);
}

TEST_CASE("membership predicates partition the id space") {
  const SpecialVocab v = allocate_special_vocab(10, 2, {Paradigm::R});
  CHECK(v.is_base(0));
  CHECK(v.is_base(9));
  CHECK_FALSE(v.is_base(10));
  CHECK(v.is_sentinel(10));
  CHECK(v.is_sentinel(11));
  CHECK_FALSE(v.is_sentinel(12));
  CHECK(v.sentinel_index(11) == 1);
  CHECK_FALSE(v.sentinel_index(9).has_value());
  CHECK(v.is_special(12));
  CHECK_FALSE(v.is_special(13));
  CHECK(v.paradigm_of(12) == Paradigm::R);
  CHECK_FALSE(v.paradigm_of(11).has_value());
}

TEST_CASE("missing paradigm label throws") {
  const SpecialVocab v = allocate_special_vocab(10, 2, {Paradigm::R});
  CHECK(v.has_paradigm(Paradigm::R));
  CHECK_FALSE(v.has_paradigm(Paradigm::S));
  CHECK_THROWS_AS(v.paradigm_id(Paradigm::S), ConfigError);
}

TEST_CASE("duplicate paradigm labels are rejected") {
  CHECK_THROWS_AS(allocate_special_vocab(10, 2, {Paradigm::R, Paradigm::R}),
                  ConfigError);
}

TEST_CASE("eos id must not collide with the special range") {
  CHECK_THROWS_AS(
      allocate_special_vocab(10, 2, {Paradigm::R}, TokenId{11}),
      ConfigError);
  const SpecialVocab v = allocate_special_vocab(10, 2, {Paradigm::R}, TokenId{5});
  CHECK(v.eos_id == 5);
}

TEST_CASE("reserved ids must not collide") {
  CHECK_THROWS_AS(allocate_special_vocab(10, 2, {Paradigm::R}, std::nullopt,
                                         std::vector<TokenId>{12}),
                  ConfigError);
  CHECK_THROWS_AS(allocate_special_vocab(10, 2, {Paradigm::R}, std::nullopt,
                                         std::vector<TokenId>{1}),
                  ConfigError);
  CHECK_NOTHROW(allocate_special_vocab(10, 2, {Paradigm::R}, std::nullopt,
                                       std::vector<TokenId>{0, 9, 13}));
}

TEST_CASE("paradigm parsing and display") {
  CHECK(parse_paradigm("R") == Paradigm::R);
  CHECK(parse_paradigm("S") == Paradigm::S);
  CHECK(parse_paradigm("X") == Paradigm::X);
  CHECK_FALSE(parse_paradigm("Q").has_value());
  CHECK(paradigm_display(Paradigm::X) == "[X]");
}

TEST_CASE("alias table covers canonical and release-style names") {
  const auto& aliases = default_paradigm_aliases();
  CHECK(aliases.at("[R]") == Paradigm::R);
  CHECK(aliases.at("[S]") == Paradigm::S);
  CHECK(aliases.at("[X]") == Paradigm::X);
  CHECK(aliases.at("[NLU]") == Paradigm::R);
  CHECK(aliases.at("[S2S]") == Paradigm::S);
  CHECK(aliases.at("[NLG]") == Paradigm::X);
}

}  // TEST_SUITE
