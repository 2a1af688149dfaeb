#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "las/vocab.hpp"
#include "las/wer.hpp"

#include <algorithm>
#include <random>

using las::edit_breakdown;
using las::split_words;
using las::wer;

namespace {

// Plain recursive minimal edit distance, independent of the DP code.
int brute_force_edits(const std::vector<std::string>& ref,
                      const std::vector<std::string>& hyp, std::size_t i = 0,
                      std::size_t j = 0) {
  if (i == ref.size()) return static_cast<int>(hyp.size() - j);
  if (j == hyp.size()) return static_cast<int>(ref.size() - i);
  int best = brute_force_edits(ref, hyp, i + 1, j + 1) +
             (ref[i] == hyp[j] ? 0 : 1);
  best = std::min(best, brute_force_edits(ref, hyp, i, j + 1) + 1);
  best = std::min(best, brute_force_edits(ref, hyp, i + 1, j) + 1);
  return best;
}

}  // namespace

TEST_CASE("published n-best error-rate fixtures") {
  const std::string truth1 = "call aaa roadside assistance";
  CHECK(wer(truth1, "call aaa roadside assistance").percent() ==
        doctest::Approx(0.00).epsilon(0.005));
  CHECK(wer(truth1, "call triple a roadside assistance").percent() ==
        doctest::Approx(50.00).epsilon(0.005));
  CHECK(wer(truth1, "call trip way roadside assistance").percent() ==
        doctest::Approx(50.00).epsilon(0.005));
  CHECK(wer(truth1, "call xxx roadside assistance").percent() ==
        doctest::Approx(25.00).epsilon(0.005));

  const std::string truth2 = "eight nine four minus seven seven seven";
  CHECK(wer(truth2, "eight nine four minus seven seven seven").percent() ==
        doctest::Approx(0.00).epsilon(0.005));
  CHECK(wer(truth2, "eight nine four nine seven seven seven").percent() ==
        doctest::Approx(14.29).epsilon(0.005));
  CHECK(wer(truth2, "eight nine four minus seven seventy seven").percent() ==
        doctest::Approx(14.29).epsilon(0.005));
  CHECK(wer(truth2, "eight nine four nine s seven seven seven").percent() ==
        doctest::Approx(28.57).epsilon(0.005));
}

TEST_CASE("dynamic program matches the brute-force oracle") {
  const std::vector<std::string> alphabet = {"aa", "bb", "cc"};
  std::mt19937_64 rng(12345);
  std::uniform_int_distribution<int> len(0, 5);
  std::uniform_int_distribution<int> sym(0, 2);
  for (int trial = 0; trial < 400; ++trial) {
    std::vector<std::string> ref(len(rng)), hyp(len(rng));
    for (auto& w : ref) w = alphabet[sym(rng)];
    for (auto& w : hyp) w = alphabet[sym(rng)];
    const auto b = edit_breakdown(ref, hyp);
    CHECK(b.edits() == brute_force_edits(ref, hyp));
    // The breakdown is consistent with the alignment lengths.
    CHECK(static_cast<int>(hyp.size()) ==
          static_cast<int>(ref.size()) + b.insertions - b.deletions);
  }
}

TEST_CASE("error rate properties") {
  CHECK(wer("a b c", "a b c").wer == 0.0);
  CHECK(wer("a", "x y z").wer == doctest::Approx(3.0));  // can exceed 1
  CHECK(wer("a b", "").wer == doctest::Approx(1.0));
  CHECK_THROWS_AS(wer("", "anything"), las::EvalError);
  CHECK_THROWS_AS(las::cer("", "x"), las::EvalError);
  CHECK(las::cer("abcd", "abxd") == doctest::Approx(0.25));
  // Identical up to the unknown placeholder once stripped.
  const std::string with_unk = std::string("ab") + las::kUnkChar + "cd";
  CHECK(wer("abcd", with_unk).wer == 0.0);
  CHECK(wer("abcd", with_unk, false).wer == doctest::Approx(1.0));
}

TEST_CASE("recall by training frequency fixture") {
  const std::vector<std::string> train = {"cat dog", "cat", "cat bird"};
  const std::vector<std::string> refs = {"cat dog", "dog bird"};
  const std::vector<std::string> hyps = {"cat dog", "dog dog"};
  auto rows = las::recall_by_frequency(train, refs, hyps);
  REQUIRE(rows.size() == 3);  // bird, cat, dog (sorted)
  CHECK(rows[0].word == "bird");
  CHECK(rows[0].train_count == 1);
  CHECK(rows[0].recall == doctest::Approx(0.0));
  CHECK(rows[1].word == "cat");
  CHECK(rows[1].train_count == 3);
  CHECK(rows[1].recall == doctest::Approx(1.0));
  CHECK(rows[2].word == "dog");
  CHECK(rows[2].train_count == 1);
  CHECK(rows[2].occurrences == 2);
  CHECK(rows[2].recall == doctest::Approx(1.0));
}

TEST_CASE("four-utterance recall fixture") {
  // "hello" appears in all four references and every hypothesis keeps it;
  // "world" appears in two references and only one hypothesis keeps it.
  const std::vector<std::string> refs = {"hello world", "hello", "hello world",
                                         "hello"};
  const std::vector<std::string> hyps = {"hello world", "hello", "hello word",
                                         "hello"};
  auto rows = las::recall_by_frequency({}, refs, hyps);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].word == "hello");
  CHECK(rows[0].occurrences == 4);
  CHECK(rows[0].recall == doctest::Approx(1.0));
  CHECK(rows[1].word == "world");
  CHECK(rows[1].occurrences == 2);
  CHECK(rows[1].recall == doctest::Approx(0.5));
}

TEST_CASE("recall counts a word once per utterance") {
  auto rows = las::recall_by_frequency({}, {"seven seven seven"}, {"seven"});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].occurrences == 1);
  CHECK(rows[0].recall == doctest::Approx(1.0));
}

TEST_CASE("error statistics bucketed by reference length") {
  const std::vector<std::string> refs = {"a b", "c d", "e f g"};
  const std::vector<std::string> hyps = {"a b", "c x", "e f g h"};
  auto rows = las::error_by_length(refs, hyps);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].word_count == 2);
  CHECK(rows[0].utterances == 2);
  CHECK(rows[0].mean_substitutions == doctest::Approx(0.5));
  CHECK(rows[0].mean_wer == doctest::Approx(0.25));
  CHECK(rows[1].word_count == 3);
  CHECK(rows[1].utterances == 1);
  CHECK(rows[1].mean_insertions == doctest::Approx(1.0));
  CHECK(rows[1].mean_wer == doctest::Approx(1.0 / 3));
}

TEST_CASE("utterance order does not change aggregate statistics") {
  const std::vector<std::string> refs = {"a b", "c d e", "f"};
  const std::vector<std::string> hyps = {"a x", "c d e", "g"};
  auto rows1 = las::error_by_length(refs, hyps);
  const std::vector<std::string> refs2 = {"f", "a b", "c d e"};
  const std::vector<std::string> hyps2 = {"g", "a x", "c d e"};
  auto rows2 = las::error_by_length(refs2, hyps2);
  REQUIRE(rows1.size() == rows2.size());
  for (std::size_t i = 0; i < rows1.size(); ++i) {
    CHECK(rows1[i].word_count == rows2[i].word_count);
    CHECK(rows1[i].mean_wer == doctest::Approx(rows2[i].mean_wer));
  }
  CHECK_THROWS_AS(las::error_by_length({"a"}, {}), las::EvalError);
  CHECK_THROWS_AS(las::recall_by_frequency({}, {"a"}, {}), las::EvalError);
}
