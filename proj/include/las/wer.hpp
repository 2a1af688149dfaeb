#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace las {

struct EvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Minimal-edit-distance word alignment counts. wer is a ratio and may
/// exceed 1 with many insertions.
struct WERBreakdown {
  int substitutions = 0;
  int insertions = 0;
  int deletions = 0;
  int ref_words = 0;
  double wer = 0.0;

  double percent() const { return 100.0 * wer; }
  int edits() const { return substitutions + insertions + deletions; }
};

std::vector<std::string> split_words(const std::string& text);

/// Generic minimal edit distance with S/I/D breakdown over token vectors.
WERBreakdown edit_breakdown(const std::vector<std::string>& ref,
                            const std::vector<std::string>& hyp);

/// Word error rate between normalized strings. strip_unk drops <unk>
/// placeholder characters before splitting.
WERBreakdown wer(const std::string& ref, const std::string& hyp,
                 bool strip_unk = true);

/// Character error rate (edit distance over characters / ref length).
double cer(const std::string& ref, const std::string& hyp);

struct WordRecall {
  std::string word;
  long train_count = 0;
  int occurrences = 0;  // test utterances containing the word
  int recalled = 0;     // of those, hypotheses that also contain it
  double recall = 0.0;
};

/// Per test word type: recall = fraction of test utterances containing the
/// word whose hypothesis also contains it, paired with the word's training
/// transcript count. A word counts once per utterance.
std::vector<WordRecall> recall_by_frequency(
    const std::vector<std::string>& train_transcripts,
    const std::vector<std::string>& test_refs,
    const std::vector<std::string>& test_hyps);

struct LengthBucketRow {
  int word_count = 0;
  int utterances = 0;
  double mean_substitutions = 0.0;
  double mean_insertions = 0.0;
  double mean_deletions = 0.0;
  double mean_wer = 0.0;
};

/// Error statistics bucketed by reference word count.
std::vector<LengthBucketRow> error_by_length(
    const std::vector<std::string>& refs, const std::vector<std::string>& hyps);

}  // namespace las
