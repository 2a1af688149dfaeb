#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace las {

struct LmError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Word-level add-k n-gram model over normalized text. Sentences are padded
/// with <s> context markers and terminated by </s>; unknown query words map
/// to a shared <unk_w> class. Immutable after fit.
class NGramModel {
 public:
  /// Trains from normalized text lines. Throws on an empty corpus.
  static NGramModel fit(const std::vector<std::string>& corpus, int order = 3,
                        double k = 0.1);

  /// Sum of per-word smoothed conditional log probabilities including the
  /// end-of-sentence event. Finite for any input.
  double log_prob(const std::string& normalized_text) const;

  /// log P(word | context words), add-k smoothed. `word` may be "</s>".
  double cond_log_prob(const std::vector<std::string>& context,
                       const std::string& word) const;

  int order() const { return order_; }
  double k() const { return k_; }
  /// Size of the next-token event space (seen words + </s> + <unk_w>).
  int event_space() const { return static_cast<int>(vocab_.size()) + 2; }
  int vocab_size() const { return static_cast<int>(vocab_.size()); }

  void save(const std::string& path) const;
  static NGramModel load(const std::string& path);

 private:
  NGramModel() = default;

  std::string map_word(const std::string& w) const;

  int order_ = 3;
  double k_ = 0.1;
  std::map<std::string, long> vocab_;  // seen words with counts
  // Joint counts keyed by space-joined n-grams (contexts padded with <s>),
  // one table per order 1..n; context totals derived at load/fit.
  std::vector<std::map<std::string, long>> ngrams_;
  std::vector<std::map<std::string, long>> context_totals_;

  void rebuild_context_totals();
};

}  // namespace las
