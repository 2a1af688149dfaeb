#include "las/wer.hpp"

#include "las/vocab.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace las {

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream in(text);
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

namespace {

std::string strip_unk_chars(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s)
    if (c != kUnkChar) out.push_back(c);
  return out;
}

}  // namespace

WERBreakdown edit_breakdown(const std::vector<std::string>& ref,
                            const std::vector<std::string>& hyp) {
  const int n = static_cast<int>(ref.size());
  const int m = static_cast<int>(hyp.size());
  // dp costs plus backtrace: 0=match, 1=sub, 2=ins(hyp extra), 3=del.
  std::vector<std::vector<int>> cost(n + 1, std::vector<int>(m + 1, 0));
  std::vector<std::vector<int>> back(n + 1, std::vector<int>(m + 1, 0));
  for (int i = 1; i <= n; ++i) {
    cost[i][0] = i;
    back[i][0] = 3;
  }
  for (int j = 1; j <= m; ++j) {
    cost[0][j] = j;
    back[0][j] = 2;
  }
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= m; ++j) {
      const bool eq = ref[i - 1] == hyp[j - 1];
      int best = cost[i - 1][j - 1] + (eq ? 0 : 1);
      int move = eq ? 0 : 1;
      if (cost[i][j - 1] + 1 < best) {
        best = cost[i][j - 1] + 1;
        move = 2;
      }
      if (cost[i - 1][j] + 1 < best) {
        best = cost[i - 1][j] + 1;
        move = 3;
      }
      cost[i][j] = best;
      back[i][j] = move;
    }
  }
  WERBreakdown out;
  out.ref_words = n;
  int i = n, j = m;
  while (i > 0 || j > 0) {
    switch (back[i][j]) {
      case 0:
        --i;
        --j;
        break;
      case 1:
        ++out.substitutions;
        --i;
        --j;
        break;
      case 2:
        ++out.insertions;
        --j;
        break;
      default:
        ++out.deletions;
        --i;
        break;
    }
  }
  out.wer = n > 0 ? static_cast<double>(out.edits()) / n : 0.0;
  return out;
}

WERBreakdown wer(const std::string& ref, const std::string& hyp,
                 bool strip_unk) {
  const std::string r = strip_unk ? strip_unk_chars(ref) : ref;
  const std::string h = strip_unk ? strip_unk_chars(hyp) : hyp;
  const std::vector<std::string> rw = split_words(r);
  if (rw.empty()) throw EvalError("wer: empty reference");
  return edit_breakdown(rw, split_words(h));
}

double cer(const std::string& ref, const std::string& hyp) {
  std::vector<std::string> rc, hc;
  for (char c : ref) rc.emplace_back(1, c);
  for (char c : hyp) hc.emplace_back(1, c);
  if (rc.empty()) throw EvalError("cer: empty reference");
  return static_cast<double>(edit_breakdown(rc, hc).edits()) / rc.size();
}

std::vector<WordRecall> recall_by_frequency(
    const std::vector<std::string>& train_transcripts,
    const std::vector<std::string>& test_refs,
    const std::vector<std::string>& test_hyps) {
  if (test_refs.size() != test_hyps.size())
    throw EvalError("recall_by_frequency: refs/hyps size mismatch");
  std::map<std::string, long> train_counts;
  for (const auto& t : train_transcripts)
    for (const auto& w : split_words(t)) ++train_counts[w];

  std::map<std::string, WordRecall> by_word;
  for (std::size_t u = 0; u < test_refs.size(); ++u) {
    const auto rw = split_words(test_refs[u]);
    const std::set<std::string> ref_types(rw.begin(), rw.end());
    const auto hw = split_words(test_hyps[u]);
    const std::set<std::string> hyp_types(hw.begin(), hw.end());
    for (const auto& w : ref_types) {
      WordRecall& r = by_word[w];
      r.word = w;
      ++r.occurrences;
      if (hyp_types.count(w)) ++r.recalled;
    }
  }
  std::vector<WordRecall> out;
  out.reserve(by_word.size());
  for (auto& [w, r] : by_word) {
    auto it = train_counts.find(w);
    r.train_count = it == train_counts.end() ? 0 : it->second;
    r.recall = static_cast<double>(r.recalled) / r.occurrences;
    out.push_back(r);
  }
  return out;
}

std::vector<LengthBucketRow> error_by_length(
    const std::vector<std::string>& refs,
    const std::vector<std::string>& hyps) {
  if (refs.size() != hyps.size())
    throw EvalError("error_by_length: refs/hyps size mismatch");
  std::map<int, std::vector<WERBreakdown>> buckets;
  for (std::size_t u = 0; u < refs.size(); ++u) {
    WERBreakdown b = wer(refs[u], hyps[u]);
    buckets[b.ref_words].push_back(b);
  }
  std::vector<LengthBucketRow> rows;
  for (const auto& [wc, items] : buckets) {
    LengthBucketRow row;
    row.word_count = wc;
    row.utterances = static_cast<int>(items.size());
    for (const auto& b : items) {
      row.mean_substitutions += b.substitutions;
      row.mean_insertions += b.insertions;
      row.mean_deletions += b.deletions;
      row.mean_wer += b.wer;
    }
    row.mean_substitutions /= row.utterances;
    row.mean_insertions /= row.utterances;
    row.mean_deletions /= row.utterances;
    row.mean_wer /= row.utterances;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace las
