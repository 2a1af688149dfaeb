#pragma once

#include "las/data_synth.hpp"
#include "las/lm.hpp"
#include "las/model.hpp"
#include "las/wer.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace las {

/// Prefix trie over normalized words for dictionary-constrained decoding.
class DictTrie {
 public:
  DictTrie() { nodes_.push_back(Node{}); }

  void insert(const std::string& word) {
    int cur = 0;
    for (char c : word) {
      auto it = nodes_[cur].children.find(c);
      if (it == nodes_[cur].children.end()) {
        nodes_.push_back(Node{});
        it = nodes_[cur]
                 .children.emplace(c, static_cast<int>(nodes_.size()) - 1)
                 .first;
      }
      cur = it->second;
    }
    nodes_[cur].terminal = true;
  }

  /// Child node for `c` under `node`, or -1. node 0 is the word start.
  int step(int node, char c) const {
    auto it = nodes_[node].children.find(c);
    return it == nodes_[node].children.end() ? -1 : it->second;
  }
  bool terminal(int node) const { return nodes_[node].terminal; }
  static constexpr int root() { return 0; }

 private:
  struct Node {
    std::map<char, int> children;
    bool terminal = false;
  };
  std::vector<Node> nodes_;
};

/// A partial or complete beam candidate. Token sequences start with <sos>;
/// complete ones end with <eos>.
template <typename Scalar>
struct Hypothesis {
  TokenSequence tokens;
  double log_prob = 0.0;
  DecoderState state;
  bool complete = false;
  int trie_node = DictTrie::root();
};

template <typename Scalar>
struct BeamResult {
  std::vector<Hypothesis<Scalar>> hyps;  // sorted descending by log_prob
  bool any_complete = false;
};

namespace detail {

/// Stable candidate order: score descending, then lexicographic tokens.
template <typename Scalar>
bool hyp_before(const Hypothesis<Scalar>& a, const Hypothesis<Scalar>& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  return a.tokens < b.tokens;
}

}  // namespace detail

/// Left-to-right beam search over a prepared utterance encoding. Every live
/// hypothesis expands over all output symbols each step; the top beta
/// candidates survive by cumulative log probability, and survivors emitting
/// <eos> move to the complete set (so they stop occupying beam slots). Stops
/// at max_len steps, when the beam empties, or when beta complete hypotheses
/// exist and the best live partial scores below the beta-th complete one.
/// With beta == 1 this is exactly the greedy path.
template <typename Scalar, typename VocabT = Vocabulary>
BeamResult<Scalar> beam_search(Tape<Scalar>& tape,
                               const ModelVars<Scalar>& model,
                               const EncodedUtterance<Scalar>& enc,
                               const VocabT& vocab, int beta, int max_len,
                               const DictTrie* dict = nullptr) {
  if (beta < 1) throw DimensionError("beam_search: beta must be >= 1");
  if (max_len < 1) throw DimensionError("beam_search: max_len must be >= 1");
  const int output_size = vocab.output_size();
  const int enc_dim = static_cast<int>(tape.value(enc.h_mat).cols());

  std::vector<Hypothesis<Scalar>> live(1);
  live[0].tokens.push_back(vocab.sos());
  live[0].state = initial_decoder_state(tape, model.speller, enc_dim);
  std::vector<Hypothesis<Scalar>> complete;

  auto allowed = [&](const Hypothesis<Scalar>& h, int symbol) {
    if (!dict) return true;
    if (symbol == vocab.eos())
      return h.trie_node == DictTrie::root() || dict->terminal(h.trie_node);
    if (symbol == vocab.space())
      return h.trie_node != DictTrie::root() && dict->terminal(h.trie_node);
    if (symbol == vocab.unk()) return false;
    return dict->step(h.trie_node, vocab.index_char(symbol)) >= 0;
  };

  for (int step = 0; step < max_len && !live.empty(); ++step) {
    std::vector<Hypothesis<Scalar>> candidates;
    candidates.reserve(live.size() * output_size);
    for (const Hypothesis<Scalar>& h : live) {
      DecoderStepResult r =
          decoder_step(tape, model.speller, h.state, h.tokens.back(), enc);
      const auto& lp = tape.value(r.log_probs);
      for (int s = 0; s < output_size; ++s) {
        if (!allowed(h, s)) continue;
        Hypothesis<Scalar> cand;
        cand.tokens = h.tokens;
        cand.tokens.push_back(s);
        cand.log_prob = h.log_prob + static_cast<double>(lp(s, 0));
        cand.state = r.state;
        cand.complete = s == vocab.eos();
        if (dict && !cand.complete) {
          cand.trie_node = s == vocab.space()
                               ? DictTrie::root()
                               : dict->step(h.trie_node, vocab.index_char(s));
        }
        candidates.push_back(std::move(cand));
      }
    }
    std::sort(candidates.begin(), candidates.end(), detail::hyp_before<Scalar>);
    if (static_cast<int>(candidates.size()) > beta) candidates.resize(beta);
    live.clear();
    for (Hypothesis<Scalar>& cand : candidates) {
      if (cand.complete)
        complete.push_back(std::move(cand));
      else
        live.push_back(std::move(cand));
    }
    std::sort(complete.begin(), complete.end(), detail::hyp_before<Scalar>);
    if (static_cast<int>(complete.size()) > beta) complete.resize(beta);
    if (static_cast<int>(complete.size()) >= beta && !live.empty() &&
        live.front().log_prob < complete.back().log_prob)
      break;
  }

  BeamResult<Scalar> result;
  if (!complete.empty()) {
    result.any_complete = true;
    result.hyps = std::move(complete);
  } else {
    // No hypothesis finished within max_len: best partials, flagged.
    result.hyps = std::move(live);
  }
  if (static_cast<int>(result.hyps.size()) > beta) result.hyps.resize(beta);
  return result;
}

/// One scored n-best entry.
struct ScoredHypothesis {
  std::string text;
  TokenSequence tokens;
  double log_prob = 0.0;
  double norm_score = 0.0;  // log_prob / |y|_c
  bool complete = true;
  std::optional<double> lm_log_prob;
  std::optional<double> combined;
};

template <typename Scalar, typename VocabT = Vocabulary>
std::vector<ScoredHypothesis> to_scored(const BeamResult<Scalar>& result,
                                        const VocabT& vocab) {
  std::vector<ScoredHypothesis> out;
  out.reserve(result.hyps.size());
  for (const auto& h : result.hyps) {
    ScoredHypothesis s;
    s.tokens = h.tokens;
    s.text = vocab.decode(h.tokens);
    s.log_prob = h.log_prob;
    const int chars = std::max<int>(1, static_cast<int>(s.text.size()));
    s.norm_score = h.log_prob / chars;
    s.complete = h.complete;
    out.push_back(std::move(s));
  }
  return out;
}

/// Length-normalized LM rescoring: s = logP(y|x)/|y|_c + lambda*logP_LM(y),
/// re-ranked descending. |y|_c excludes <sos>/<eos>. A hypothesis the
/// scorer cannot handle keeps a -inf LM term and sinks.
inline std::vector<ScoredHypothesis> rescore_with(
    std::vector<ScoredHypothesis> hyps,
    const std::function<double(const std::string&)>& lm_score, double lambda) {
  for (ScoredHypothesis& h : hyps) {
    double lm_lp = -std::numeric_limits<double>::infinity();
    if (lm_score) lm_lp = lm_score(h.text);
    h.lm_log_prob = lm_lp;
    h.combined = h.norm_score + lambda * lm_lp;
    if (lambda == 0.0) h.combined = h.norm_score;  // no -inf * 0
  }
  std::stable_sort(hyps.begin(), hyps.end(),
                   [](const ScoredHypothesis& a, const ScoredHypothesis& b) {
                     return *a.combined > *b.combined;
                   });
  return hyps;
}

inline std::vector<ScoredHypothesis> rescore(std::vector<ScoredHypothesis> hyps,
                                             const NGramModel* lm,
                                             double lambda) {
  std::function<double(const std::string&)> scorer;
  if (lm != nullptr)
    scorer = [lm](const std::string& text) { return lm->log_prob(text); };
  return rescore_with(std::move(hyps), scorer, lambda);
}

/// Minimum WER over the n-best list against the reference transcript.
inline std::pair<double, int> oracle_wer(
    const std::vector<ScoredHypothesis>& hyps, const std::string& truth) {
  if (hyps.empty()) throw EvalError("oracle_wer: empty hypothesis list");
  double best = std::numeric_limits<double>::infinity();
  int best_index = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const double w = wer(truth, hyps[i].text).wer;
    if (w < best) {
      best = w;
      best_index = static_cast<int>(i);
    }
  }
  return {best, best_index};
}

/// Convenience: encode one utterance and run beam search on a fresh tape.
template <typename Scalar, typename VocabT = Vocabulary>
std::vector<ScoredHypothesis> decode_utterance(ModelParams<Scalar>& params,
                                               const FeatureMatrix& features,
                                               const VocabT& vocab,
                                               int beta, int max_len = 0,
                                               const DictTrie* dict = nullptr) {
  Tape<Scalar> tape;
  ModelVars<Scalar> model = bind_model(tape, params);
  const typename Tape<Scalar>::Mat feats = features.cast<Scalar>();
  std::vector<Var> frames = listen(tape, model.listener, feats);
  EncodedUtterance<Scalar> enc = prepare_attention(tape, model.speller, frames);
  if (max_len <= 0) max_len = 2 * enc.length + 10;
  BeamResult<Scalar> result =
      beam_search(tape, model, enc, vocab, beta, max_len, dict);
  return to_scored(result, vocab);
}

/// Greedy decode recording the attention row of every output step.
template <typename Scalar>
struct GreedyTrace {
  TokenSequence tokens;  // emitted symbols, <eos> included if reached
  std::vector<Eigen::VectorXd> attention;  // one row per emitted symbol
};

template <typename Scalar, typename VocabT = Vocabulary>
GreedyTrace<Scalar> greedy_decode_with_attention(ModelParams<Scalar>& params,
                                                 const FeatureMatrix& features,
                                                 const VocabT& vocab,
                                                 int max_len = 0) {
  Tape<Scalar> tape;
  ModelVars<Scalar> model = bind_model(tape, params);
  const typename Tape<Scalar>::Mat feats = features.cast<Scalar>();
  std::vector<Var> frames = listen(tape, model.listener, feats);
  EncodedUtterance<Scalar> enc = prepare_attention(tape, model.speller, frames);
  if (max_len <= 0) max_len = 2 * enc.length + 10;
  DecoderState state = initial_decoder_state(
      tape, model.speller, static_cast<int>(tape.value(enc.h_mat).cols()));
  GreedyTrace<Scalar> trace;
  int prev = vocab.sos();
  for (int step = 0; step < max_len; ++step) {
    DecoderStepResult r = decoder_step(tape, model.speller, state, prev, enc);
    const auto& lp = tape.value(r.log_probs);
    int best = 0;
    for (int s = 1; s < vocab.output_size(); ++s)
      if (lp(s, 0) > lp(best, 0)) best = s;
    trace.tokens.push_back(best);
    trace.attention.push_back(
        tape.value(r.alpha).template cast<double>().col(0));
    if (best == vocab.eos()) break;
    state = r.state;
    prev = best;
  }
  return trace;
}

}  // namespace las
