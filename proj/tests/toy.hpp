#pragma once

// Shared test fixtures: a reduced vocabulary, tiny random models, and the
// exhaustive sequence-enumeration oracle used against beam search and the
// chain-rule normalization checks.

#include "las/beam.hpp"
#include "las/model.hpp"
#include "las/train.hpp"

#include <random>
#include <string>
#include <vector>

namespace toy {

/// Three output symbols {a, b, <eos>} plus the input-only <sos>.
class ToyVocab {
 public:
  int size() const { return 4; }
  int output_size() const { return 3; }
  int sos() const { return 3; }
  int eos() const { return 2; }
  // No space/unk in the toy alphabet; impossible indices keep the
  // dictionary logic inert.
  int space() const { return -2; }
  int unk() const { return -3; }
  char index_char(int index) const { return index == 0 ? 'a' : 'b'; }
  std::string decode(const las::TokenSequence& tokens) const {
    std::string out;
    for (int t : tokens)
      if (t < 2) out.push_back(index_char(t));
    return out;
  }
};

inline las::ModelConfig tiny_config(int input_dim = 4, int hidden = 3) {
  las::ModelConfig cfg;
  cfg.input_dim = input_dim;
  cfg.enc_hidden_per_dir = hidden;
  cfg.pyramid_layers = 2;
  cfg.dec_hidden = hidden + 1;
  cfg.embed_dim = 3;
  cfg.key_width = 3;
  cfg.char_hidden = 4;
  return cfg;
}

template <typename Scalar>
las::ModelParams<Scalar> tiny_model(const las::ModelConfig& cfg, int vocab_size,
                                    int output_size, std::uint64_t seed,
                                    double range = 0.4) {
  auto params =
      las::ModelParams<Scalar>::sized(cfg, vocab_size, output_size);
  params.config.init_range = range;
  params.config.forget_bias = 0.0;
  params.init(seed);
  return params;
}

inline las::FeatureMatrix random_features(int t_len, int dim,
                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> d(0.0f, 1.0f);
  las::FeatureMatrix f(t_len, dim);
  for (Eigen::Index i = 0; i < f.size(); ++i) f(i) = d(rng);
  return f;
}

struct EnumeratedSequence {
  las::TokenSequence tokens;  // emitted symbols, <eos> last when complete
  double log_prob = 0.0;
  bool complete = false;
};

/// Expands every output sequence up to max_len decoder steps, returning the
/// exact probability of each complete sequence and each live max-length
/// prefix. The probabilities partition unit mass.
template <typename Scalar, typename VocabT>
std::vector<EnumeratedSequence> enumerate_sequences(
    las::Tape<Scalar>& tape, const las::ModelVars<Scalar>& model,
    const las::EncodedUtterance<Scalar>& enc, const VocabT& vocab,
    int max_len) {
  std::vector<EnumeratedSequence> out;
  struct Frame {
    las::DecoderState state;
    las::TokenSequence tokens;
    double log_prob;
    int prev;
  };
  std::vector<Frame> stack;
  stack.push_back(Frame{las::initial_decoder_state(
                            tape, model.speller,
                            static_cast<int>(tape.value(enc.h_mat).cols())),
                        {}, 0.0, vocab.sos()});
  while (!stack.empty()) {
    Frame f = std::move(stack.back());
    stack.pop_back();
    las::DecoderStepResult r =
        las::decoder_step(tape, model.speller, f.state, f.prev, enc);
    const auto& lp = tape.value(r.log_probs);
    for (int s = 0; s < vocab.output_size(); ++s) {
      EnumeratedSequence seq;
      seq.tokens = f.tokens;
      seq.tokens.push_back(s);
      seq.log_prob = f.log_prob + static_cast<double>(lp(s, 0));
      seq.complete = s == vocab.eos();
      if (seq.complete || static_cast<int>(seq.tokens.size()) >= max_len) {
        out.push_back(std::move(seq));
      } else {
        stack.push_back(
            Frame{r.state, std::move(seq.tokens), seq.log_prob, s});
      }
    }
  }
  return out;
}

}  // namespace toy
