#pragma once

#include "las/listener.hpp"
#include "las/vocab.hpp"

#include <vector>

namespace las {

/// Single-hidden-layer tanh MLP.
template <typename Scalar>
struct MlpParams {
  using Mat = typename Tape<Scalar>::Mat;
  Mat w1;  // Hmlp x In
  Mat b1;  // Hmlp x 1
  Mat w2;  // Out x Hmlp
  Mat b2;  // Out x 1

  static MlpParams zeros(int in, int hidden, int out) {
    MlpParams p;
    p.w1 = Mat::Zero(hidden, in);
    p.b1 = Mat::Zero(hidden, 1);
    p.w2 = Mat::Zero(out, hidden);
    p.b2 = Mat::Zero(out, 1);
    return p;
  }
};

struct MlpVars {
  Var w1, b1, w2, b2;
};

template <typename Scalar>
MlpVars bind(Tape<Scalar>& tape, const MlpParams<Scalar>& p) {
  return MlpVars{tape.input(p.w1), tape.input(p.b1), tape.input(p.w2),
                 tape.input(p.b2)};
}

template <typename Scalar>
Var mlp_apply(Tape<Scalar>& tape, const MlpVars& p, Var x) {
  Var h = tape.tanh_(tape.add(tape.matmul(p.w1, x), p.b1));
  return tape.add(tape.matmul(p.w2, h), p.b2);
}

/// Rowwise application: each row of `m` is one input vector.
template <typename Scalar>
Var mlp_apply_rows(Tape<Scalar>& tape, const MlpVars& p, Var m) {
  Var h = tape.tanh_(tape.add_rowwise(tape.matmul(m, tape.transpose(p.w1)),
                                      tape.transpose(p.b1)));
  return tape.add_rowwise(tape.matmul(h, tape.transpose(p.w2)),
                          tape.transpose(p.b2));
}

/// Content-based attention: query/key MLPs with a shared inner-product width.
template <typename Scalar>
struct AttentionParams {
  MlpParams<Scalar> phi;  // decoder state -> query
  MlpParams<Scalar> psi;  // encoder frame -> key

  static AttentionParams sized(int state_dim, int enc_dim, int key_width) {
    AttentionParams p;
    p.phi = MlpParams<Scalar>::zeros(state_dim, key_width, key_width);
    p.psi = MlpParams<Scalar>::zeros(enc_dim, key_width, key_width);
    return p;
  }
};

struct AttentionVars {
  MlpVars phi, psi;
};

template <typename Scalar>
AttentionVars bind(Tape<Scalar>& tape, const AttentionParams<Scalar>& p) {
  return AttentionVars{bind(tape, p.phi), bind(tape, p.psi)};
}

/// Speller: embedding for the previous character, a 2-layer LSTM, and the
/// character-distribution MLP over [s; c].
template <typename Scalar>
struct SpellerParams {
  using Mat = typename Tape<Scalar>::Mat;
  Mat embedding;  // vocab_size x embed_dim
  LstmCellParams<Scalar> rnn1, rnn2;
  AttentionParams<Scalar> attention;
  MlpParams<Scalar> char_dist;

  int hidden() const { return rnn1.hidden(); }

  static SpellerParams sized(int vocab_size, int output_size, int embed_dim,
                             int dec_hidden, int enc_dim, int key_width,
                             int char_hidden) {
    SpellerParams p;
    p.embedding = Mat::Zero(vocab_size, embed_dim);
    p.rnn1 = LstmCellParams<Scalar>::zeros(embed_dim + enc_dim, dec_hidden);
    p.rnn2 = LstmCellParams<Scalar>::zeros(dec_hidden, dec_hidden);
    p.attention = AttentionParams<Scalar>::sized(dec_hidden, enc_dim, key_width);
    p.char_dist =
        MlpParams<Scalar>::zeros(dec_hidden + enc_dim, char_hidden, output_size);
    return p;
  }
};

template <typename Scalar>
struct SpellerVars {
  Var embedding;
  LstmCellVars rnn1, rnn2;
  AttentionVars attention;
  MlpVars char_dist;
  int hidden = 0;
};

template <typename Scalar>
SpellerVars<Scalar> bind(Tape<Scalar>& tape, const SpellerParams<Scalar>& p) {
  SpellerVars<Scalar> v;
  v.embedding = tape.input(p.embedding);
  v.rnn1 = bind(tape, p.rnn1);
  v.rnn2 = bind(tape, p.rnn2);
  v.attention = bind(tape, p.attention);
  v.char_dist = bind(tape, p.char_dist);
  v.hidden = p.hidden();
  return v;
}

/// Encoder output prepared for repeated attention queries: the stacked
/// U x Henc matrix plus its precomputed keys.
template <typename Scalar>
struct EncodedUtterance {
  Var h_mat;  // U x Henc
  Var keys;   // U x Kw
  int length = 0;
};

template <typename Scalar>
EncodedUtterance<Scalar> prepare_attention(Tape<Scalar>& tape,
                                           const SpellerVars<Scalar>& sp,
                                           const std::vector<Var>& enc_frames) {
  EncodedUtterance<Scalar> enc;
  enc.h_mat = tape.stack_rows(enc_frames);
  enc.keys = mlp_apply_rows(tape, sp.attention.psi, enc.h_mat);
  enc.length = static_cast<int>(enc_frames.size());
  return enc;
}

/// Decoder state between output steps.
struct DecoderState {
  LstmState rnn1, rnn2;
  Var context;  // Henc x 1, previous context c_{i-1}
  int step = 0;
};

template <typename Scalar>
DecoderState initial_decoder_state(Tape<Scalar>& tape,
                                   const SpellerVars<Scalar>& sp, int enc_dim) {
  using Mat = typename Tape<Scalar>::Mat;
  DecoderState s;
  s.rnn1 = lstm_zero_state(tape, sp.hidden);
  s.rnn2 = lstm_zero_state(tape, sp.hidden);
  s.context = tape.input(Mat::Zero(enc_dim, 1));
  s.step = 0;
  return s;
}

/// Attention weights and context for a decoder state vector s_i:
/// energies are inner products of phi(s_i) with each key, the softmax of
/// the energies blends the encoder rows into c_i.
template <typename Scalar>
std::pair<Var, Var> attention_context(Tape<Scalar>& tape,
                                      const AttentionVars& attn, Var state_vec,
                                      const EncodedUtterance<Scalar>& enc) {
  Var query = mlp_apply(tape, attn.phi, state_vec);  // Kw x 1
  Var energies = tape.matmul(enc.keys, query);       // U x 1
  Var alpha = tape.softmax_col(energies);
  Var context = tape.matmul(tape.transpose(enc.h_mat), alpha);  // Henc x 1
  return {context, alpha};
}

struct DecoderStepResult {
  DecoderState state;
  Var log_probs;  // output_size x 1
  Var alpha;      // U x 1
};

/// One output step: advance the RNN on (y_prev, c_{i-1}), attend with the
/// new state, then score characters from [s_i; c_i].
template <typename Scalar>
DecoderStepResult decoder_step(Tape<Scalar>& tape, const SpellerVars<Scalar>& sp,
                               const DecoderState& state, int y_prev,
                               const EncodedUtterance<Scalar>& enc) {
  Var embed = tape.transpose(tape.rows(sp.embedding, y_prev, 1));
  Var x = tape.concat_rows(embed, state.context);
  DecoderState next;
  next.rnn1 = lstm_step(tape, sp.rnn1, x, state.rnn1);
  next.rnn2 = lstm_step(tape, sp.rnn2, next.rnn1.h, state.rnn2);
  auto [context, alpha] =
      attention_context(tape, sp.attention, next.rnn2.h, enc);
  next.context = context;
  next.step = state.step + 1;
  Var logits =
      mlp_apply(tape, sp.char_dist, tape.concat_rows(next.rnn2.h, context));
  return DecoderStepResult{next, tape.log_softmax_col(logits), alpha};
}

/// Teacher-forced log P(y | x) summed over every target position including
/// <eos>. `tokens` must be framed (<sos>, ..., <eos>).
template <typename Scalar>
Var sequence_log_prob(Tape<Scalar>& tape, const SpellerVars<Scalar>& sp,
                      const EncodedUtterance<Scalar>& enc,
                      const TokenSequence& tokens, int output_size) {
  if (tokens.size() < 2)
    throw DimensionError("sequence_log_prob: sequence must be framed");
  DecoderState state = initial_decoder_state(
      tape, sp, static_cast<int>(tape.value(enc.h_mat).cols()));
  Var total;
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    const int target = tokens[i];
    if (target < 0 || target >= output_size)
      throw EncodingError("target token out of output vocabulary");
    DecoderStepResult r = decoder_step(tape, sp, state, tokens[i - 1], enc);
    Var term = tape.pick(r.log_probs, target);
    total = total.valid() ? tape.add(total, term) : term;
    state = r.state;
  }
  return total;
}

}  // namespace las
