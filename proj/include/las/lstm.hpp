#pragma once

#include "las/tape.hpp"

#include <random>
#include <vector>

namespace las {

/// Fused gate parameters for one LSTM direction. Gate order within the
/// stacked 4H rows: input, forget, cell candidate, output.
template <typename Scalar>
struct LstmCellParams {
  using Mat = typename Tape<Scalar>::Mat;
  Mat wx;  // 4H x Din
  Mat wh;  // 4H x H
  Mat b;   // 4H x 1

  int hidden() const { return static_cast<int>(wh.cols()); }
  int input_dim() const { return static_cast<int>(wx.cols()); }

  static LstmCellParams zeros(int input_dim, int hidden) {
    LstmCellParams p;
    p.wx = Mat::Zero(4 * hidden, input_dim);
    p.wh = Mat::Zero(4 * hidden, hidden);
    p.b = Mat::Zero(4 * hidden, 1);
    return p;
  }
};

/// Same cell with its tensors registered on a tape.
struct LstmCellVars {
  Var wx, wh, b;
};

template <typename Scalar>
LstmCellVars bind(Tape<Scalar>& tape, const LstmCellParams<Scalar>& p) {
  return LstmCellVars{tape.input(p.wx), tape.input(p.wh), tape.input(p.b)};
}

/// Hidden and cell state of one LSTM direction.
struct LstmState {
  Var h, c;
};

template <typename Scalar>
LstmState lstm_zero_state(Tape<Scalar>& tape, int hidden) {
  using Mat = typename Tape<Scalar>::Mat;
  return LstmState{tape.input(Mat::Zero(hidden, 1)),
                   tape.input(Mat::Zero(hidden, 1))};
}

/// One LSTM step: sigmoid gates, tanh candidate and output squashing.
template <typename Scalar>
LstmState lstm_step(Tape<Scalar>& tape, const LstmCellVars& p, Var x_t,
                    LstmState state) {
  const int hidden = static_cast<int>(tape.value(state.h).rows());
  Var z = tape.add(tape.add(tape.matmul(p.wx, x_t), tape.matmul(p.wh, state.h)),
                   p.b);
  Var i = tape.sigmoid_(tape.rows(z, 0, hidden));
  Var f = tape.sigmoid_(tape.rows(z, hidden, hidden));
  Var g = tape.tanh_(tape.rows(z, 2 * hidden, hidden));
  Var o = tape.sigmoid_(tape.rows(z, 3 * hidden, hidden));
  Var c = tape.add(tape.cmul(f, state.c), tape.cmul(i, g));
  Var h = tape.cmul(o, tape.tanh_(c));
  return LstmState{h, c};
}

/// Forward + backward LSTM over a sequence of column vectors, outputs
/// concatenated per step. Throws on an empty sequence.
template <typename Scalar>
std::vector<Var> blstm_layer(Tape<Scalar>& tape, const LstmCellVars& fwd,
                             const LstmCellVars& bwd, int hidden,
                             const std::vector<Var>& inputs) {
  if (inputs.empty()) throw DimensionError("blstm_layer: empty input sequence");
  const int t_len = static_cast<int>(inputs.size());
  std::vector<Var> fwd_h(t_len), bwd_h(t_len);
  LstmState state = lstm_zero_state(tape, hidden);
  for (int t = 0; t < t_len; ++t) {
    state = lstm_step(tape, fwd, inputs[t], state);
    fwd_h[t] = state.h;
  }
  state = lstm_zero_state(tape, hidden);
  for (int t = t_len - 1; t >= 0; --t) {
    state = lstm_step(tape, bwd, inputs[t], state);
    bwd_h[t] = state.h;
  }
  std::vector<Var> out(t_len);
  for (int t = 0; t < t_len; ++t)
    out[t] = tape.concat_rows(fwd_h[t], bwd_h[t]);
  return out;
}

/// Pyramidal BLSTM: consecutive input pairs (2i, 2i+1) are concatenated
/// before the recurrence, halving the output length. An odd trailing frame
/// gets a zero-padded partner.
template <typename Scalar>
std::vector<Var> pblstm_layer(Tape<Scalar>& tape, const LstmCellVars& fwd,
                              const LstmCellVars& bwd, int hidden,
                              const std::vector<Var>& inputs) {
  if (inputs.empty())
    throw DimensionError("pblstm_layer: empty input sequence");
  using Mat = typename Tape<Scalar>::Mat;
  std::vector<Var> paired;
  paired.reserve((inputs.size() + 1) / 2);
  for (std::size_t i = 0; i + 1 < inputs.size(); i += 2)
    paired.push_back(tape.concat_rows(inputs[i], inputs[i + 1]));
  if (inputs.size() % 2 == 1) {
    Var last = inputs.back();
    Var pad = tape.input(Mat::Zero(tape.value(last).rows(), 1));
    paired.push_back(tape.concat_rows(last, pad));
  }
  return blstm_layer(tape, fwd, bwd, hidden, paired);
}

template <typename Scalar>
void init_uniform(typename Tape<Scalar>::Mat& m, std::mt19937_64& rng,
                  Scalar range = Scalar(0.1)) {
  std::uniform_real_distribution<double> dist(-double(range), double(range));
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m(i) = static_cast<Scalar>(dist(rng));
}

}  // namespace las
