#pragma once

#include "las/lstm.hpp"

#include <vector>

namespace las {

/// Bottom BLSTM plus a stack of pyramidal BLSTM layers. With L pyramid
/// layers the output length is ceil-halving applied L times.
template <typename Scalar>
struct ListenerParams {
  LstmCellParams<Scalar> bottom_fwd, bottom_bwd;
  std::vector<LstmCellParams<Scalar>> pyramid_fwd, pyramid_bwd;
  int hidden_per_dir = 0;

  int output_dim() const { return 2 * hidden_per_dir; }

  static ListenerParams sized(int input_dim, int hidden_per_dir,
                              int pyramid_layers) {
    ListenerParams p;
    p.hidden_per_dir = hidden_per_dir;
    p.bottom_fwd = LstmCellParams<Scalar>::zeros(input_dim, hidden_per_dir);
    p.bottom_bwd = LstmCellParams<Scalar>::zeros(input_dim, hidden_per_dir);
    // pBLSTM input = two concatenated frames of the layer below.
    for (int j = 0; j < pyramid_layers; ++j) {
      p.pyramid_fwd.push_back(
          LstmCellParams<Scalar>::zeros(4 * hidden_per_dir, hidden_per_dir));
      p.pyramid_bwd.push_back(
          LstmCellParams<Scalar>::zeros(4 * hidden_per_dir, hidden_per_dir));
    }
    return p;
  }
};

template <typename Scalar>
struct ListenerVars {
  LstmCellVars bottom_fwd, bottom_bwd;
  std::vector<LstmCellVars> pyramid_fwd, pyramid_bwd;
  int hidden_per_dir = 0;
};

template <typename Scalar>
ListenerVars<Scalar> bind(Tape<Scalar>& tape, const ListenerParams<Scalar>& p) {
  ListenerVars<Scalar> v;
  v.hidden_per_dir = p.hidden_per_dir;
  v.bottom_fwd = bind(tape, p.bottom_fwd);
  v.bottom_bwd = bind(tape, p.bottom_bwd);
  for (std::size_t j = 0; j < p.pyramid_fwd.size(); ++j) {
    v.pyramid_fwd.push_back(bind(tape, p.pyramid_fwd[j]));
    v.pyramid_bwd.push_back(bind(tape, p.pyramid_bwd[j]));
  }
  return v;
}

/// Output length after the pyramid: ceil(T/2) applied `layers` times.
inline int listener_output_length(int t_len, int layers) {
  int u = t_len;
  for (int j = 0; j < layers; ++j) u = (u + 1) / 2;
  return u;
}

/// Encodes a TxD feature matrix into U column vectors of width 2*Hdir.
template <typename Scalar>
std::vector<Var> listen(Tape<Scalar>& tape, const ListenerVars<Scalar>& p,
                        const typename Tape<Scalar>::Mat& features) {
  if (features.rows() < 1)
    throw DimensionError("listen: empty feature sequence");
  const int expected =
      static_cast<int>(tape.value(p.bottom_fwd.wx).cols());
  if (features.cols() != expected)
    throw DimensionError("listen: feature dim " +
                         std::to_string(features.cols()) + " != configured " +
                         std::to_string(expected));
  std::vector<Var> frames;
  frames.reserve(features.rows());
  for (Eigen::Index t = 0; t < features.rows(); ++t)
    frames.push_back(tape.input(features.row(t).transpose()));
  std::vector<Var> h = blstm_layer(tape, p.bottom_fwd, p.bottom_bwd,
                                   p.hidden_per_dir, frames);
  for (std::size_t j = 0; j < p.pyramid_fwd.size(); ++j)
    h = pblstm_layer(tape, p.pyramid_fwd[j], p.pyramid_bwd[j],
                     p.hidden_per_dir, h);
  return h;
}

}  // namespace las
