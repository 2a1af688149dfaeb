#pragma once

#include "las/attend_spell.hpp"

#include <functional>
#include <string>

namespace las {

struct ModelConfig {
  int input_dim = 40;
  int enc_hidden_per_dir = 256;
  int pyramid_layers = 3;
  int dec_hidden = 512;
  int embed_dim = 64;
  int key_width = 128;
  int char_hidden = 128;
  double init_range = 0.1;
  double forget_bias = 1.0;

  int enc_dim() const { return 2 * enc_hidden_per_dir; }
};

/// The complete named-tensor parameter set for listener and speller.
template <typename Scalar>
struct ModelParams {
  using Mat = typename Tape<Scalar>::Mat;

  ModelConfig config;
  ListenerParams<Scalar> listener;
  SpellerParams<Scalar> speller;

  static ModelParams sized(const ModelConfig& cfg, int vocab_size,
                           int output_size) {
    ModelParams p;
    p.config = cfg;
    p.listener = ListenerParams<Scalar>::sized(cfg.input_dim,
                                               cfg.enc_hidden_per_dir,
                                               cfg.pyramid_layers);
    p.speller = SpellerParams<Scalar>::sized(vocab_size, output_size,
                                             cfg.embed_dim, cfg.dec_hidden,
                                             cfg.enc_dim(), cfg.key_width,
                                             cfg.char_hidden);
    return p;
  }

  /// Visits every tensor in a fixed, stable order. The same order is used
  /// for gradient accumulation, SGD updates, and checkpoints.
  template <typename Fn>
  void for_each_tensor(Fn&& fn) {
    auto cell = [&](const std::string& name, LstmCellParams<Scalar>& c) {
      fn(name + ".wx", c.wx);
      fn(name + ".wh", c.wh);
      fn(name + ".b", c.b);
    };
    auto mlp = [&](const std::string& name, MlpParams<Scalar>& m) {
      fn(name + ".w1", m.w1);
      fn(name + ".b1", m.b1);
      fn(name + ".w2", m.w2);
      fn(name + ".b2", m.b2);
    };
    cell("listener.bottom.fwd", listener.bottom_fwd);
    cell("listener.bottom.bwd", listener.bottom_bwd);
    for (std::size_t j = 0; j < listener.pyramid_fwd.size(); ++j) {
      const std::string base = "listener.pyramid" + std::to_string(j);
      cell(base + ".fwd", listener.pyramid_fwd[j]);
      cell(base + ".bwd", listener.pyramid_bwd[j]);
    }
    fn("speller.embedding", speller.embedding);
    cell("speller.rnn1", speller.rnn1);
    cell("speller.rnn2", speller.rnn2);
    mlp("speller.attention.phi", speller.attention.phi);
    mlp("speller.attention.psi", speller.attention.psi);
    mlp("speller.char_dist", speller.char_dist);
  }

  void init(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for_each_tensor([&](const std::string&, Mat& m) {
      init_uniform<Scalar>(m, rng, static_cast<Scalar>(config.init_range));
    });
    // Forget-gate bias offset aids small-scale trainability.
    auto forget_bias = [&](LstmCellParams<Scalar>& c) {
      const int h = c.hidden();
      c.b.middleRows(h, h).array() += static_cast<Scalar>(config.forget_bias);
    };
    forget_bias(listener.bottom_fwd);
    forget_bias(listener.bottom_bwd);
    for (std::size_t j = 0; j < listener.pyramid_fwd.size(); ++j) {
      forget_bias(listener.pyramid_fwd[j]);
      forget_bias(listener.pyramid_bwd[j]);
    }
    forget_bias(speller.rnn1);
    forget_bias(speller.rnn2);
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for_each_tensor([&](const std::string&, Mat& m) { n += m.size(); });
    return n;
  }

  template <typename Other>
  ModelParams<Other> cast() {
    ModelParams<Other> out = ModelParams<Other>::sized(
        config, static_cast<int>(speller.embedding.rows()),
        static_cast<int>(speller.char_dist.w2.rows()));
    std::vector<Mat*> src;
    for_each_tensor([&](const std::string&, Mat& m) { src.push_back(&m); });
    std::size_t i = 0;
    out.for_each_tensor(
        [&](const std::string&, typename ModelParams<Other>::Mat& m) {
          m = src[i++]->template cast<Other>();
        });
    return out;
  }
};

/// Whole model registered on a tape, with per-tensor Vars recorded in
/// traversal order so gradients can be read back against the same walk.
template <typename Scalar>
struct ModelVars {
  ListenerVars<Scalar> listener;
  SpellerVars<Scalar> speller;
  std::vector<Var> ordered;
};

template <typename Scalar>
ModelVars<Scalar> bind_model(Tape<Scalar>& tape, ModelParams<Scalar>& params) {
  ModelVars<Scalar> v;
  params.for_each_tensor(
      [&](const std::string&, typename ModelParams<Scalar>::Mat& m) {
        v.ordered.push_back(tape.input(m));
      });
  std::size_t i = 0;
  auto next = [&] { return v.ordered[i++]; };
  auto cell = [&] { return LstmCellVars{next(), next(), next()}; };
  auto mlp = [&] { return MlpVars{next(), next(), next(), next()}; };
  v.listener.hidden_per_dir = params.listener.hidden_per_dir;
  v.listener.bottom_fwd = cell();
  v.listener.bottom_bwd = cell();
  for (std::size_t j = 0; j < params.listener.pyramid_fwd.size(); ++j) {
    v.listener.pyramid_fwd.push_back(cell());
    v.listener.pyramid_bwd.push_back(cell());
  }
  v.speller.embedding = next();
  v.speller.rnn1 = cell();
  v.speller.rnn2 = cell();
  v.speller.attention = AttentionVars{mlp(), mlp()};
  v.speller.char_dist = mlp();
  v.speller.hidden = params.speller.hidden();
  return v;
}

}  // namespace las
