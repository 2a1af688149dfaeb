#pragma once

#include "las/checkpoint.hpp"
#include "las/data_synth.hpp"
#include "las/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

namespace las {

struct TrainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  double learning_rate = 0.2;
  double decay_factor = 0.98;
  // Interval in training examples; 0 means dataset_size / 20.
  long decay_interval = 0;
  double sampling_rate = 0.10;
  int batch_size = 8;
  int max_epochs = 10;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  int checkpoint_every = 0;  // steps; 0 = only at end
  int workers = 1;
};

struct Utterance {
  std::string utt_id;
  FeatureMatrix features;
  TokenSequence tokens;      // framed (<sos>, ..., <eos>)
  std::string transcript;
};

/// Counters for the sampling trick.
struct SamplingStats {
  long positions = 0;
  long sampled = 0;
};

/// Teacher-forced / sampled forward for one utterance. Returns the summed
/// log probability of the target tokens; inputs after <sos> are the ground
/// truth, except that with probability `rate` each next-step input is drawn
/// from the current character distribution (targets stay ground truth).
template <typename Scalar>
Var utterance_log_prob(Tape<Scalar>& tape, const ModelVars<Scalar>& model,
                       const FeatureMatrix& features,
                       const TokenSequence& tokens, double rate,
                       std::mt19937_64* rng, SamplingStats* stats,
                       int output_size) {
  if (tokens.size() < 2)
    throw TrainError("utterance has no framed target tokens");
  const typename Tape<Scalar>::Mat feats = features.cast<Scalar>();
  std::vector<Var> enc_frames = listen(tape, model.listener, feats);
  EncodedUtterance<Scalar> enc =
      prepare_attention(tape, model.speller, enc_frames);
  DecoderState state = initial_decoder_state(
      tape, model.speller, static_cast<int>(tape.value(enc.h_mat).cols()));
  Var total;
  int input_token = tokens.front();
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    DecoderStepResult r =
        decoder_step(tape, model.speller, state, input_token, enc);
    Var term = tape.pick(r.log_probs, tokens[i]);
    total = total.valid() ? tape.add(total, term) : term;
    state = r.state;
    if (i + 1 < tokens.size()) {
      input_token = tokens[i];
      if (rate > 0.0 && rng != nullptr) {
        if (stats) ++stats->positions;
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        if (coin(*rng) < rate) {
          if (stats) ++stats->sampled;
          // Draw from the model's current character distribution.
          const auto& lp = tape.value(r.log_probs);
          std::vector<double> probs(output_size);
          for (int s = 0; s < output_size; ++s)
            probs[s] = std::exp(static_cast<double>(lp(s, 0)));
          std::discrete_distribution<int> dist(probs.begin(), probs.end());
          input_token = dist(*rng);
        }
      }
    }
  }
  return total;
}

template <typename Scalar>
struct BatchGradients {
  double loss = 0.0;
  std::vector<typename Tape<Scalar>::Mat> grads;  // traversal order
  SamplingStats sampling;
};

/// Mean negative log probability over a batch plus parameter gradients.
/// Sampling draws use a per-utterance RNG stream derived from
/// (seed, epoch, utt_id) so batch composition does not perturb them.
template <typename Scalar>
BatchGradients<Scalar> batch_gradients(ModelParams<Scalar>& params,
                                       const std::vector<const Utterance*>& batch,
                                       double sampling_rate,
                                       std::uint64_t sampling_seed,
                                       int output_size,
                                       bool compute_grads = true) {
  if (batch.empty()) throw TrainError("empty batch");
  Tape<Scalar> tape;
  ModelVars<Scalar> model = bind_model(tape, params);
  Var total;
  BatchGradients<Scalar> out;
  for (const Utterance* utt : batch) {
    std::optional<std::mt19937_64> rng;
    if (sampling_rate > 0.0)
      rng = utterance_rng(sampling_seed, utt->utt_id);
    Var lp = utterance_log_prob(tape, model, utt->features, utt->tokens,
                                sampling_rate, rng ? &*rng : nullptr,
                                &out.sampling, output_size);
    total = total.valid() ? tape.add(total, lp) : lp;
  }
  Var loss = tape.mul_scalar(total, Scalar(-1) / Scalar(batch.size()));
  out.loss = static_cast<double>(tape.value(loss)(0, 0));
  if (compute_grads) {
    tape.backward(loss);
    out.grads.reserve(model.ordered.size());
    for (Var v : model.ordered) out.grads.push_back(tape.grad(v));
  }
  return out;
}

/// Mean teacher-forced loss only (the Eq.-style objective value).
template <typename Scalar>
double batch_loss(ModelParams<Scalar>& params,
                  const std::vector<const Utterance*>& batch,
                  int output_size) {
  return batch_gradients(params, batch, 0.0, 0, output_size, false).loss;
}

/// Scales gradients so their global L2 norm is at most `clip_norm`.
template <typename Mat>
double clip_gradients(std::vector<Mat>& grads, double clip_norm) {
  double sq = 0.0;
  for (const Mat& g : grads) sq += static_cast<double>(g.squaredNorm());
  const double norm = std::sqrt(sq);
  if (clip_norm > 0.0 && norm > clip_norm) {
    const auto scale = static_cast<typename Mat::Scalar>(clip_norm / norm);
    for (Mat& g : grads) g *= scale;
  }
  return norm;
}

struct StepInfo {
  long step = 0;
  double loss = 0.0;
  double lr = 0.0;
  double wall_ms = 0.0;
};

using StepSink = std::function<void(const StepInfo&)>;
using CheckpointSink = std::function<void(Checkpoint&)>;

inline std::string step_info_json(const StepInfo& s) {
  nlohmann::json j = {
      {"step", s.step}, {"loss", s.loss}, {"lr", s.lr}, {"wall_ms", s.wall_ms}};
  return j.dump();
}

inline double decayed_lr(const TrainConfig& cfg, long examples_processed,
                         long interval) {
  const long decays = interval > 0 ? examples_processed / interval : 0;
  return cfg.learning_rate * std::pow(cfg.decay_factor, decays);
}

/// Length-bucketed minibatch order for one epoch: a seeded shuffle, then a
/// stable sort by frame count so each batch holds similar-length utterances.
inline std::vector<std::vector<int>> epoch_batches(
    const std::vector<Utterance>& data, int batch_size, std::mt19937_64& rng) {
  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return data[a].features.rows() < data[b].features.rows();
  });
  std::vector<std::vector<int>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    std::vector<int> b(order.begin() + i,
                       order.begin() + std::min(i + batch_size, order.size()));
    batches.push_back(std::move(b));
  }
  std::shuffle(batches.begin(), batches.end(), rng);
  return batches;
}

/// Minibatch SGD with geometric LR decay, gradient clipping, and optional
/// synchronized multi-worker gradient averaging. Deterministic for
/// workers == 1 and a fixed seed.
template <typename Scalar>
void train(const TrainConfig& cfg, const std::vector<Utterance>& dataset,
           ModelParams<Scalar>& params, const Vocabulary& vocab,
           const StepSink& on_step = {}, const CheckpointSink& on_checkpoint = {}) {
  if (dataset.empty()) throw TrainError("empty dataset");
  using Mat = typename Tape<Scalar>::Mat;
  const int output_size = vocab.output_size();
  const long interval = cfg.decay_interval > 0
                            ? cfg.decay_interval
                            : std::max<long>(1, dataset.size() / 20);
  std::mt19937_64 order_rng(cfg.seed);
  long step = 0;
  long examples = 0;

  auto emit_checkpoint = [&] {
    if (!on_checkpoint) return;
    Checkpoint ckpt;
    ckpt.vocab_symbols = vocab.symbols();
    if constexpr (std::is_same_v<Scalar, float>)
      ckpt.params = params;
    else
      ckpt.params = params.template cast<float>();
    ckpt.step = static_cast<std::uint64_t>(step);
    std::ostringstream rs;
    rs << order_rng;
    ckpt.rng_state = rs.str();
    ckpt.config_json = serialize_model_config(params.config);
    on_checkpoint(ckpt);
  };

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const std::uint64_t sampling_seed =
        cfg.seed * 0x9e3779b97f4a7c15ull + static_cast<std::uint64_t>(epoch);
    for (const auto& batch_idx : epoch_batches(dataset, cfg.batch_size,
                                               order_rng)) {
      const auto t0 = std::chrono::steady_clock::now();
      std::vector<const Utterance*> batch;
      for (int i : batch_idx) batch.push_back(&dataset[i]);

      auto batch_ids = [&] {
        std::string ids;
        for (const Utterance* u : batch) ids += u->utt_id + " ";
        return ids;
      };

      BatchGradients<Scalar> bg;
      const int workers =
          std::min<int>(std::max(1, cfg.workers), static_cast<int>(batch.size()));
      try {
      if (workers == 1) {
        bg = batch_gradients(params, batch, cfg.sampling_rate, sampling_seed,
                             output_size);
      } else {
        // Disjoint micro-batches against the shared read-only parameters;
        // one reducer averages the per-worker means by example count.
        std::vector<BatchGradients<Scalar>> parts(workers);
        std::vector<std::vector<const Utterance*>> micro(workers);
        for (std::size_t i = 0; i < batch.size(); ++i)
          micro[i % workers].push_back(batch[i]);
        std::vector<std::thread> threads;
        for (int w = 0; w < workers; ++w)
          threads.emplace_back([&, w] {
            parts[w] = batch_gradients(params, micro[w], cfg.sampling_rate,
                                       sampling_seed, output_size);
          });
        for (auto& t : threads) t.join();
        bg.grads.clear();
        double weighted_loss = 0.0;
        for (int w = 0; w < workers; ++w) {
          const double frac =
              static_cast<double>(micro[w].size()) / batch.size();
          weighted_loss += frac * parts[w].loss;
          bg.sampling.positions += parts[w].sampling.positions;
          bg.sampling.sampled += parts[w].sampling.sampled;
          for (std::size_t g = 0; g < parts[w].grads.size(); ++g) {
            Mat scaled = parts[w].grads[g] * static_cast<Scalar>(frac);
            if (w == 0)
              bg.grads.push_back(std::move(scaled));
            else
              bg.grads[g] += scaled;
          }
        }
        bg.loss = weighted_loss;
      }
      } catch (const NumericError& e) {
        throw TrainError("training diverged (" + std::string(e.what()) +
                         ") on batch: " + batch_ids());
      }

      if (!std::isfinite(bg.loss))
        throw TrainError("training diverged (non-finite loss) on batch: " +
                         batch_ids());
      clip_gradients(bg.grads, cfg.clip_norm);
      const double lr = decayed_lr(cfg, examples, interval);
      std::size_t gi = 0;
      params.for_each_tensor([&](const std::string&, Mat& m) {
        m -= static_cast<Scalar>(lr) * bg.grads[gi++];
      });

      ++step;
      examples += static_cast<long>(batch.size());
      if (on_step) {
        StepInfo info;
        info.step = step;
        info.loss = bg.loss;
        info.lr = lr;
        info.wall_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - t0)
                           .count();
        on_step(info);
      }
      if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0)
        emit_checkpoint();
    }
  }
  emit_checkpoint();
}

}  // namespace las
