// Command-line front end: corpus generation, training, decoding, rescoring,
// evaluation, beam sweeps, and attention export.

#include "las/attention_export.hpp"
#include "las/beam.hpp"
#include "las/checkpoint.hpp"
#include "las/train.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct LoadedData {
  std::vector<las::Utterance> utts;
};

LoadedData load_dataset(const std::string& manifest_path,
                        const las::Vocabulary& vocab) {
  const las::Manifest manifest = las::read_manifest(manifest_path);
  const std::string root = fs::path(manifest_path).parent_path().string();
  LoadedData data;
  for (const auto& e : manifest) {
    las::Utterance u;
    u.utt_id = e.utt_id;
    u.transcript = las::normalize(e.transcript);
    u.tokens = vocab.encode(u.transcript);
    u.features =
        las::read_features((fs::path(root.empty() ? "." : root) / e.path).string());
    data.utts.push_back(std::move(u));
  }
  return data;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw las::IoError("cannot open config: " + path);
  return json::parse(in);
}

las::ModelConfig model_config_from_json(const json& j) {
  las::ModelConfig mc;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).template get<std::decay_t<decltype(field)>>();
  };
  get("input_dim", mc.input_dim);
  get("enc_hidden_per_dir", mc.enc_hidden_per_dir);
  get("pyramid_layers", mc.pyramid_layers);
  get("dec_hidden", mc.dec_hidden);
  get("embed_dim", mc.embed_dim);
  get("key_width", mc.key_width);
  get("char_hidden", mc.char_hidden);
  get("init_range", mc.init_range);
  get("forget_bias", mc.forget_bias);
  return mc;
}

las::TrainConfig train_config_from_json(const json& j) {
  las::TrainConfig tc;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).template get<std::decay_t<decltype(field)>>();
  };
  get("learning_rate", tc.learning_rate);
  get("decay_factor", tc.decay_factor);
  get("decay_interval", tc.decay_interval);
  get("sampling_rate", tc.sampling_rate);
  get("batch_size", tc.batch_size);
  get("max_epochs", tc.max_epochs);
  get("clip_norm", tc.clip_norm);
  get("checkpoint_every", tc.checkpoint_every);
  return tc;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw las::IoError("cannot open: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

struct DecodeOutputs {
  std::vector<std::string> refs, hyps;
  std::vector<std::vector<las::ScoredHypothesis>> nbest;
};

DecodeOutputs decode_all(las::ModelParams<float>& params,
                         const las::Vocabulary& vocab, const LoadedData& data,
                         int beam, const las::DictTrie* dict = nullptr) {
  DecodeOutputs out;
  for (const auto& u : data.utts) {
    out.refs.push_back(u.transcript);
    auto hyps = las::decode_utterance(params, u.features, vocab, beam, 0, dict);
    out.hyps.push_back(hyps.empty() ? "" : hyps.front().text);
    out.nbest.push_back(std::move(hyps));
  }
  return out;
}

void write_nbest_jsonl(const std::string& path, const LoadedData& data,
                       const DecodeOutputs& out) {
  std::ofstream os(path);
  if (!os) throw las::IoError("cannot open for write: " + path);
  for (std::size_t i = 0; i < data.utts.size(); ++i) {
    json entries = json::array();
    for (const auto& h : out.nbest[i]) {
      json e = {{"text", h.text},
                {"log_prob", h.log_prob},
                {"norm_score", h.norm_score},
                {"complete", h.complete}};
      if (h.lm_log_prob) e["lm_log_prob"] = *h.lm_log_prob;
      if (h.combined) e["combined"] = *h.combined;
      entries.push_back(std::move(e));
    }
    json line = {{"utt_id", data.utts[i].utt_id},
                 {"ref", data.utts[i].transcript},
                 {"nbest", std::move(entries)}};
    os << line.dump() << "\n";
  }
  if (!os) throw las::IoError("write failed: " + path);
}

double corpus_wer(const std::vector<std::string>& refs,
                  const std::vector<std::string>& hyps, bool strip_unk = true) {
  long edits = 0, words = 0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto b = las::wer(refs[i], hyps[i], strip_unk);
    edits += b.edits();
    words += b.ref_words;
  }
  return words > 0 ? static_cast<double>(edits) / words : 0.0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Listen-attend-spell style character transcriber"};
  app.require_subcommand(1);

  std::string config_path, manifest_path, checkpoint_path, lm_path, out_path;
  std::string dict_path, ref_path, hyp_path, nbest_path, beams_arg = "1,2,4,8";
  std::uint64_t seed = 1;
  int beam = 8, workers = 1, count = 200, min_words = 2, max_words = 5;
  double lambda = 0.0, sigma = 0.1;
  int dim = 40;
  bool keep_unk = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--seed", seed, "RNG seed");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "Generate a synthetic corpus");
  add_common(gen);
  gen->add_option("--out", out_path, "Corpus root directory")->required();
  gen->add_option("--count", count, "Number of utterances");
  gen->add_option("--min-words", min_words, "Minimum words per utterance");
  gen->add_option("--max-words", max_words, "Maximum words per utterance");
  gen->add_option("--dim", dim, "Feature dimension");
  gen->add_option("--sigma", sigma, "Per-frame noise sigma");

  CLI::App* train = app.add_subcommand("train", "Train from a manifest");
  add_common(train);
  train->add_option("--manifest", manifest_path, "Training manifest")->required();
  train->add_option("--out", out_path, "Checkpoint output path")->required();
  train->add_option("--checkpoint", checkpoint_path,
                    "Resume from this checkpoint");
  train->add_option("--workers", workers, "Gradient worker threads");

  CLI::App* decode = app.add_subcommand("decode", "Beam-search decode");
  add_common(decode);
  decode->add_option("--manifest", manifest_path, "Manifest")->required();
  decode->add_option("--checkpoint", checkpoint_path, "Model checkpoint")
      ->required();
  decode->add_option("--beam", beam, "Beam width");
  decode->add_option("--dict", dict_path, "Dictionary word list (one per line)");
  decode->add_option("--out", out_path, "n-best JSONL output")->required();

  CLI::App* rescore = app.add_subcommand("rescore", "LM-rescore an n-best list");
  add_common(rescore);
  rescore->add_option("--in", nbest_path, "n-best JSONL from decode")->required();
  rescore->add_option("--lm", lm_path, "n-gram model file")->required();
  rescore->add_option("--fit-from", manifest_path,
                      "Fit a trigram model from this manifest's transcripts "
                      "and save it to --lm first");
  rescore->add_option("--lambda", lambda, "LM weight");
  rescore->add_option("--out", out_path, "Rescored JSONL output")->required();

  CLI::App* eval = app.add_subcommand("eval", "Score hypothesis files");
  add_common(eval);
  eval->add_option("--ref", ref_path, "Reference text, one per line")->required();
  eval->add_option("--hyp", hyp_path, "Hypothesis text, one per line")
      ->required();
  eval->add_flag("--keep-unk", keep_unk, "Score unknown placeholders literally");
  eval->add_option("--train-manifest", manifest_path,
                   "Training manifest for recall-by-frequency");
  eval->add_option("--out", out_path, "JSON report output (default stdout)");

  CLI::App* sweep = app.add_subcommand("beam-sweep", "WER across beam widths");
  add_common(sweep);
  sweep->add_option("--manifest", manifest_path, "Manifest")->required();
  sweep->add_option("--checkpoint", checkpoint_path, "Model checkpoint")
      ->required();
  sweep->add_option("--beams", beams_arg, "Comma-separated beam widths");
  sweep->add_option("--out", out_path, "CSV output")->required();

  CLI::App* attn = app.add_subcommand("attention-dump", "Export alignments");
  add_common(attn);
  attn->add_option("--manifest", manifest_path, "Manifest")->required();
  attn->add_option("--checkpoint", checkpoint_path, "Model checkpoint")
      ->required();
  attn->add_option("--out", out_path, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  las::Vocabulary vocab;
  try {
    if (gen->parsed()) {
      las::SynthConfig sc;
      sc.seed = seed;
      sc.feature_dim = dim;
      sc.noise_sigma = static_cast<float>(sigma);
      const auto& words = las::builtin_words();
      std::mt19937_64 rng(seed);
      std::uniform_int_distribution<int> nwords(min_words, max_words);
      std::uniform_int_distribution<int> pick(0,
                                              static_cast<int>(words.size()) - 1);
      std::vector<std::string> texts;
      for (int i = 0; i < count; ++i) {
        std::string t;
        const int n = nwords(rng);
        for (int w = 0; w < n; ++w) {
          if (w) t.push_back(' ');
          t += words[pick(rng)];
        }
        texts.push_back(std::move(t));
      }
      las::gen_corpus(sc, vocab, texts, out_path);
      std::cout << "wrote " << count << " utterances under " << out_path
                << "\n";
    } else if (train->parsed()) {
      json cfg = config_path.empty() ? json::object()
                                     : read_json_file(config_path);
      las::TrainConfig tc = train_config_from_json(cfg);
      tc.seed = seed;
      tc.workers = workers;
      LoadedData data = load_dataset(manifest_path, vocab);
      las::ModelParams<float> params;
      if (!checkpoint_path.empty()) {
        params = las::load_checkpoint(checkpoint_path).params;
      } else {
        las::ModelConfig mc = model_config_from_json(cfg);
        if (!data.utts.empty())
          mc.input_dim = static_cast<int>(data.utts.front().features.cols());
        params =
            las::ModelParams<float>::sized(mc, vocab.size(), vocab.output_size());
        params.init(seed);
      }
      las::train(
          tc, data.utts, params, vocab,
          [](const las::StepInfo& s) {
            std::cout << las::step_info_json(s) << "\n";
          },
          [&](las::Checkpoint& ckpt) { las::save_checkpoint(out_path, ckpt); });
      std::cout << "checkpoint written to " << out_path << "\n";
    } else if (decode->parsed()) {
      las::ModelParams<float> params =
          las::load_checkpoint(checkpoint_path).params;
      LoadedData data = load_dataset(manifest_path, vocab);
      las::DictTrie trie;
      bool use_dict = false;
      if (!dict_path.empty()) {
        for (const auto& w : read_lines(dict_path))
          if (!las::normalize(w).empty()) {
            trie.insert(las::normalize(w));
            use_dict = true;
          }
      }
      DecodeOutputs out =
          decode_all(params, vocab, data, beam, use_dict ? &trie : nullptr);
      write_nbest_jsonl(out_path, data, out);
      std::cout << "WER " << 100.0 * corpus_wer(out.refs, out.hyps) << "%\n";
    } else if (rescore->parsed()) {
      if (!manifest_path.empty()) {
        std::vector<std::string> texts;
        for (const auto& e : las::read_manifest(manifest_path))
          texts.push_back(las::normalize(e.transcript));
        las::NGramModel::fit(texts, 3, 0.1).save(lm_path);
      }
      las::NGramModel lm = las::NGramModel::load(lm_path);
      std::ofstream os(out_path);
      if (!os) throw las::IoError("cannot open for write: " + out_path);
      for (const auto& line : read_lines(nbest_path)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        std::vector<las::ScoredHypothesis> hyps;
        for (const auto& e : j.at("nbest")) {
          las::ScoredHypothesis h;
          h.text = e.at("text").get<std::string>();
          h.log_prob = e.at("log_prob").get<double>();
          h.norm_score = e.at("norm_score").get<double>();
          h.complete = e.at("complete").get<bool>();
          hyps.push_back(std::move(h));
        }
        hyps = las::rescore(std::move(hyps), &lm, lambda);
        json entries = json::array();
        for (const auto& h : hyps)
          entries.push_back({{"text", h.text},
                             {"log_prob", h.log_prob},
                             {"norm_score", h.norm_score},
                             {"complete", h.complete},
                             {"lm_log_prob", *h.lm_log_prob},
                             {"combined", *h.combined}});
        j["nbest"] = std::move(entries);
        os << j.dump() << "\n";
      }
    } else if (eval->parsed()) {
      std::vector<std::string> refs = read_lines(ref_path);
      std::vector<std::string> hyps = read_lines(hyp_path);
      if (refs.size() != hyps.size())
        throw las::EvalError("ref/hyp line counts differ");
      json report;
      long s = 0, i = 0, d = 0, words = 0;
      for (std::size_t u = 0; u < refs.size(); ++u) {
        const auto b = las::wer(las::normalize(refs[u]), las::normalize(hyps[u]),
                                !keep_unk);
        s += b.substitutions;
        i += b.insertions;
        d += b.deletions;
        words += b.ref_words;
      }
      report["wer_percent"] = 100.0 * (s + i + d) / words;
      report["substitutions"] = s;
      report["insertions"] = i;
      report["deletions"] = d;
      report["ref_words"] = words;
      json lengths = json::array();
      for (const auto& row : las::error_by_length(refs, hyps))
        lengths.push_back({{"word_count", row.word_count},
                           {"utterances", row.utterances},
                           {"mean_substitutions", row.mean_substitutions},
                           {"mean_insertions", row.mean_insertions},
                           {"mean_deletions", row.mean_deletions},
                           {"mean_wer", row.mean_wer}});
      report["by_length"] = std::move(lengths);
      if (!manifest_path.empty()) {
        std::vector<std::string> train_texts;
        for (const auto& e : las::read_manifest(manifest_path))
          train_texts.push_back(e.transcript);
        json recall = json::array();
        for (const auto& r :
             las::recall_by_frequency(train_texts, refs, hyps))
          recall.push_back({{"word", r.word},
                            {"train_count", r.train_count},
                            {"occurrences", r.occurrences},
                            {"recall", r.recall}});
        report["recall"] = std::move(recall);
      }
      if (out_path.empty()) {
        std::cout << report.dump(2) << "\n";
      } else {
        std::ofstream os(out_path);
        os << report.dump(2) << "\n";
        if (!os) throw las::IoError("write failed: " + out_path);
      }
    } else if (sweep->parsed()) {
      las::ModelParams<float> params =
          las::load_checkpoint(checkpoint_path).params;
      LoadedData data = load_dataset(manifest_path, vocab);
      std::ofstream os(out_path);
      if (!os) throw las::IoError("cannot open for write: " + out_path);
      os << "beam,wer_percent,oracle_wer_percent\n";
      std::stringstream beams(beams_arg);
      std::string tok;
      while (std::getline(beams, tok, ',')) {
        const int b = std::stoi(tok);
        DecodeOutputs out = decode_all(params, vocab, data, b);
        double oracle_edit_frac = 0.0;
        long words = 0, oracle_edits = 0;
        for (std::size_t u = 0; u < data.utts.size(); ++u) {
          const auto best = las::oracle_wer(out.nbest[u], out.refs[u]);
          const auto breakdown =
              las::wer(out.refs[u], out.nbest[u][best.second].text);
          oracle_edits += breakdown.edits();
          words += breakdown.ref_words;
        }
        oracle_edit_frac = words > 0
                               ? static_cast<double>(oracle_edits) / words
                               : 0.0;
        os << b << "," << 100.0 * corpus_wer(out.refs, out.hyps) << ","
           << 100.0 * oracle_edit_frac << "\n";
      }
      if (!os) throw las::IoError("write failed: " + out_path);
    } else if (attn->parsed()) {
      las::ModelParams<float> params =
          las::load_checkpoint(checkpoint_path).params;
      LoadedData data = load_dataset(manifest_path, vocab);
      fs::create_directories(out_path);
      for (const auto& u : data.utts) {
        auto trace =
            las::greedy_decode_with_attention(params, u.features, vocab);
        las::write_attention_csv(
            (fs::path(out_path) / (u.utt_id + ".csv")).string(), trace, vocab);
      }
      std::cout << "wrote " << data.utts.size() << " alignment files\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
