#include "las/data_synth.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

namespace las {

namespace {

constexpr char kFeatMagic[8] = {'L', 'A', 'S', 'F', 'E', 'A', 'T', '1'};

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

Eigen::VectorXf character_template(const SynthConfig& cfg, int symbol_index) {
  if (cfg.feature_dim < 8) throw IoError("feature_dim must be >= 8");
  Eigen::VectorXf t = Eigen::VectorXf::Zero(cfg.feature_dim);
  // Enumerate unordered coordinate pairs lexicographically; wrap with a
  // growing amplitude once pairs are exhausted so templates stay distinct.
  const int d = cfg.feature_dim;
  const long pairs = static_cast<long>(d) * (d - 1) / 2;
  const long wrap = symbol_index / pairs;
  long p = symbol_index % pairs;
  int a = 0;
  long row = d - 1;
  while (p >= row) {
    p -= row;
    ++a;
    --row;
  }
  const int b = a + 1 + static_cast<int>(p);
  const float amp = cfg.template_amplitude * (1.0f + 0.5f * wrap);
  t(a) = amp;
  t(b) = amp;
  return t;
}

std::mt19937_64 utterance_rng(std::uint64_t seed, const std::string& utt_id) {
  std::seed_seq seq{seed, fnv1a(utt_id)};
  return std::mt19937_64(seq);
}

FeatureMatrix synth_utterance(const SynthConfig& cfg, const Vocabulary& vocab,
                              const std::string& text, std::mt19937_64& rng) {
  if (text.empty()) throw IoError("synth_utterance: empty text");
  if (cfg.frames_min < 1 || cfg.frames_max < cfg.frames_min)
    throw IoError("synth_utterance: bad frames-per-character range");
  std::uniform_int_distribution<int> frames(cfg.frames_min, cfg.frames_max);
  std::normal_distribution<float> noise(0.0f, 1.0f);
  std::vector<std::pair<int, int>> plan;  // (symbol, frame count)
  int total = 0;
  for (char c : text) {
    const int n = frames(rng);
    plan.emplace_back(vocab.char_index(c), n);
    total += n;
  }
  FeatureMatrix feats(total, cfg.feature_dim);
  int row = 0;
  for (const auto& [sym, n] : plan) {
    const Eigen::VectorXf tmpl = character_template(cfg, sym);
    for (int i = 0; i < n; ++i, ++row) {
      feats.row(row) = tmpl.transpose();
      if (cfg.noise_sigma > 0.0f)
        for (int dcol = 0; dcol < cfg.feature_dim; ++dcol)
          feats(row, dcol) += cfg.noise_sigma * noise(rng);
    }
  }
  return feats;
}

void write_features(const std::string& path, const FeatureMatrix& feats) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path);
  out.write(kFeatMagic, sizeof(kFeatMagic));
  const std::uint32_t t = static_cast<std::uint32_t>(feats.rows());
  const std::uint32_t d = static_cast<std::uint32_t>(feats.cols());
  out.write(reinterpret_cast<const char*>(&t), 4);
  out.write(reinterpret_cast<const char*>(&d), 4);
  // Row-major frame order on disk.
  for (Eigen::Index r = 0; r < feats.rows(); ++r)
    for (Eigen::Index c = 0; c < feats.cols(); ++c) {
      const float v = feats(r, c);
      out.write(reinterpret_cast<const char*>(&v), 4);
    }
  if (!out) throw IoError("write failed: " + path);
}

FeatureMatrix read_features(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kFeatMagic, 8) != 0)
    throw IoError("bad feature file magic: " + path);
  std::uint32_t t = 0, d = 0;
  in.read(reinterpret_cast<char*>(&t), 4);
  in.read(reinterpret_cast<char*>(&d), 4);
  if (!in) throw IoError("truncated feature header: " + path);
  FeatureMatrix feats(t, d);
  for (std::uint32_t r = 0; r < t; ++r)
    for (std::uint32_t c = 0; c < d; ++c) {
      float v;
      in.read(reinterpret_cast<char*>(&v), 4);
      if (!in) throw IoError("truncated feature data: " + path);
      feats(r, c) = v;
    }
  return feats;
}

void write_manifest(const std::string& path, const Manifest& manifest) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for write: " + path);
  for (const auto& e : manifest)
    out << e.utt_id << "\t" << e.path << "\t" << e.transcript << "\n";
  if (!out) throw IoError("write failed: " + path);
}

Manifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  Manifest manifest;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::size_t t1 = line.find('\t');
    const std::size_t t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos)
      throw IoError("malformed manifest line in " + path + ": " + line);
    manifest.push_back(ManifestEntry{line.substr(0, t1),
                                     line.substr(t1 + 1, t2 - t1 - 1),
                                     line.substr(t2 + 1)});
  }
  return manifest;
}

Manifest gen_corpus(const SynthConfig& cfg, const Vocabulary& vocab,
                    const std::vector<std::string>& texts,
                    const std::string& root, const std::string& prefix) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(root) / "feats");
  Manifest manifest;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    ManifestEntry e;
    e.utt_id = prefix + std::to_string(i);
    e.path = "feats/" + e.utt_id + ".feat";
    e.transcript = texts[i];
    std::mt19937_64 rng = utterance_rng(cfg.seed, e.utt_id);
    const FeatureMatrix feats = synth_utterance(cfg, vocab, texts[i], rng);
    write_features((fs::path(root) / e.path).string(), feats);
    manifest.push_back(std::move(e));
  }
  write_manifest((fs::path(root) / "manifest.tsv").string(), manifest);
  return manifest;
}

std::vector<FeatureMatrix> load_features(const Manifest& manifest,
                                         const std::string& root) {
  namespace fs = std::filesystem;
  std::vector<FeatureMatrix> out;
  out.reserve(manifest.size());
  for (const auto& e : manifest)
    out.push_back(read_features((fs::path(root) / e.path).string()));
  return out;
}

const std::vector<std::string>& builtin_words() {
  static const std::vector<std::string> words = {
      "call",    "home",     "weather", "music",   "play",    "stop",
      "next",    "search",   "find",    "map",     "road",    "news",
      "time",    "alarm",    "seven",   "nine",    "four",    "eight",
      "minus",   "clinic",   "animal",  "guide",   "video",   "photo",
      "light",   "open",     "close",   "send",    "text",    "phone",
      "email",   "store",    "pizza",   "coffee",  "hotel",   "flight",
      "train",   "ticket",   "movie",   "show"};
  return words;
}

}  // namespace las
