#include "las/lm.hpp"

#include "las/wer.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace las {

namespace {

constexpr const char* kSentStart = "<s>";
constexpr const char* kSentEnd = "</s>";
constexpr const char* kUnkWord = "<unk_w>";

std::string join(const std::vector<std::string>& words, std::size_t begin,
                 std::size_t end) {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) out.push_back(' ');
    out += words[i];
  }
  return out;
}

}  // namespace

std::string NGramModel::map_word(const std::string& w) const {
  if (w == kSentEnd || w == kSentStart) return w;
  return vocab_.count(w) ? w : kUnkWord;
}

NGramModel NGramModel::fit(const std::vector<std::string>& corpus, int order,
                           double k) {
  if (corpus.empty()) throw LmError("fit: empty corpus");
  if (order < 1) throw LmError("fit: order must be >= 1");
  NGramModel m;
  m.order_ = order;
  m.k_ = k;
  m.ngrams_.resize(order);
  for (const auto& line : corpus) {
    std::vector<std::string> tokens(order - 1, kSentStart);
    for (const auto& w : split_words(line)) {
      tokens.push_back(w);
      ++m.vocab_[w];
    }
    tokens.push_back(kSentEnd);
    // Every real word and the </s> event is a prediction target.
    for (std::size_t p = order - 1; p < tokens.size(); ++p)
      for (int o = 1; o <= order; ++o)
        ++m.ngrams_[o - 1][join(tokens, p + 1 - o, p + 1)];
  }
  m.rebuild_context_totals();
  return m;
}

void NGramModel::rebuild_context_totals() {
  context_totals_.assign(order_, {});
  for (int o = 1; o <= order_; ++o) {
    for (const auto& [gram, count] : ngrams_[o - 1]) {
      const std::size_t cut = gram.rfind(' ');
      const std::string ctx = cut == std::string::npos ? "" : gram.substr(0, cut);
      context_totals_[o - 1][ctx] += count;
    }
  }
}

double NGramModel::cond_log_prob(const std::vector<std::string>& context,
                                 const std::string& word) const {
  std::vector<std::string> ctx(order_ - 1, kSentStart);
  for (std::size_t i = 0; i < context.size() && i < std::size_t(order_ - 1); ++i)
    ctx[order_ - 1 - 1 - i] = map_word(context[context.size() - 1 - i]);
  const std::string w = map_word(word);
  std::string key = join(ctx, 0, ctx.size());
  const std::string ctx_key = key;
  if (!key.empty()) key.push_back(' ');
  key += w;
  long c = 0, total = 0;
  if (auto it = ngrams_[order_ - 1].find(key); it != ngrams_[order_ - 1].end())
    c = it->second;
  if (auto it = context_totals_[order_ - 1].find(ctx_key);
      it != context_totals_[order_ - 1].end())
    total = it->second;
  return std::log(static_cast<double>(c) + k_) -
         std::log(static_cast<double>(total) + k_ * event_space());
}

double NGramModel::log_prob(const std::string& normalized_text) const {
  std::vector<std::string> words = split_words(normalized_text);
  double total = 0.0;
  std::vector<std::string> context;
  for (const auto& w : words) {
    total += cond_log_prob(context, w);
    context.push_back(w);
  }
  total += cond_log_prob(context, kSentEnd);
  return total;
}

void NGramModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw LmError("cannot open for write: " + path);
  nlohmann::json header = {
      {"n", order_}, {"k", k_}, {"vocab_size", vocab_size()}};
  out << header.dump() << "\n";
  for (int o = 1; o <= order_; ++o)
    for (const auto& [gram, count] : ngrams_[o - 1])
      out << gram << "\t" << count << "\n";
  if (!out) throw LmError("write failed: " + path);
}

NGramModel NGramModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LmError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw LmError("empty model file: " + path);
  nlohmann::json header = nlohmann::json::parse(line);
  NGramModel m;
  m.order_ = header.at("n").get<int>();
  m.k_ = header.at("k").get<double>();
  m.ngrams_.resize(m.order_);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::size_t tab = line.rfind('\t');
    if (tab == std::string::npos) throw LmError("malformed count line: " + line);
    const std::string gram = line.substr(0, tab);
    const long count = std::stol(line.substr(tab + 1));
    const int o = 1 + static_cast<int>(
                          std::count(gram.begin(), gram.end(), ' '));
    if (o < 1 || o > m.order_) throw LmError("bad n-gram order: " + gram);
    m.ngrams_[o - 1][gram] = count;
    if (o == 1 && gram != kSentEnd) m.vocab_[gram] = count;
  }
  m.rebuild_context_totals();
  const int expect = header.at("vocab_size").get<int>();
  if (m.vocab_size() != expect)
    throw LmError("vocab size mismatch after load");
  return m;
}

}  // namespace las
