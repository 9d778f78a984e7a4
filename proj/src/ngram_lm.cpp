#include "calibkit/ngram_lm.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "calibkit/error.hpp"

namespace calibkit {
namespace {

std::string join(std::span<const std::string> parts) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out.push_back(' ');
    out += p;
  }
  return out;
}

std::vector<std::string> split_spaces(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  std::string word;
  while (in >> word) out.push_back(word);
  return out;
}

std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::vector<std::string> lm_tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isspace(u)) {
      flush();
    } else if (u < 0x80 && std::ispunct(u)) {
      flush();
      out.emplace_back(1, c);
    } else {
      current.push_back(c);
    }
  }
  flush();
  return out;
}

NGramModel NGramModel::train(std::span<const std::string> corpus, std::size_t order,
                             double smoothing_k) {
  if (order < 1) throw Error("n-gram order must be at least 1");
  if (!(smoothing_k > 0.0) || !std::isfinite(smoothing_k))
    throw Error("smoothing k must be positive");
  NGramModel model;
  model.order_ = order;
  model.smoothing_k_ = smoothing_k;
  bool any = false;
  for (const auto& sentence : corpus) {
    const auto tokens = lm_tokenize(sentence);
    if (tokens.empty()) continue;
    any = true;
    model.vocabulary_.insert(tokens.begin(), tokens.end());
    const auto seq = model.scored_sequence(tokens);
    for (std::size_t i = order - 1; i < seq.size(); ++i) {
      Context ctx(seq.begin() + static_cast<std::ptrdiff_t>(i - (order - 1)),
                  seq.begin() + static_cast<std::ptrdiff_t>(i));
      ++model.counts_[ctx][seq[i]];
    }
  }
  if (!any) throw Error("cannot train a language model on an empty corpus");
  model.finalize();
  return model;
}

void NGramModel::finalize() {
  vocabulary_.insert(std::string(kUnkToken));
  vocabulary_.insert(std::string(kEndToken));
  context_totals_.clear();
  for (const auto& [ctx, next] : counts_) {
    std::size_t total = 0;
    for (const auto& [token, count] : next) total += count;
    context_totals_[ctx] = total;
  }
}

std::string NGramModel::map_token(const std::string& token) const {
  return vocabulary_.contains(token) ? token : std::string(kUnkToken);
}

// <s> padding, then tokens, then </s> when there is context to predict it from.
std::vector<std::string> NGramModel::scored_sequence(const std::vector<std::string>& tokens) const {
  std::vector<std::string> seq(order_ - 1, std::string(kBeginToken));
  seq.insert(seq.end(), tokens.begin(), tokens.end());
  if (order_ >= 2) seq.emplace_back(kEndToken);
  return seq;
}

double NGramModel::probability(std::span<const std::string> context, std::string_view token) const {
  const Context ctx(context.begin(), context.end());
  const std::string key(token);
  std::size_t joint = 0;
  std::size_t total = 0;
  if (auto it = counts_.find(ctx); it != counts_.end()) {
    if (auto jt = it->second.find(key); jt != it->second.end()) joint = jt->second;
    total = context_totals_.at(ctx);
  }
  const double vocab = static_cast<double>(vocabulary_.size());
  return (static_cast<double>(joint) + smoothing_k_) /
         (static_cast<double>(total) + smoothing_k_ * vocab);
}

double NGramModel::perplexity(std::string_view text) const {
  auto tokens = lm_tokenize(text);
  if (tokens.empty()) throw Error("perplexity of an empty token sequence");
  for (auto& t : tokens) t = map_token(t);
  const auto seq = scored_sequence(tokens);
  double nll = 0.0;
  std::size_t scored = 0;
  for (std::size_t i = order_ - 1; i < seq.size(); ++i) {
    const std::span<const std::string> ctx(seq.data() + (i - (order_ - 1)), order_ - 1);
    nll -= std::log(probability(ctx, seq[i]));
    ++scored;
  }
  return std::exp(nll / static_cast<double>(scored));
}

void NGramModel::write_counts(std::ostream& out) const {
  out << "#order " << order_ << "\n";
  out << "#smoothing_k " << shortest(smoothing_k_) << "\n";
  for (const auto& [ctx, next] : counts_)
    for (const auto& [token, count] : next) out << join(ctx) << '\t' << token << '\t' << count << '\n';
}

NGramModel NGramModel::read_counts(std::istream& in) {
  NGramModel model;
  bool have_order = false;
  bool have_k = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::istringstream fields(line.substr(1));
      std::string key;
      fields >> key;
      if (key == "order") {
        if (!(fields >> model.order_) || model.order_ < 1) throw ParseError("bad order", line_no);
        have_order = true;
      } else if (key == "smoothing_k") {
        if (!(fields >> model.smoothing_k_) || !(model.smoothing_k_ > 0.0))
          throw ParseError("bad smoothing_k", line_no);
        have_k = true;
      }
      continue;
    }
    if (!have_order || !have_k)
      throw ParseError("count rows must follow the #order and #smoothing_k lines", line_no);
    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string::npos ? tab1 : line.find('\t', tab1 + 1);
    if (tab2 == std::string::npos) throw ParseError("expected context<TAB>token<TAB>count", line_no);
    Context ctx = split_spaces(std::string_view(line).substr(0, tab1));
    const std::string token = line.substr(tab1 + 1, tab2 - tab1 - 1);
    const std::string count_text = line.substr(tab2 + 1);
    std::size_t count = 0;
    auto [ptr, ec] = std::from_chars(count_text.data(), count_text.data() + count_text.size(), count);
    if (ec != std::errc() || ptr != count_text.data() + count_text.size() || count == 0)
      throw ParseError("bad count '" + count_text + "'", line_no);
    if (ctx.size() != model.order_ - 1)
      throw ParseError("context has " + std::to_string(ctx.size()) + " tokens, expected " +
                           std::to_string(model.order_ - 1),
                       line_no);
    if (token.empty()) throw ParseError("empty token", line_no);
    model.counts_[ctx][token] += count;
    if (token != kEndToken) model.vocabulary_.insert(token);
  }
  if (!have_order || !have_k) throw ParseError("missing #order or #smoothing_k", line_no);
  if (model.counts_.empty()) throw ParseError("count table has no rows", line_no);
  model.finalize();
  return model;
}

void NGramModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write count table '" + path.string() + "'");
  write_counts(out);
}

NGramModel NGramModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open count table '" + path.string() + "'");
  return read_counts(in);
}

NGramModel train_lm(std::span<const std::string> corpus, std::size_t order, double smoothing_k) {
  return NGramModel::train(corpus, order, smoothing_k);
}

double perplexity(const NGramModel& model, std::string_view text) { return model.perplexity(text); }

}  // namespace calibkit
