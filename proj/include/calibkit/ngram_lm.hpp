#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace calibkit {

inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kBeginToken = "<s>";
inline constexpr std::string_view kEndToken = "</s>";

// Whitespace-delimited words with every ASCII punctuation character split off
// as its own token.
std::vector<std::string> lm_tokenize(std::string_view text);

// Add-k smoothed n-gram model:
//   P(w | ctx) = (c(ctx, w) + k) / (c(ctx) + k |V|)
// V holds the training tokens plus <unk> and </s>. Sentences are padded with
// order-1 <s> markers; when order >= 2 each sentence also predicts </s>.
class NGramModel {
 public:
  using Context = std::vector<std::string>;

  static NGramModel train(std::span<const std::string> corpus, std::size_t order = 3,
                          double smoothing_k = 0.1);

  std::size_t order() const { return order_; }
  double smoothing_k() const { return smoothing_k_; }
  const std::set<std::string>& vocabulary() const { return vocabulary_; }

  // `context` holds the order-1 preceding tokens (already mapped to <unk>).
  double probability(std::span<const std::string> context, std::string_view token) const;

  // exp(mean negative log-likelihood per scored token). Throws Error when the
  // text has no tokens.
  double perplexity(std::string_view text) const;

  // Count table: "#order <n>", "#smoothing_k <k>", then one
  // "<context>\t<token>\t<count>" line per n-gram, context tokens joined by
  // single spaces. Lines are sorted, so output is deterministic.
  void write_counts(std::ostream& out) const;
  static NGramModel read_counts(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static NGramModel load(const std::filesystem::path& path);

  bool operator==(const NGramModel&) const = default;

 private:
  std::string map_token(const std::string& token) const;
  std::vector<std::string> scored_sequence(const std::vector<std::string>& tokens) const;
  void finalize();

  std::size_t order_ = 3;
  double smoothing_k_ = 0.1;
  std::set<std::string> vocabulary_;
  std::map<Context, std::map<std::string, std::size_t>> counts_;
  std::map<Context, std::size_t> context_totals_;
};

NGramModel train_lm(std::span<const std::string> corpus, std::size_t order = 3,
                    double smoothing_k = 0.1);
double perplexity(const NGramModel& model, std::string_view text);

}  // namespace calibkit
