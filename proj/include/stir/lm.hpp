#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace stir {

using WordId = std::uint32_t;

struct KnOptions {
  double discount = 0.75;
  bool hapax_to_unk = true;
};

/// Distribution over the continuations observed after a context, with the
/// remaining probability mass spread uniformly over the unseen vocabulary.
struct ContinuationDistribution {
  std::vector<WordId> context;
  std::map<WordId, double> support;
  double unseen_mass = 0.0;
  std::size_t unseen_count = 0;
  double lambda = 0.0;  // unseen_mass / unseen_count
};

/// -sum p log p over the support plus n * lambda * log lambda for the tail.
double uniform_tail_entropy(const ContinuationDistribution& d);

/// Interpolated Kneser-Ney n-gram model over a closed vocabulary.
///
/// Contexts live in a trie keyed most-recent-word first, so the path to a
/// context passes through every shorter context it backs off to. The top
/// level stores raw counts, lower levels continuation counts. Histories are
/// given oldest-first; short histories are left-padded with <s>.
class NGramModel {
 public:
  static constexpr WordId kUnk = 0;
  static constexpr WordId kEos = 1;
  static constexpr WordId kBos = 2;

  NGramModel(NGramModel&&) noexcept;
  NGramModel& operator=(NGramModel&&) noexcept;
  ~NGramModel();

  int order() const { return order_; }
  double discount() const { return discount_; }

  /// Size of the predicted vocabulary (every type except <s>).
  std::size_t vocab_size() const { return words_.size() - 1; }
  std::size_t id_count() const { return words_.size(); }
  WordId id(std::string_view word) const;
  const std::string& word(WordId id) const { return words_.at(id); }
  bool known(std::string_view word) const;

  double prob(WordId w, std::span<const WordId> history) const;
  double prob(std::string_view w, std::span<const std::string> history) const;
  double log2prob(WordId w, std::span<const WordId> history) const;
  /// Lowest-order (continuation) probability.
  double unigram_prob(WordId w) const;

  /// Continuation entropy H(w | c) in bits. The observed continuations are
  /// summed explicitly; the unseen tail follows the lower-order distribution
  /// and is folded in analytically, so the result equals the full-vocabulary
  /// sum. Served from the cache for frequent contexts.
  double entropy(std::span<const WordId> context) const;
  double entropy_uncached(std::span<const WordId> context) const;
  bool entropy_cached(std::span<const WordId> context) const;
  std::size_t entropy_cache_size() const { return cached_contexts_; }
  std::size_t top_context_count() const { return top_contexts_; }

  /// Literal uniform-tail approximation: unseen continuations share the
  /// leftover mass equally.
  double entropy_uniform_tail(std::span<const WordId> context) const;

  /// KL(theta(.|c1) || theta(.|c2)) in bits, exact by the same tail folding.
  double kl(std::span<const WordId> c1, std::span<const WordId> c2) const;
  /// Pairwise sum over observed continuations, uniform tails for the rest.
  double kl_uniform_tail(std::span<const WordId> c1, std::span<const WordId> c2) const;

  ContinuationDistribution continuation(std::span<const WordId> context) const;

  /// Words with a non-zero count directly after `context` at the top level.
  std::vector<WordId> observed_continuations(std::span<const WordId> context) const;

  /// FNV-1a hash of the persisted form.
  std::uint64_t fingerprint() const { return fingerprint_; }

  void save(std::ostream& out) const;
  static NGramModel load(std::istream& in);

  friend NGramModel train_kn(const std::vector<std::vector<std::string>>& sequences, int order,
                             const KnOptions& options);

 private:
  struct Node;
  NGramModel();

  std::vector<WordId> normalize(std::span<const WordId> history) const;
  const Node* find(std::span<const WordId> ctx) const;
  double prob_level(WordId w, std::span<const WordId> ctx) const;
  double entropy_level(std::span<const WordId> ctx, bool use_cache) const;
  double cross_level(std::span<const WordId> c1, std::span<const WordId> c2) const;
  double gamma(const Node& n) const;
  void build(const std::map<std::vector<WordId>, std::uint64_t>& top_counts);
  void compute_fingerprint();

  int order_ = 3;
  double discount_ = 0.75;
  std::vector<std::string> words_;
  std::unordered_map<std::string, WordId> ids_;
  std::map<std::vector<WordId>, std::uint64_t> top_counts_;
  std::unique_ptr<Node> root_;
  double unigram_entropy_ = 0.0;
  std::size_t cached_contexts_ = 0;
  std::size_t top_contexts_ = 0;
  std::uint64_t fingerprint_ = 0;
};

/// Trains an interpolated Kneser-Ney model. Each sequence is padded with
/// order-1 start symbols and one end symbol; hapax words become <unk>.
NGramModel train_kn(const std::vector<std::vector<std::string>>& sequences, int order,
                    const KnOptions& options = {});

/// Order-2 model over edit-term spans.
NGramModel train_edit_bigram(const std::vector<std::vector<std::string>>& edit_spans,
                             const KnOptions& options = {});

/// -log2 p.
inline double bits(double p) { return -std::log2(p); }

double surprisal(const NGramModel& m, std::string_view w2, std::string_view w1, std::string_view w);
double surprisal(const NGramModel& m, std::span<const WordId> history, WordId w);

struct WmlValue {
  double value = 0.0;
  bool degenerate = false;  // unigram probability of 1; value forced to 0
};

/// Single-trigram weighted mean log probability: log2 p(w|h) / -log2 p_uni(w).
WmlValue wml(const NGramModel& m, std::span<const WordId> history, WordId w);
WmlValue wml_from_probs(double trigram_prob, double unigram_prob);
double wml(const NGramModel& m, std::string_view w2, std::string_view w1, std::string_view w);

double entropy(const NGramModel& m, std::string_view w2, std::string_view w1);
double kl_divergence(const NGramModel& m, std::span<const WordId> c1, std::span<const WordId> c2);

}  // namespace stir
