#include "stir/lm.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace stir {

namespace {

constexpr const char* kMagic = "STIR-NGRAM";
constexpr int kFormatVersion = 1;

const std::string kUnkWord = "<unk>";
const std::string kEosWord = "</s>";
const std::string kBosWord = "<s>";

double xlog2x(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

struct NGramModel::Node {
  // Counts of words following this context, sorted by id.
  std::vector<std::pair<WordId, std::uint64_t>> next;
  std::uint64_t total = 0;
  std::unordered_map<WordId, std::unique_ptr<Node>> children;  // one word further back
  double entropy = 0.0;
  bool has_entropy = false;

  std::uint64_t count(WordId w) const {
    auto it = std::lower_bound(next.begin(), next.end(), w,
                               [](const auto& e, WordId id) { return e.first < id; });
    return (it != next.end() && it->first == w) ? it->second : 0;
  }

  Node* child(WordId w) const {
    auto it = children.find(w);
    return it == children.end() ? nullptr : it->second.get();
  }

  Node& child_or_insert(WordId w) {
    auto& slot = children[w];
    if (!slot) slot = std::make_unique<Node>();
    return *slot;
  }
};

NGramModel::NGramModel() : root_(std::make_unique<Node>()) {}
NGramModel::NGramModel(NGramModel&&) noexcept = default;
NGramModel& NGramModel::operator=(NGramModel&&) noexcept = default;
NGramModel::~NGramModel() = default;

WordId NGramModel::id(std::string_view word) const {
  auto it = ids_.find(std::string(word));
  return it == ids_.end() ? kUnk : it->second;
}

bool NGramModel::known(std::string_view word) const { return ids_.count(std::string(word)) > 0; }

std::vector<WordId> NGramModel::normalize(std::span<const WordId> history) const {
  const auto k = static_cast<std::size_t>(order_ - 1);
  std::vector<WordId> ctx(k, kBos);
  const std::size_t take = std::min(k, history.size());
  for (std::size_t i = 0; i < take; ++i) {
    WordId w = history[history.size() - take + i];
    if (w >= words_.size()) w = kUnk;
    ctx[k - take + i] = w;
  }
  return ctx;
}

const NGramModel::Node* NGramModel::find(std::span<const WordId> ctx) const {
  const Node* n = root_.get();
  for (std::size_t i = ctx.size(); i-- > 0;) {
    n = n->child(ctx[i]);
    if (!n) return nullptr;
  }
  return n;
}

double NGramModel::gamma(const Node& n) const {
  return discount_ * static_cast<double>(n.next.size()) / static_cast<double>(n.total);
}

double NGramModel::prob_level(WordId w, std::span<const WordId> ctx) const {
  const double lower =
      ctx.empty() ? 1.0 / static_cast<double>(vocab_size()) : prob_level(w, ctx.subspan(1));
  const Node* n = find(ctx);
  if (!n || n->total == 0) return lower;
  const double c = static_cast<double>(n->count(w));
  const double head = c > 0 ? (c - discount_) / static_cast<double>(n->total) : 0.0;
  return head + gamma(*n) * lower;
}

double NGramModel::prob(WordId w, std::span<const WordId> history) const {
  if (w >= words_.size() || w == kBos) w = kUnk;
  auto ctx = normalize(history);
  return prob_level(w, ctx);
}

double NGramModel::prob(std::string_view w, std::span<const std::string> history) const {
  std::vector<WordId> h;
  h.reserve(history.size());
  for (const auto& s : history) h.push_back(s == kBosWord ? kBos : id(s));
  return prob(id(w), h);
}

double NGramModel::log2prob(WordId w, std::span<const WordId> history) const {
  return std::log2(prob(w, history));
}

double NGramModel::unigram_prob(WordId w) const {
  if (w >= words_.size() || w == kBos) w = kUnk;
  return prob_level(w, {});
}

// H_k(c) = -sum_{w in S} p log p - sum_{w not in S} p log p, where S is the set
// of observed continuations and every unseen w has p = gamma * p_lower(w). The
// second sum reduces to
//   gamma log gamma (1 - P_S) + gamma (-H_lower - L_S)
// with P_S = sum_S p_lower and L_S = sum_S p_lower log p_lower.
double NGramModel::entropy_level(std::span<const WordId> ctx, bool use_cache) const {
  if (ctx.empty()) return unigram_entropy_;
  const Node* n = find(ctx);
  if (!n || n->total == 0) return entropy_level(ctx.subspan(1), true);
  if (use_cache && n->has_entropy) return n->entropy;
  const auto lower_ctx = ctx.subspan(1);
  const double g = gamma(*n);
  double explicit_sum = 0.0, lower_mass = 0.0, lower_plogp = 0.0;
  for (const auto& [w, c] : n->next) {
    const double pl = prob_level(w, lower_ctx);
    const double p = (static_cast<double>(c) - discount_) / static_cast<double>(n->total) + g * pl;
    explicit_sum += xlog2x(p);
    lower_mass += pl;
    lower_plogp += xlog2x(pl);
  }
  const double h_lower = entropy_level(lower_ctx, true);
  const double tail = xlog2x(g) * std::max(0.0, 1.0 - lower_mass) + g * (-h_lower - lower_plogp);
  return -(explicit_sum + tail);
}

double NGramModel::entropy(std::span<const WordId> context) const {
  auto ctx = normalize(context);
  return entropy_level(ctx, true);
}

double NGramModel::entropy_uncached(std::span<const WordId> context) const {
  auto ctx = normalize(context);
  return entropy_level(ctx, false);
}

bool NGramModel::entropy_cached(std::span<const WordId> context) const {
  auto ctx = normalize(context);
  const Node* n = find(ctx);
  return n && n->has_entropy;
}

ContinuationDistribution NGramModel::continuation(std::span<const WordId> context) const {
  ContinuationDistribution d;
  d.context = normalize(context);
  const Node* n = find(d.context);
  double seen = 0.0;
  if (n) {
    for (const auto& e : n->next) {
      const double p = prob_level(e.first, d.context);
      d.support.emplace(e.first, p);
      seen += p;
    }
  }
  d.unseen_count = vocab_size() - d.support.size();
  d.unseen_mass = d.unseen_count > 0 ? 1.0 - seen : 0.0;
  d.lambda = d.unseen_count > 0 ? d.unseen_mass / static_cast<double>(d.unseen_count) : 0.0;
  return d;
}

std::vector<WordId> NGramModel::observed_continuations(std::span<const WordId> context) const {
  auto ctx = normalize(context);
  std::vector<WordId> out;
  if (const Node* n = find(ctx)) {
    for (const auto& e : n->next) out.push_back(e.first);
  }
  return out;
}

double uniform_tail_entropy(const ContinuationDistribution& d) {
  double h = 0.0;
  for (const auto& [w, p] : d.support) h -= xlog2x(p);
  if (d.unseen_count > 0 && d.lambda > 0.0)
    h -= static_cast<double>(d.unseen_count) * xlog2x(d.lambda);
  return h;
}

double NGramModel::entropy_uniform_tail(std::span<const WordId> context) const {
  return uniform_tail_entropy(continuation(context));
}

// Cross entropy X_k(c1, c2) = sum_w p(w|c1) log p(w|c2), folded the same way as
// entropy_level over S = seen(c1) u seen(c2):
//   explicit(S) + g1 log g2 (1 - A_S) + g1 (X_lower - B_S)
// with A_S = sum_S p1_lower and B_S = sum_S p1_lower log p2_lower.
double NGramModel::cross_level(std::span<const WordId> c1, std::span<const WordId> c2) const {
  if (c1.empty()) return -unigram_entropy_;
  const auto l1 = c1.subspan(1);
  const auto l2 = c2.subspan(1);
  const bool same_lower = std::equal(l1.begin(), l1.end(), l2.begin(), l2.end());
  const double x_lower = same_lower ? -entropy_level(l1, true) : cross_level(l1, l2);
  const Node* n1 = find(c1);
  const Node* n2 = find(c2);
  if (n1 && n1->total == 0) n1 = nullptr;
  if (n2 && n2->total == 0) n2 = nullptr;
  if (!n1 && !n2) return x_lower;

  std::vector<WordId> support;
  if (n1)
    for (const auto& e : n1->next) support.push_back(e.first);
  if (n2)
    for (const auto& e : n2->next) support.push_back(e.first);
  std::sort(support.begin(), support.end());
  support.erase(std::unique(support.begin(), support.end()), support.end());

  const double g1 = n1 ? gamma(*n1) : 1.0;
  const double g2 = n2 ? gamma(*n2) : 1.0;
  double explicit_sum = 0.0, a = 0.0, b = 0.0;
  for (WordId w : support) {
    const double p1l = prob_level(w, l1);
    const double p2l = same_lower ? p1l : prob_level(w, l2);
    const double c1w = n1 ? static_cast<double>(n1->count(w)) : 0.0;
    const double c2w = n2 ? static_cast<double>(n2->count(w)) : 0.0;
    const double p1 = (c1w > 0 ? (c1w - discount_) / static_cast<double>(n1->total) : 0.0) + g1 * p1l;
    const double p2 = (c2w > 0 ? (c2w - discount_) / static_cast<double>(n2->total) : 0.0) + g2 * p2l;
    explicit_sum += p1 * std::log2(p2);
    a += p1l;
    b += p1l * std::log2(p2l);
  }
  return explicit_sum + g1 * std::log2(g2) * std::max(0.0, 1.0 - a) + g1 * (x_lower - b);
}

double NGramModel::kl(std::span<const WordId> c1, std::span<const WordId> c2) const {
  auto a = normalize(c1);
  auto b = normalize(c2);
  if (a == b) return 0.0;
  const double d = -entropy_level(a, true) - cross_level(a, b);
  return std::max(0.0, d);
}

// Observed continuations of either context are paired explicitly; the rest of
// each distribution is spread uniformly over the n words unseen in both, so
// the tail contributes R1 log(R1 / R2) regardless of n.
double NGramModel::kl_uniform_tail(std::span<const WordId> c1, std::span<const WordId> c2) const {
  auto a = normalize(c1);
  auto b = normalize(c2);
  if (a == b) return 0.0;
  std::vector<WordId> support = observed_continuations(a);
  for (WordId w : observed_continuations(b)) support.push_back(w);
  std::sort(support.begin(), support.end());
  support.erase(std::unique(support.begin(), support.end()), support.end());
  double sum = 0.0, m1 = 0.0, m2 = 0.0;
  for (WordId w : support) {
    const double p1 = prob_level(w, a);
    const double p2 = prob_level(w, b);
    sum += p1 * std::log2(p1 / p2);
    m1 += p1;
    m2 += p2;
  }
  const double r1 = 1.0 - m1, r2 = 1.0 - m2;
  if (support.size() < vocab_size() && r1 > 0.0 && r2 > 0.0) sum += r1 * std::log2(r1 / r2);
  return sum;
}

void NGramModel::build(const std::map<std::vector<WordId>, std::uint64_t>& top_counts) {
  top_counts_ = top_counts;
  root_ = std::make_unique<Node>();
  const auto k = static_cast<std::size_t>(order_ - 1);

  // Top level: raw counts. Lower levels: number of distinct left extensions.
  std::map<std::vector<WordId>, std::uint64_t> level = top_counts;
  for (std::size_t len = k + 1; len >= 1; --len) {
    for (const auto& [gram, c] : level) {
      Node* n = root_.get();
      for (std::size_t i = gram.size() - 1; i-- > 0;) n = &n->child_or_insert(gram[i]);
      n->next.emplace_back(gram.back(), c);
      n->total += c;
    }
    if (len == 1) break;
    std::map<std::vector<WordId>, std::uint64_t> lower;
    for (const auto& e : level) ++lower[std::vector<WordId>(e.first.begin() + 1, e.first.end())];
    level = std::move(lower);
  }

  std::vector<Node*> stack{root_.get()};
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    std::sort(n->next.begin(), n->next.end());
    for (auto& c : n->children) stack.push_back(c.second.get());
  }

  // Unigram entropy over the whole predicted vocabulary.
  unigram_entropy_ = 0.0;
  for (WordId w = 0; w < words_.size(); ++w) {
    if (w == kBos) continue;
    unigram_entropy_ -= xlog2x(prob_level(w, {}));
  }

  // Lower-order contexts: entropies precomputed bottom-up.
  std::vector<std::pair<std::vector<WordId>, Node*>> frontier;
  for (auto& [w, child] : root_->children) frontier.push_back({{w}, child.get()});
  for (std::size_t depth = 1; depth < k; ++depth) {
    std::sort(frontier.begin(), frontier.end());
    for (auto& [ctx, node] : frontier) {
      node->entropy = entropy_level(ctx, false);
      node->has_entropy = true;
    }
    std::vector<std::pair<std::vector<WordId>, Node*>> next;
    for (auto& [ctx, node] : frontier) {
      for (auto& [w, child] : node->children) {
        std::vector<WordId> c{w};
        c.insert(c.end(), ctx.begin(), ctx.end());
        next.push_back({c, child.get()});
      }
    }
    frontier = std::move(next);
  }

  // Top-order contexts: cache the 20% most frequent, ties by context order.
  std::sort(frontier.begin(), frontier.end(), [](const auto& x, const auto& y) {
    if (x.second->total != y.second->total) return x.second->total > y.second->total;
    return x.first < y.first;
  });
  top_contexts_ = frontier.size();
  cached_contexts_ = (frontier.size() * 20 + 99) / 100;
  if (k == 0) cached_contexts_ = 0;
  for (std::size_t i = 0; i < cached_contexts_; ++i) {
    frontier[i].second->entropy = entropy_level(frontier[i].first, false);
    frontier[i].second->has_entropy = true;
  }
  compute_fingerprint();
}

void NGramModel::save(std::ostream& out) const {
  out << kMagic << ' ' << kFormatVersion << '\n';
  out << "order " << order_ << '\n';
  std::ostringstream d;
  d.precision(17);
  d << discount_;
  out << "discount " << d.str() << '\n';
  out << "vocab " << (words_.size() - 3) << '\n';
  for (std::size_t i = 3; i < words_.size(); ++i) out << words_[i] << '\n';
  out << "ngrams " << top_counts_.size() << '\n';
  for (const auto& [gram, c] : top_counts_) {
    for (WordId w : gram) out << w << ' ';
    out << c << '\n';
  }
  out << "end\n";
}

void NGramModel::compute_fingerprint() {
  std::ostringstream s;
  save(s);
  fingerprint_ = fnv1a(s.str());
}

NGramModel NGramModel::load(std::istream& in) {
  auto fail = [](const std::string& what) { throw std::runtime_error("n-gram file: " + what); };
  std::string magic, key;
  int version = 0;
  if (!(in >> magic >> version) || magic != kMagic) fail("bad magic header");
  if (version != kFormatVersion) fail("unsupported version " + std::to_string(version));
  NGramModel m;
  std::size_t nvocab = 0, ngrams = 0;
  std::string discount;
  if (!(in >> key >> m.order_) || key != "order" || m.order_ < 1 || m.order_ > 3) fail("bad order");
  if (!(in >> key >> discount) || key != "discount") fail("bad discount");
  m.discount_ = std::stod(discount);
  if (!(m.discount_ > 0.0 && m.discount_ < 1.0)) fail("discount out of range");
  if (!(in >> key >> nvocab) || key != "vocab") fail("bad vocab header");
  m.words_ = {kUnkWord, kEosWord, kBosWord};
  for (std::size_t i = 0; i < nvocab; ++i) {
    std::string w;
    if (!(in >> w)) fail("truncated vocabulary");
    m.words_.push_back(w);
  }
  for (WordId i = 0; i < m.words_.size(); ++i) m.ids_.emplace(m.words_[i], i);
  if (!(in >> key >> ngrams) || key != "ngrams") fail("bad ngram header");
  std::map<std::vector<WordId>, std::uint64_t> counts;
  for (std::size_t i = 0; i < ngrams; ++i) {
    std::vector<WordId> gram(static_cast<std::size_t>(m.order_));
    std::uint64_t c = 0;
    for (auto& w : gram) {
      if (!(in >> w) || w >= m.words_.size()) fail("bad ngram entry");
    }
    if (!(in >> c) || c == 0) fail("bad ngram count");
    counts[gram] = c;
  }
  if (!(in >> key) || key != "end") fail("missing end marker");
  m.build(counts);
  return m;
}

NGramModel train_kn(const std::vector<std::vector<std::string>>& sequences, int order,
                    const KnOptions& options) {
  if (order < 1 || order > 3) throw std::invalid_argument("train_kn: order must be 1..3");
  if (!(options.discount > 0.0 && options.discount < 1.0))
    throw std::invalid_argument("train_kn: discount must lie in (0,1)");
  std::size_t n_words = 0;
  for (const auto& s : sequences) n_words += s.size();
  if (sequences.empty() || n_words == 0) throw std::invalid_argument("train_kn: empty corpus");

  std::map<std::string, std::size_t> freq;
  for (const auto& s : sequences)
    for (const auto& w : s) {
      if (w == kUnkWord || w == kEosWord || w == kBosWord)
        throw std::invalid_argument("train_kn: reserved symbol in training data: " + w);
      ++freq[w];
    }

  NGramModel m;
  m.order_ = order;
  m.discount_ = options.discount;
  m.words_ = {kUnkWord, kEosWord, kBosWord};
  for (const auto& [w, c] : freq)
    if (!(options.hapax_to_unk && c == 1)) m.words_.push_back(w);
  for (WordId i = 0; i < m.words_.size(); ++i) m.ids_.emplace(m.words_[i], i);

  std::map<std::vector<WordId>, std::uint64_t> counts;
  const auto k = static_cast<std::size_t>(order - 1);
  for (const auto& s : sequences) {
    std::vector<WordId> padded(k, NGramModel::kBos);
    for (const auto& w : s) padded.push_back(m.id(w));
    padded.push_back(NGramModel::kEos);
    for (std::size_t i = k; i < padded.size(); ++i)
      ++counts[std::vector<WordId>(padded.begin() + static_cast<std::ptrdiff_t>(i - k),
                                   padded.begin() + static_cast<std::ptrdiff_t>(i + 1))];
  }
  m.build(counts);
  return m;
}

NGramModel train_edit_bigram(const std::vector<std::vector<std::string>>& edit_spans,
                             const KnOptions& options) {
  return train_kn(edit_spans, 2, options);
}

double surprisal(const NGramModel& m, std::span<const WordId> history, WordId w) {
  return std::max(0.0, bits(m.prob(w, history)));
}

double surprisal(const NGramModel& m, std::string_view w2, std::string_view w1, std::string_view w) {
  const std::string h[2] = {std::string(w2), std::string(w1)};
  return std::max(0.0, bits(m.prob(w, h)));
}

WmlValue wml_from_probs(double trigram_prob, double unigram_prob) {
  const double denom = -std::log2(unigram_prob);
  if (!(denom > 0.0)) return {0.0, true};
  return {std::log2(trigram_prob) / denom, false};
}

WmlValue wml(const NGramModel& m, std::span<const WordId> history, WordId w) {
  return wml_from_probs(m.prob(w, history), m.unigram_prob(w));
}

double wml(const NGramModel& m, std::string_view w2, std::string_view w1, std::string_view w) {
  const std::string h[2] = {std::string(w2), std::string(w1)};
  const WordId id = m.id(w);
  return wml_from_probs(m.prob(w, h), m.unigram_prob(id)).value;
}

double entropy(const NGramModel& m, std::string_view w2, std::string_view w1) {
  const WordId h[2] = {w2 == "<s>" ? NGramModel::kBos : m.id(w2),
                       w1 == "<s>" ? NGramModel::kBos : m.id(w1)};
  return m.entropy(h);
}

double kl_divergence(const NGramModel& m, std::span<const WordId> c1, std::span<const WordId> c2) {
  return m.kl(c1, c2);
}

}  // namespace stir
