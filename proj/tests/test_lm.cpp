#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "stir/corpus.hpp"
#include "stir/lm.hpp"
#include "stir/synth.hpp"

using namespace stir;

namespace {

using Seqs = std::vector<std::vector<std::string>>;

Seqs split_lines(std::initializer_list<const char*> lines) {
  Seqs out;
  for (const char* l : lines) {
    std::istringstream in(l);
    std::vector<std::string> s;
    for (std::string w; in >> w;) s.push_back(w);
    out.push_back(s);
  }
  return out;
}

// Straightforward interpolated KN written against string n-grams, kept
// separate from the trie implementation.
struct NaiveKn {
  int order;
  double d = 0.75;
  std::vector<std::string> vocab;  // predicted vocabulary
  std::map<std::vector<std::string>, double> top;
  std::map<std::vector<std::string>, std::set<std::string>> left;  // lower gram -> left words

  NaiveKn(const Seqs& data, int n) : order(n) {
    std::map<std::string, int> freq;
    for (const auto& s : data)
      for (const auto& w : s) ++freq[w];
    std::set<std::string> v{"<unk>", "</s>"};
    for (const auto& [w, c] : freq)
      if (c > 1) v.insert(w);
    vocab.assign(v.begin(), v.end());
    for (const auto& s : data) {
      std::vector<std::string> p(n - 1, "<s>");
      for (const auto& w : s) p.push_back(freq[w] > 1 ? w : "<unk>");
      p.push_back("</s>");
      for (std::size_t i = n - 1; i < p.size(); ++i) {
        std::vector<std::string> g(p.begin() + (i - (n - 1)), p.begin() + i + 1);
        top[g] += 1;
      }
    }
    // continuation sets for every proper suffix
    std::set<std::vector<std::string>> types;
    for (const auto& e : top) types.insert(e.first);
    for (int len = n; len > 1; --len) {
      std::set<std::vector<std::string>> lower;
      for (const auto& g : types) {
        std::vector<std::string> suf(g.begin() + 1, g.end());
        left[suf].insert(g.front());
        lower.insert(suf);
      }
      types = lower;
    }
  }

  // counts of (ctx, w) at the level of ctx's length
  double count(const std::vector<std::string>& ctx, const std::string& w) const {
    std::vector<std::string> g = ctx;
    g.push_back(w);
    if (static_cast<int>(ctx.size()) == order - 1) {
      auto it = top.find(g);
      return it == top.end() ? 0 : it->second;
    }
    auto it = left.find(g);
    return it == left.end() ? 0 : static_cast<double>(it->second.size());
  }

  double p(const std::vector<std::string>& ctx, const std::string& w) const {
    double lower = ctx.empty() ? 1.0 / vocab.size()
                               : p(std::vector<std::string>(ctx.begin() + 1, ctx.end()), w);
    double total = 0, types = 0;
    for (const auto& v : vocab) {
      double c = count(ctx, v);
      total += c;
      if (c > 0) types += 1;
    }
    if (total == 0) return lower;
    double c = count(ctx, w);
    return std::max(c - d, 0.0) / total + d * types / total * lower;
  }
};

std::vector<WordId> ids(const NGramModel& m, std::initializer_list<const char*> ws) {
  std::vector<WordId> out;
  for (const char* w : ws) out.push_back(std::string(w) == "<s>" ? NGramModel::kBos : m.id(w));
  return out;
}

double brute_entropy(const NGramModel& m, std::span<const WordId> ctx) {
  double h = 0;
  for (WordId w = 0; w < m.id_count(); ++w) {
    if (w == NGramModel::kBos) continue;
    double p = m.prob(w, ctx);
    h -= p * std::log2(p);
  }
  return h;
}

double brute_kl(const NGramModel& m, std::span<const WordId> a, std::span<const WordId> b) {
  double kl = 0;
  for (WordId w = 0; w < m.id_count(); ++w) {
    if (w == NGramModel::kBos) continue;
    double p = m.prob(w, a), q = m.prob(w, b);
    kl += p * std::log2(p / q);
  }
  return kl;
}

Seqs synthetic_cleaned(std::size_t n, std::uint64_t seed, std::size_t vocab = 120) {
  SynthConfig cfg;
  cfg.n_utts = n;
  cfg.seed = seed;
  cfg.vocab_size = vocab;
  Seqs out;
  for (const auto& u : generate_synthetic(cfg)) {
    std::vector<std::string> s;
    for (const auto& t : cleaned_tokens(u)) s.push_back(t.word);
    out.push_back(s);
  }
  return out;
}

}  // namespace

TEST_CASE("bigram KN probabilities match the hand-computed table") {
  auto m = train_kn(split_lines({"a b", "a c", "b c"}), 2);
  CHECK(m.vocab_size() == 5);
  std::ifstream in(std::string(STIR_TEST_DATA) + "/kn_toy_bigram.csv");
  REQUIRE(in);
  int rows = 0;
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
    REQUIRE(f.size() == 4);
    const double expected = std::stod(f[2]) / std::stod(f[3]);
    std::vector<std::string> hist;
    if (!f[0].empty()) hist.push_back(f[0]);
    const double got = hist.empty() ? m.unigram_prob(m.id(f[1])) : m.prob(f[1], hist);
    INFO(line);
    CHECK(got == doctest::Approx(expected).epsilon(1e-12));
    CHECK(surprisal(m, "<s>", hist.empty() ? "<s>" : hist[0], f[1]) >= 0.0);
    ++rows;
  }
  CHECK(rows == 22);
}

TEST_CASE("trigram KN agrees with the naive string implementation") {
  auto data = synthetic_cleaned(300, 3);
  auto m = train_kn(data, 3);
  NaiveKn oracle(data, 3);
  CHECK(m.vocab_size() == oracle.vocab.size());
  std::mt19937 rng(5);
  for (int i = 0; i < 60; ++i) {
    const auto& s = data[rng() % data.size()];
    std::size_t pos = rng() % (s.size() + 1);
    std::vector<std::string> ctx;
    for (int k = 2; k >= 1; --k) {
      if (pos < static_cast<std::size_t>(k)) {
        ctx.push_back("<s>");
      } else {
        const std::string& w = s[pos - k];
        ctx.push_back(m.known(w) ? w : "<unk>");
      }
    }
    for (const auto& w : oracle.vocab) {
      CHECK(m.prob(w, ctx) == doctest::Approx(oracle.p(ctx, w)).epsilon(1e-12));
    }
  }
}

TEST_CASE("dominant continuation") {
  Seqs data(10, {"a", "b", "c"});
  auto m = train_kn(data, 3);
  const std::string h[2] = {"a", "b"};
  for (const char* x : {"a", "b", "</s>", "<unk>", "zzz"}) CHECK(m.prob("c", h) > m.prob(x, h));
}

TEST_CASE("normalization over sampled contexts") {
  auto m = train_kn(synthetic_cleaned(400, 11), 3);
  std::mt19937 rng(1);
  for (int i = 0; i < 100; ++i) {
    std::vector<WordId> ctx{static_cast<WordId>(rng() % m.id_count()),
                            static_cast<WordId>(rng() % m.id_count())};
    double s = 0;
    for (WordId w = 0; w < m.id_count(); ++w)
      if (w != NGramModel::kBos) s += m.prob(w, ctx);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    auto d = m.continuation(ctx);
    double t = d.unseen_mass;
    for (const auto& e : d.support) t += e.second;
    CHECK(t == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(d.unseen_mass == doctest::Approx(d.lambda * d.unseen_count).epsilon(1e-12));
  }
}

TEST_CASE("unknown words map to <unk>") {
  auto m = train_kn(split_lines({"a b", "a c", "b c", "x y"}), 2);
  CHECK_FALSE(m.known("x"));
  CHECK(m.id("x") == NGramModel::kUnk);
  CHECK(m.id("never") == NGramModel::kUnk);
  const std::string h[1] = {"a"};
  CHECK(m.prob("never", h) == m.prob("<unk>", h));
}

TEST_CASE("training errors") {
  CHECK_THROWS(train_kn({}, 3));
  CHECK_THROWS(train_kn({{}}, 3));
  CHECK_THROWS(train_edit_bigram({}));
  CHECK_THROWS(train_kn(split_lines({"a </s>"}), 3));
}

TEST_CASE("surprisal and WML arithmetic") {
  Seqs one(5, {"a"});
  auto m = train_kn(one, 3, KnOptions{0.75, true});
  CHECK(bits(0.25) == doctest::Approx(2.0));
  CHECK(bits(1.0) == 0.0);
  auto eq = wml_from_probs(0.3, 0.3);
  CHECK(eq.value == -1.0);
  CHECK_FALSE(eq.degenerate);
  CHECK(wml_from_probs(1.0, 0.2).value == 0.0);
  auto deg = wml_from_probs(0.5, 1.0);
  CHECK(deg.degenerate);
  CHECK(deg.value == 0.0);
  CHECK(std::isfinite(surprisal(m, "<s>", "<s>", "nothing")));
}

TEST_CASE("uniform-tail entropy of explicit distributions") {
  ContinuationDistribution flat;
  for (WordId w = 0; w < 8; ++w) flat.support[w] = 1.0 / 8;
  CHECK(uniform_tail_entropy(flat) == doctest::Approx(3.0).epsilon(1e-15));

  // with w_c = V there is no tail, so the approximation is the exact sum
  ContinuationDistribution full;
  full.support = {{0, 0.5}, {1, 0.25}, {2, 0.125}, {3, 0.125}};
  CHECK(uniform_tail_entropy(full) == 1.75);

  ContinuationDistribution tail;
  tail.support = {{0, 0.5}};
  tail.unseen_count = 4;
  tail.unseen_mass = 0.5;
  tail.lambda = 0.125;
  CHECK(uniform_tail_entropy(tail) == doctest::Approx(0.5 + 0.5 * 3).epsilon(1e-15));
}

TEST_CASE("entropy and KL against brute force on a 5-word toy model") {
  auto m = train_kn(split_lines({"a b", "a c", "b c"}), 2);
  auto a = ids(m, {"a"});
  auto c = ids(m, {"c"});
  auto s = ids(m, {"<s>"});
  // context a: 2 seen continuations (b, c), 3 unseen (a, </s>, <unk>)
  CHECK(m.observed_continuations(a).size() == 2);
  CHECK(m.entropy(a) == doctest::Approx(brute_entropy(m, a)).epsilon(1e-12));
  CHECK(std::abs(m.entropy(a) - brute_entropy(m, a)) < 1e-6);
  CHECK(std::abs(m.kl(a, c) - brute_kl(m, a, c)) < 1e-10);
  CHECK(std::abs(m.kl(s, a) - brute_kl(m, s, a)) < 1e-10);
  CHECK(m.kl(a, a) == 0.0);
  // the uniform-tail variants are approximations, finite and non-negative here
  CHECK(std::isfinite(m.entropy_uniform_tail(a)));
  CHECK(std::isfinite(m.kl_uniform_tail(a, c)));
}

TEST_CASE("trigram entropy and KL oracle over random contexts") {
  auto m = train_kn(synthetic_cleaned(500, 21), 3);
  REQUIRE(m.vocab_size() <= 200);
  std::mt19937 rng(9);
  double worst_h = 0, worst_kl = 0;
  for (int i = 0; i < 100; ++i) {
    std::vector<WordId> c1{static_cast<WordId>(rng() % m.id_count()),
                           static_cast<WordId>(rng() % m.id_count())};
    std::vector<WordId> c2{static_cast<WordId>(rng() % m.id_count()),
                           static_cast<WordId>(rng() % m.id_count())};
    worst_h = std::max(worst_h, std::abs(m.entropy(c1) - brute_entropy(m, c1)));
    worst_kl = std::max(worst_kl, std::abs(m.kl(c1, c2) - brute_kl(m, c1, c2)));
  }
  CHECK(worst_h < 1e-6);
  CHECK(worst_kl < 1e-4);
}

TEST_CASE("entropy cache covers the top fifth of contexts, bit-identical") {
  auto m = train_kn(synthetic_cleaned(300, 4), 3);
  CHECK(m.entropy_cache_size() == (m.top_context_count() * 20 + 99) / 100);
  std::size_t cached = 0;
  for (WordId a = 0; a < m.id_count(); ++a)
    for (WordId b = 0; b < m.id_count(); ++b) {
      std::vector<WordId> ctx{a, b};
      if (!m.entropy_cached(ctx)) continue;
      ++cached;
      double x = m.entropy(ctx), y = m.entropy_uncached(ctx);
      CHECK(std::memcmp(&x, &y, sizeof x) == 0);
    }
  CHECK(cached == m.entropy_cache_size());
  // <s> <s> is the most frequent context of all
  CHECK(m.entropy_cached(ids(m, {"<s>", "<s>"})));
}

TEST_CASE("save and load round-trip") {
  auto m = train_kn(synthetic_cleaned(200, 8), 3);
  std::stringstream buf;
  m.save(buf);
  auto copy = NGramModel::load(buf);
  CHECK(copy.fingerprint() == m.fingerprint());
  CHECK(copy.vocab_size() == m.vocab_size());
  std::vector<WordId> ctx{NGramModel::kBos, 5};
  for (WordId w = 0; w < m.id_count(); ++w) CHECK(copy.prob(w, ctx) == m.prob(w, ctx));
  CHECK(copy.entropy(ctx) == m.entropy(ctx));

  std::stringstream bad("NOT-A-MODEL 1\n");
  CHECK_THROWS(NGramModel::load(bad));
  std::stringstream truncated(buf.str().substr(0, buf.str().size() / 2));
  CHECK_THROWS(NGramModel::load(truncated));
}

TEST_CASE("edit bigram prefers edit vocabulary") {
  SynthConfig cfg;
  cfg.n_utts = 600;
  cfg.seed = 2;
  cfg.interregnum_rate = 0.8;
  cfg.isolated_edit_rate = 0.3;
  auto corpus = generate_synthetic(cfg);
  Seqs spans, clean;
  for (const auto& u : corpus) {
    for (auto& s : edit_spans(u)) spans.push_back(s);
    std::vector<std::string> c;
    for (const auto& t : cleaned_tokens(u)) c.push_back(t.word);
    clean.push_back(c);
  }
  auto edit = train_edit_bigram(spans);
  auto lex = train_kn(clean, 3);
  CHECK(edit.order() == 2);
  CHECK(surprisal(edit, "<s>", "<s>", "uh") < surprisal(lex, "<s>", "<s>", "uh"));
  double worst_seen = 0;
  for (WordId w = 3; w < edit.id_count(); ++w)
    worst_seen = std::max(worst_seen, surprisal(edit, "<s>", "<s>", edit.word(w)));
  CHECK(surprisal(edit, "<s>", "<s>", "dog") >= worst_seen);
}
