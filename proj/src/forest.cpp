#include "stir/forest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace stir {

namespace {

constexpr const char* kMagic = "STIR-FOREST";
constexpr int kFormatVersion = 1;

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

double entropy2(double pos, double neg) {
  const double n = pos + neg;
  if (n <= 0) return 0.0;
  double h = 0.0;
  for (double c : {pos, neg})
    if (c > 0) h -= (c / n) * std::log2(c / n);
  return h;
}

std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& s) {
  double v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw std::runtime_error("forest file: bad number '" + s + "'");
  return v;
}

// Candidate thresholds per feature and every row's bin under them.
struct Binned {
  std::vector<std::vector<double>> thresholds;
  std::vector<std::uint8_t> bins;  // row-major, rows x cols
  std::size_t cols = 0;

  std::uint8_t bin(std::size_t r, std::size_t f) const { return bins[r * cols + f]; }
};

Binned bin_dataset(const Dataset& d, std::size_t max_bins) {
  Binned b;
  b.cols = d.cols();
  b.thresholds.resize(d.cols());
  b.bins.resize(d.rows() * d.cols());
  std::vector<double> col(d.rows());
  for (std::size_t f = 0; f < d.cols(); ++f) {
    for (std::size_t r = 0; r < d.rows(); ++r) col[r] = d.at(r, f);
    std::sort(col.begin(), col.end());
    std::vector<double> uniq = col;
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    auto& t = b.thresholds[f];
    if (uniq.size() <= max_bins) {
      for (std::size_t k = 0; k + 1 < uniq.size(); ++k) t.push_back(uniq[k] + (uniq[k + 1] - uniq[k]) / 2);
    } else {
      for (std::size_t k = 1; k < max_bins; ++k) {
        const double v = col[k * col.size() / max_bins];
        if (v < uniq.back() && (t.empty() || v > t.back())) t.push_back(v);
      }
    }
    for (std::size_t r = 0; r < d.rows(); ++r) {
      auto it = std::lower_bound(t.begin(), t.end(), d.at(r, f));
      b.bins[r * b.cols + f] = static_cast<std::uint8_t>(it - t.begin());
    }
  }
  return b;
}

class TreeBuilder {
 public:
  TreeBuilder(const Binned& b, const std::vector<std::uint8_t>& y, std::size_t max_depth,
              std::uint64_t seed)
      : b_(b), y_(y), max_depth_(max_depth), rng_(seed) {
    mtry_ = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(b.cols))));
    mtry_ = std::clamp<std::size_t>(mtry_, 1, std::max<std::size_t>(b.cols, 1));
  }

  Tree build(std::vector<std::size_t> rows) {
    Tree t;
    grow(t, rows, 0);
    return t;
  }

 private:
  std::int32_t grow(Tree& t, std::vector<std::size_t>& rows, std::size_t depth) {
    const auto id = static_cast<std::int32_t>(t.nodes.size());
    t.nodes.emplace_back();
    double pos = 0;
    for (std::size_t r : rows) pos += y_[r];
    const double neg = static_cast<double>(rows.size()) - pos;
    t.nodes[id].label = pos > neg ? 1 : 0;
    if (depth >= max_depth_ || pos == 0 || neg == 0 || rows.size() < 2 || b_.cols == 0) return id;

    const double parent_h = entropy2(pos, neg);
    std::vector<std::size_t> feats(b_.cols);
    for (std::size_t i = 0; i < feats.size(); ++i) feats[i] = i;
    for (std::size_t i = 0; i < mtry_; ++i) std::swap(feats[i], feats[i + rng_() % (feats.size() - i)]);

    double best_gain = 1e-12;
    std::int32_t best_f = -1;
    std::size_t best_k = 0;
    std::vector<double> hp, hn;
    for (std::size_t fi = 0; fi < mtry_; ++fi) {
      const std::size_t f = feats[fi];
      const auto& th = b_.thresholds[f];
      if (th.empty()) continue;
      hp.assign(th.size() + 1, 0.0);
      hn.assign(th.size() + 1, 0.0);
      for (std::size_t r : rows) (y_[r] ? hp : hn)[b_.bin(r, f)] += 1;
      double lp = 0, ln = 0;
      for (std::size_t k = 0; k < th.size(); ++k) {
        lp += hp[k];
        ln += hn[k];
        const double rp = pos - lp, rn = neg - ln;
        if (lp + ln == 0 || rp + rn == 0) continue;
        const double n = pos + neg;
        const double gain =
            parent_h - ((lp + ln) / n) * entropy2(lp, ln) - ((rp + rn) / n) * entropy2(rp, rn);
        if (gain > best_gain) {
          best_gain = gain;
          best_f = static_cast<std::int32_t>(f);
          best_k = k;
        }
      }
    }
    if (best_f < 0) return id;

    std::vector<std::size_t> left, right;
    for (std::size_t r : rows) (b_.bin(r, static_cast<std::size_t>(best_f)) <= best_k ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    t.nodes[id].feature = best_f;
    t.nodes[id].threshold = b_.thresholds[static_cast<std::size_t>(best_f)][best_k];
    const auto l = grow(t, left, depth + 1);
    const auto r = grow(t, right, depth + 1);
    t.nodes[id].left = l;
    t.nodes[id].right = r;
    return id;
  }

  const Binned& b_;
  const std::vector<std::uint8_t>& y_;
  std::size_t max_depth_;
  std::size_t mtry_ = 1;
  std::mt19937_64 rng_;
};

std::vector<Tree> grow_forest(const Binned& b, const std::vector<std::uint8_t>& y,
                              const std::vector<std::size_t>& pool, const ForestParams& p,
                              std::uint64_t seed) {
  std::vector<Tree> trees;
  trees.reserve(p.n_trees);
  for (std::size_t t = 0; t < p.n_trees; ++t) {
    const std::uint64_t s = mix(seed ^ mix(t + 1));
    std::mt19937_64 rng(s);
    std::vector<std::size_t> sample(pool.size());
    for (auto& r : sample) r = pool[rng() % pool.size()];
    TreeBuilder builder(b, y, p.max_depth, mix(s));
    trees.push_back(builder.build(std::move(sample)));
  }
  return trees;
}

double vote_fraction(const std::vector<Tree>& trees, const double* x) {
  if (trees.empty()) return 0.0;
  std::size_t pos = 0;
  for (const auto& t : trees) pos += t.predict(x);
  return static_cast<double>(pos) / static_cast<double>(trees.size());
}

void validate(const ForestParams& p) {
  if (p.n_trees == 0) throw std::invalid_argument("forest: n_trees must be positive");
  if (!(p.resample_fraction > 0.0 && p.resample_fraction <= 1.0))
    throw std::invalid_argument("forest: resample_fraction must lie in (0,1]");
  if (p.max_bins < 2 || p.max_bins > 255) throw std::invalid_argument("forest: max_bins in 2..255");
}

}  // namespace

std::uint8_t Tree::predict(const double* x) const {
  std::size_t i = 0;
  while (nodes[i].feature >= 0)
    i = static_cast<std::size_t>(x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right);
  return nodes[i].label;
}

std::size_t Tree::depth() const {
  std::size_t best = 0;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    if (nodes[i].feature >= 0) {
      stack.push_back({static_cast<std::size_t>(nodes[i].left), d + 1});
      stack.push_back({static_cast<std::size_t>(nodes[i].right), d + 1});
    }
  }
  return best;
}

std::vector<Tree> train_random_forest(const Dataset& data, const ForestParams& params,
                                      std::uint64_t seed) {
  validate(params);
  if (data.rows() == 0) throw std::invalid_argument("forest: empty dataset");
  const Binned b = bin_dataset(data, params.max_bins);
  std::vector<std::size_t> pool(data.rows());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  return grow_forest(b, data.y, pool, params, seed);
}

Forest train_forest(Stage stage, const Dataset& data, const CostMatrix& cost,
                    const ForestParams& params) {
  validate(params);
  if (data.rows() == 0) throw std::invalid_argument("forest: empty dataset");
  if (!(cost.fn_cost >= 0 && cost.fp_cost >= 0)) throw std::invalid_argument("forest: negative cost");
  check_manifest(stage, data.names);

  Forest f;
  f.stage_ = stage;
  f.cost_ = cost;
  f.params_ = params;
  f.names_ = data.names;
  f.stats_.training_rows = data.rows();

  const std::size_t pos = data.positives();
  if (pos == 0 || pos == data.rows()) {
    std::cerr << "warning: " << to_string(stage)
              << " training data has a single class; using a constant classifier\n";
    f.degenerate_ = true;
    f.constant_ = pos == 0 ? 0 : 1;
    return f;
  }

  const Binned b = bin_dataset(data, params.max_bins);
  const std::size_t n = data.rows();
  const auto m = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(params.resample_fraction * static_cast<double>(n))));

  std::vector<double> p_pos(n, 0.0);
  std::mt19937_64 rng(mix(params.seed));
  for (std::size_t it = 0; it < params.metacost_iterations; ++it) {
    std::vector<std::size_t> sample(m);
    for (auto& r : sample) r = rng() % n;
    auto trees = grow_forest(b, data.y, sample, params, mix(params.seed + 1000003 * (it + 1)));
    for (std::size_t r = 0; r < n; ++r) p_pos[r] += vote_fraction(trees, data.row(r));
    f.stats_.resample_sizes.push_back(m);
    ++f.stats_.iterations;
  }

  std::vector<std::uint8_t> relabeled = data.y;
  if (params.metacost_iterations > 0) {
    for (std::size_t r = 0; r < n; ++r) {
      const double p = p_pos[r] / static_cast<double>(params.metacost_iterations);
      const std::uint8_t label = p * cost.fn_cost > (1.0 - p) * cost.fp_cost ? 1 : 0;
      if (label != data.y[r]) ++(label ? f.stats_.relabeled_positive : f.stats_.relabeled_negative);
      relabeled[r] = label;
    }
  }
  std::size_t rpos = 0;
  for (auto v : relabeled) rpos += v;
  if (rpos == 0 || rpos == n) {
    f.degenerate_ = true;
    f.constant_ = rpos == 0 ? 0 : 1;
    return f;
  }
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  f.trees_ = grow_forest(b, relabeled, pool, params, mix(params.seed ^ 0x5eedull));
  return f;
}

Classification Forest::classify(const double* x, std::size_t n) const {
  if (n != names_.size()) throw std::invalid_argument("forest: feature manifest mismatch");
  if (degenerate_) return {constant_ == 1, constant_ == 1 ? 1.0 : 0.0};
  std::size_t pos = 0;
  for (const auto& t : trees_) pos += t.predict(x);
  Classification c;
  c.score = static_cast<double>(pos) / static_cast<double>(trees_.size());
  c.positive = 2 * pos > trees_.size();
  return c;
}

Classification Forest::classify(const FeatureVector& x) const {
  if (x.stage != stage_) throw std::invalid_argument("forest: stage mismatch");
  return classify(x.values.data(), x.values.size());
}

void Forest::save(std::ostream& out) const {
  out << kMagic << ' ' << kFormatVersion << '\n';
  out << "stage " << to_string(stage_) << '\n';
  out << "cost " << fmt(cost_.fn_cost) << ' ' << fmt(cost_.fp_cost) << '\n';
  out << "params " << params_.n_trees << ' ' << params_.max_depth << ' '
      << params_.metacost_iterations << ' ' << fmt(params_.resample_fraction) << ' '
      << params_.max_bins << ' ' << params_.seed << '\n';
  out << "provenance " << (provenance_.empty() ? "-" : provenance_) << '\n';
  out << "metacost " << stats_.iterations << ' ' << stats_.training_rows << ' '
      << stats_.relabeled_positive << ' ' << stats_.relabeled_negative;
  for (auto s : stats_.resample_sizes) out << ' ' << s;
  out << '\n';
  out << "constant " << (degenerate_ ? 1 : 0) << ' ' << static_cast<int>(constant_) << '\n';
  out << "features " << names_.size() << '\n';
  for (const auto& n : names_) out << n << '\n';
  out << "trees " << trees_.size() << '\n';
  for (const auto& t : trees_) {
    out << "tree " << t.nodes.size() << '\n';
    for (const auto& n : t.nodes)
      out << n.feature << ' ' << fmt(n.threshold) << ' ' << n.left << ' ' << n.right << ' '
          << static_cast<int>(n.label) << '\n';
  }
  out << "end\n";
}

Forest Forest::load(std::istream& in) {
  auto fail = [](const std::string& what) -> void { throw std::runtime_error("forest file: " + what); };
  auto expect_line = [&](const std::string& key) {
    std::string line;
    if (!std::getline(in, line)) fail("truncated before " + key);
    std::istringstream ls(line);
    std::string k;
    ls >> k;
    if (k != key) fail("expected " + key + ", got '" + k + "'");
    std::string rest;
    std::getline(ls >> std::ws, rest);
    return rest;
  };
  Forest f;
  {
    std::string header = expect_line(kMagic);
    if (header != std::to_string(kFormatVersion)) fail("unsupported version " + header);
  }
  f.stage_ = stage_from_string(expect_line("stage"));
  {
    std::istringstream s(expect_line("cost"));
    std::string a, b;
    s >> a >> b;
    f.cost_ = {parse_double(a), parse_double(b)};
  }
  {
    std::istringstream s(expect_line("params"));
    std::string frac;
    s >> f.params_.n_trees >> f.params_.max_depth >> f.params_.metacost_iterations >> frac >>
        f.params_.max_bins >> f.params_.seed;
    if (!s) fail("bad params line");
    f.params_.resample_fraction = parse_double(frac);
  }
  f.provenance_ = expect_line("provenance");
  if (f.provenance_ == "-") f.provenance_.clear();
  {
    std::istringstream s(expect_line("metacost"));
    s >> f.stats_.iterations >> f.stats_.training_rows >> f.stats_.relabeled_positive >>
        f.stats_.relabeled_negative;
    for (std::size_t v; s >> v;) f.stats_.resample_sizes.push_back(v);
  }
  {
    std::istringstream s(expect_line("constant"));
    int deg = 0, c = 0;
    s >> deg >> c;
    f.degenerate_ = deg != 0;
    f.constant_ = static_cast<std::uint8_t>(c);
  }
  const std::size_t nf = std::stoul(expect_line("features"));
  for (std::size_t i = 0; i < nf; ++i) {
    std::string name;
    if (!std::getline(in, name)) fail("truncated feature list");
    f.names_.push_back(name);
  }
  check_manifest(f.stage_, f.names_);
  const std::size_t nt = std::stoul(expect_line("trees"));
  for (std::size_t t = 0; t < nt; ++t) {
    Tree tree;
    const std::size_t nn = std::stoul(expect_line("tree"));
    for (std::size_t i = 0; i < nn; ++i) {
      std::string line;
      if (!std::getline(in, line)) fail("truncated tree");
      std::istringstream s(line);
      TreeNode n;
      std::string th;
      int label = 0;
      s >> n.feature >> th >> n.left >> n.right >> label;
      if (!s) fail("bad tree node");
      n.threshold = parse_double(th);
      n.label = static_cast<std::uint8_t>(label);
      const auto lim = static_cast<std::int32_t>(nn);
      if (n.feature >= static_cast<std::int32_t>(nf) ||
          (n.feature >= 0 && (n.left <= static_cast<std::int32_t>(i) || n.left >= lim ||
                              n.right <= static_cast<std::int32_t>(i) || n.right >= lim)))
        fail("tree node out of range");
      tree.nodes.push_back(n);
    }
    if (tree.nodes.empty()) fail("empty tree");
    f.trees_.push_back(std::move(tree));
  }
  expect_line("end");
  if (!f.degenerate_ && f.trees_.empty()) fail("no trees");
  return f;
}

}  // namespace stir
