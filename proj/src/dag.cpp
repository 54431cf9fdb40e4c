#include "stir/dag.hpp"

#include <algorithm>
#include <stdexcept>

namespace stir {

void PrefixDag::append(const Token& t) {
  DagNode n;
  n.token = t;
  n.lex_id = lms_.lex->id(t.word);
  n.pos_id = lms_.pos->id(t.pos);
  n.pred = tail_;
  n.orig_pred = tail_;
  nodes_.push_back(std::move(n));
  tail_ = nodes_.size() - 1;
}

void PrefixDag::mark_edit(std::size_t i) {
  DagNode& n = nodes_.at(i);
  if (n.ed) return;
  n.ed = true;
  for (std::size_t j = i + 1; j < nodes_.size(); ++j) {
    if (nodes_[j].pred == i) nodes_[j].pred = n.pred;
    if (nodes_[j].orig_pred == i) nodes_[j].orig_pred = n.orig_pred;
  }
  if (tail_ == i) tail_ = n.pred;
}

void PrefixDag::compute_values(std::size_t i) {
  DagNode& n = nodes_.at(i);
  if (n.valued) throw std::logic_error("dag: values of node " + std::to_string(i) + " already written");
  const auto hist = clean_history(i, 2);
  n.lex = evaluate(Model::Lex, n.lex_id, hist);
  n.pos = evaluate(Model::Pos, n.pos_id, hist);
  if (n.pred && nodes_[*n.pred].valued) {
    n.lex.cum_logp = nodes_[*n.pred].lex.cum_logp + n.lex.logp;
    n.pos.cum_logp = nodes_[*n.pred].pos.cum_logp + n.pos.logp;
  } else {
    n.lex.cum_logp = n.lex.logp;
    n.pos.cum_logp = n.pos.logp;
  }
  n.valued = true;
}

void PrefixDag::excise(std::size_t rm_start, std::size_t rp_start) {
  if (rm_start >= rp_start || rp_start >= nodes_.size())
    throw std::out_of_range("dag: bad excision span");
  nodes_[rp_start].pred = nodes_[rm_start].pred;
}

void PrefixDag::restore(std::size_t rp_start) {
  DagNode& n = nodes_.at(rp_start);
  n.pred = n.orig_pred;
}

std::vector<std::size_t> PrefixDag::clean_history(std::size_t i, std::size_t k) const {
  std::vector<std::size_t> out;
  auto p = nodes_.at(i).pred;
  while (p && out.size() < k) {
    out.push_back(*p);
    p = nodes_[*p].pred;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> PrefixDag::clean_path_to(std::size_t i, std::size_t k) const {
  if (k == 0) return {};
  auto out = clean_history(i, k - 1);
  out.push_back(i);
  return out;
}

std::vector<WordId> PrefixDag::ids(const std::vector<std::size_t>& nodes, Model m) const {
  std::vector<WordId> out;
  out.reserve(nodes.size());
  for (std::size_t i : nodes) out.push_back(nodes_.at(i).id(m));
  return out;
}

NodeValues PrefixDag::evaluate(Model m, WordId w, const std::vector<std::size_t>& history) const {
  const NGramModel& lm = model(m);
  std::vector<WordId> h = ids(history, m);
  NodeValues v;
  const double p = lm.prob(w, h);
  const double pu = lm.unigram_prob(w);
  v.logp = std::log2(p);
  v.uni_logp = std::log2(pu);
  v.s = std::max(0.0, -v.logp);
  v.wml = wml_from_probs(p, pu).value;
  WordId ctx[2] = {h.empty() ? NGramModel::kBos : h.back(), w};
  v.h = lm.entropy(ctx);
  return v;
}

std::vector<DagEdge> PrefixDag::edges() const {
  std::vector<DagEdge> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    std::optional<std::size_t> prev;
    if (i > 0) prev = i - 1;
    out.push_back({prev, i, EdgeKind::Word});
    const auto& n = nodes_[i];
    if (n.ed || n.pred == prev) continue;
    const std::size_t from = n.pred ? *n.pred + 1 : 0;
    bool all_ed = true;
    for (std::size_t j = from; j < i; ++j) all_ed = all_ed && nodes_[j].ed;
    out.push_back({n.pred, i, all_ed ? EdgeKind::EditSkip : EdgeKind::RmSkip});
  }
  return out;
}

}  // namespace stir
