#include "stir/features.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

namespace stir {

namespace {

const char* suffix(Model m) { return m == Model::Lex ? "^lex" : "^pos"; }

std::vector<std::string> make_edit_names() {
  return {"s_edit", "s_lex", "s_diff", "other_s_edit", "other_s_lex", "other_s_diff", "is_revisit"};
}

std::vector<std::string> make_rp_start_names() {
  std::vector<std::string> out;
  for (Model m : {Model::Lex, Model::Pos}) {
    for (const char* f : {"s", "WML", "DeltaWML", "BestWMLBoost", "H", "InformationGain", "DeltaH",
                          "BestEntropyReduce"})
      out.push_back(std::string(f) + suffix(m));
  }
  for (const char* f : {"w_i-1=w_i", "w_i-2=w_i", "w_i-3=w_i", "POS_i-1=POS_i", "POS_i-2=POS_i",
                        "POS_i-3=POS_i", "edit"})
    out.emplace_back(f);
  return out;
}

std::vector<std::string> make_rm_start_names() {
  std::vector<std::string> out;
  for (Model m : {Model::Lex, Model::Pos}) {
    for (const char* f : {"WMLboost", "DeltaWMLboost", "KL", "s_rm", "WML_rm", "H_rm",
                          "EntropyReduce", "s_excised", "SurprisalGain", "WML_excised",
                          "IsMaxBoost"})
      out.push_back(std::string(f) + suffix(m));
  }
  for (const char* f : {"distance", "rm_length", "w_rm=w_rp", "POS_rm=POS_rp", "w_rm+1=w_rp",
                        "POS_rm+1=POS_rp", "w_rm-1=w_rp", "POS_rm-1=POS_rp", "interregnum",
                        "utterance_start"})
    out.emplace_back(f);
  return out;
}

std::vector<std::string> make_rp_end_names() {
  return {"KL^lex",
          "KL^pos",
          "ReparandumRepairDifference^lex",
          "ReparandumRepairDifference^pos",
          "s^lex",
          "WML^lex",
          "H^lex",
          "s^pos",
          "WML^pos",
          "H^pos",
          "rp_length",
          "rm_length",
          "length_difference",
          "w_e=w_rm_end",
          "POS_e=POS_rm_end",
          "w_e=w_parallel",
          "POS_e=POS_parallel",
          "zero_length",
          "interregnum",
          "DeltaWML^lex",
          "DeltaWML^pos",
          "DeltaH^lex",
          "copy_fraction"};
}

struct StageTable {
  std::vector<std::string> names;
  std::unordered_map<std::string, std::size_t> index;

  explicit StageTable(std::vector<std::string> n) : names(std::move(n)) {
    for (std::size_t i = 0; i < names.size(); ++i) index.emplace(names[i], i);
  }
};

const StageTable& table(Stage s) {
  static const StageTable tables[kStageCount] = {
      StageTable(make_edit_names()), StageTable(make_rp_start_names()),
      StageTable(make_rm_start_names()), StageTable(make_rp_end_names())};
  return tables[static_cast<std::size_t>(s)];
}

class Builder {
 public:
  explicit Builder(Stage s) : t_(table(s)) {
    v_.stage = s;
    v_.values.assign(t_.names.size(), 0.0);
    set_.assign(t_.names.size(), false);
  }
  void set(const std::string& name, double value) {
    auto it = t_.index.find(name);
    if (it == t_.index.end()) throw std::logic_error("unknown feature " + name);
    v_.values[it->second] = value;
    set_[it->second] = true;
  }
  void set(const std::string& name, bool value) { set(name, value ? 1.0 : 0.0); }
  FeatureVector done() {
    for (std::size_t i = 0; i < set_.size(); ++i)
      if (!set_[i]) throw std::logic_error("feature not set: " + t_.names[i]);
    return std::move(v_);
  }

 private:
  const StageTable& t_;
  FeatureVector v_;
  std::vector<bool> set_;
};

bool same_word(const PrefixDag& d, std::optional<std::size_t> a, std::size_t b) {
  return a && d.node(*a).token.word == d.node(b).token.word;
}

bool same_pos(const PrefixDag& d, std::optional<std::size_t> a, std::size_t b) {
  return a && d.node(*a).token.pos == d.node(b).token.pos;
}

NodeValues values_of(const PrefixDag& d, Model m, std::size_t i) {
  const auto& n = d.node(i);
  if (n.valued) return n.values(m);
  return d.evaluate(m, n.id(m), d.clean_history(i, 2));
}

// Two-word context ending at the last element of `seq`, padded with <s>.
std::vector<WordId> tail_context(const std::vector<WordId>& seq) {
  std::vector<WordId> ctx{NGramModel::kBos, NGramModel::kBos};
  if (!seq.empty()) ctx[1] = seq.back();
  if (seq.size() >= 2) ctx[0] = seq[seq.size() - 2];
  return ctx;
}

double sequence_logprob(const NGramModel& lm, std::vector<WordId> history,
                        const std::vector<WordId>& words) {
  double lp = 0.0;
  for (WordId w : words) {
    lp += lm.log2prob(w, history);
    history.push_back(w);
  }
  return lp;
}

double edit_surprisal(const PrefixDag& d, std::size_t k, std::optional<std::size_t> hist) {
  const NGramModel& em = *d.models().edit;
  const WordId w = em.id(d.node(k).token.word);
  WordId h[1] = {hist ? em.id(d.node(*hist).token.word) : NGramModel::kBos};
  return surprisal(em, h, w);
}

std::optional<std::size_t> edit_history(const PrefixDag& d, std::size_t k) {
  if (k >= 1 && d.node(k - 1).ed) return k - 1;
  return std::nullopt;
}

}  // namespace

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Edit: return "edit";
    case Stage::RpStart: return "rp_start";
    case Stage::RmStart: return "rm_start";
    case Stage::RpEnd: return "rp_end";
  }
  return "?";
}

Stage stage_from_string(std::string_view name) {
  for (Stage s : {Stage::Edit, Stage::RpStart, Stage::RmStart, Stage::RpEnd})
    if (to_string(s) == name) return s;
  throw std::invalid_argument("unknown stage: " + std::string(name));
}

const std::vector<std::string>& feature_names(Stage s) { return table(s).names; }

double FeatureVector::get(std::string_view name) const {
  const auto& t = table(stage);
  auto it = t.index.find(std::string(name));
  if (it == t.index.end()) throw std::out_of_range("no feature " + std::string(name));
  return values.at(it->second);
}

void write_manifest(std::ostream& out, Stage s) {
  out << "# stir feature manifest v1\n";
  out << "stage " << to_string(s) << '\n';
  for (const auto& n : feature_names(s)) out << n << '\n';
}

void check_manifest(Stage s, const std::vector<std::string>& names) {
  const auto& expected = feature_names(s);
  if (names != expected)
    throw std::runtime_error("feature manifest mismatch for stage " + std::string(to_string(s)));
}

void check_manifest(std::istream& in, Stage s) {
  std::string line;
  if (!std::getline(in, line) || line != "# stir feature manifest v1")
    throw std::runtime_error("feature manifest: bad header");
  if (!std::getline(in, line) || line != "stage " + std::string(to_string(s)))
    throw std::runtime_error("feature manifest: stage mismatch");
  std::vector<std::string> names;
  while (std::getline(in, line))
    if (!line.empty()) names.push_back(line);
  check_manifest(s, names);
}

std::vector<std::size_t> non_edit_between(const PrefixDag& dag, std::size_t from, std::size_t to) {
  std::vector<std::size_t> out;
  for (std::size_t i = from; i < to && i < dag.size(); ++i)
    if (!dag.node(i).ed) out.push_back(i);
  return out;
}

FeatureVector edit_features(const PrefixDag& dag, std::size_t n, bool revisit) {
  if (n >= dag.size()) throw std::out_of_range("edit_features: index beyond prefix");
  if (revisit && n == 0) throw std::out_of_range("edit_features: nothing to revisit at 0");
  Builder b(Stage::Edit);
  const NGramModel& lex = *dag.models().lex;
  double t_edit, t_lex, o_edit = 0, o_lex = 0;
  if (!revisit) {
    t_edit = edit_surprisal(dag, n, edit_history(dag, n));
    t_lex = surprisal(lex, dag.ids(dag.clean_history(n, 2), Model::Lex), dag.node(n).lex_id);
    if (n >= 1) {
      o_edit = edit_surprisal(dag, n - 1, edit_history(dag, n - 1));
      o_lex = values_of(dag, Model::Lex, n - 1).s;
    }
  } else {
    const std::size_t t = n - 1;
    t_edit = edit_surprisal(dag, t, edit_history(dag, t));
    t_lex = values_of(dag, Model::Lex, t).s;
    // w_n read as continuing an edit span that starts at w_{n-1}
    o_edit = edit_surprisal(dag, n, t);
    o_lex = surprisal(lex, dag.ids(dag.clean_history(t, 2), Model::Lex), dag.node(n).lex_id);
  }
  b.set("s_edit", t_edit);
  b.set("s_lex", t_lex);
  b.set("s_diff", t_lex - t_edit);
  b.set("other_s_edit", o_edit);
  b.set("other_s_lex", o_lex);
  b.set("other_s_diff", o_lex - o_edit);
  b.set("is_revisit", revisit);
  return b.done();
}

double wml_boost(const PrefixDag& dag, Model m, std::size_t n, std::size_t c) {
  const auto& node = dag.node(n);
  const NodeValues here = values_of(dag, m, n);
  const NodeValues excised = dag.evaluate(m, node.id(m), dag.clean_history(c, 2));
  return excised.wml - here.wml;
}

FeatureVector rp_start_features(const PrefixDag& dag, std::size_t n) {
  const auto& node = dag.node(n);
  if (!node.valued) throw std::logic_error("rp_start_features: node not valued");
  Builder b(Stage::RpStart);
  const auto back = dag.clean_history(n, kBestScan);
  for (Model m : {Model::Lex, Model::Pos}) {
    const std::string sfx = suffix(m);
    const NodeValues& v = node.values(m);
    double prev_wml = v.wml, prev_h;
    if (node.pred) {
      const NodeValues pv = values_of(dag, m, *node.pred);
      prev_wml = pv.wml;
      prev_h = pv.h;
    } else {
      const WordId start[2] = {NGramModel::kBos, NGramModel::kBos};
      prev_h = dag.model(m).entropy(start);
    }
    double best_boost = 0.0, best_reduce = 0.0;
    bool any = false;
    for (std::size_t c : back) {
      const NodeValues ex = dag.evaluate(m, node.id(m), dag.clean_history(c, 2));
      const double boost = ex.wml - v.wml;
      const double reduce = v.h - ex.h;
      best_boost = any ? std::max(best_boost, boost) : boost;
      best_reduce = any ? std::max(best_reduce, reduce) : reduce;
      any = true;
    }
    b.set("s" + sfx, v.s);
    b.set("WML" + sfx, v.wml);
    b.set("DeltaWML" + sfx, prev_wml - v.wml);
    b.set("BestWMLBoost" + sfx, best_boost);
    b.set("H" + sfx, v.h);
    b.set("InformationGain" + sfx, prev_h - v.s);
    b.set("DeltaH" + sfx, prev_h - v.h);
    b.set("BestEntropyReduce" + sfx, best_reduce);
  }
  for (std::size_t x = 1; x <= 3; ++x) {
    std::optional<std::size_t> w;
    if (back.size() >= x) w = back[back.size() - x];
    b.set("w_i-" + std::to_string(x) + "=w_i", same_word(dag, w, n));
    b.set("POS_i-" + std::to_string(x) + "=POS_i", same_pos(dag, w, n));
  }
  b.set("edit", n >= 1 && dag.node(n - 1).ed);
  return b.done();
}

FeatureVector rm_start_features(const PrefixDag& dag, std::size_t rp, std::size_t c) {
  if (rp >= dag.size() || c >= rp || rp - c > kWindow)
    throw std::out_of_range("rm_start_features: candidate outside the 7-word window");
  Builder b(Stage::RmStart);
  const auto& onset = dag.node(rp);
  const auto& cand = dag.node(c);
  const auto between = non_edit_between(dag, c + 1, rp);
  const auto c_prev = cand.pred;
  for (Model m : {Model::Lex, Model::Pos}) {
    const std::string sfx = suffix(m);
    const NGramModel& lm = dag.model(m);
    const NodeValues here = values_of(dag, m, rp);
    const NodeValues ex = dag.evaluate(m, onset.id(m), dag.clean_history(c, 2));
    const double boost = ex.wml - here.wml;
    double next_boost = 0.0, max_closer = -1e300;
    for (std::size_t k = 0; k < between.size(); ++k) {
      const double bk = wml_boost(dag, m, rp, between[k]);
      if (k == 0) next_boost = bk;
      max_closer = std::max(max_closer, bk);
    }
    const WordId prev_id = c_prev ? dag.node(*c_prev).id(m) : NGramModel::kBos;
    const WordId rm_ctx[2] = {prev_id, cand.id(m)};
    const WordId rp_ctx[2] = {prev_id, onset.id(m)};
    const NodeValues cv = values_of(dag, m, c);
    b.set("WMLboost" + sfx, boost);
    b.set("DeltaWMLboost" + sfx, boost - next_boost);
    b.set("KL" + sfx, lm.kl(rm_ctx, rp_ctx));
    b.set("s_rm" + sfx, cv.s);
    b.set("WML_rm" + sfx, cv.wml);
    b.set("H_rm" + sfx, cv.h);
    b.set("EntropyReduce" + sfx, here.h - ex.h);
    b.set("s_excised" + sfx, ex.s);
    b.set("SurprisalGain" + sfx, here.s - ex.s);
    b.set("WML_excised" + sfx, ex.wml);
    b.set("IsMaxBoost" + sfx, between.empty() || boost >= max_closer);
  }
  std::optional<std::size_t> next;
  if (!between.empty()) next = between.front();
  b.set("distance", static_cast<double>(rp - c));
  b.set("rm_length", static_cast<double>(non_edit_between(dag, c, rp).size()));
  b.set("w_rm=w_rp", same_word(dag, c, rp));
  b.set("POS_rm=POS_rp", same_pos(dag, c, rp));
  b.set("w_rm+1=w_rp", same_word(dag, next, rp));
  b.set("POS_rm+1=POS_rp", same_pos(dag, next, rp));
  b.set("w_rm-1=w_rp", same_word(dag, c_prev, rp));
  b.set("POS_rm-1=POS_rp", same_pos(dag, c_prev, rp));
  b.set("interregnum", rp >= 1 && dag.node(rp - 1).ed);
  b.set("utterance_start", !c_prev.has_value());
  return b.done();
}

FeatureVector rp_end_features(const PrefixDag& dag, const RepairSpan& span, std::size_t e,
                              bool zero_length) {
  const std::size_t a = span.rm_start, bidx = span.rp_start;
  if (bidx >= dag.size() || a >= bidx || bidx - a > kWindow)
    throw std::out_of_range("rp_end_features: bad repair span");
  if (!zero_length && (e < bidx || e >= dag.size() || e - bidx > kWindow))
    throw std::out_of_range("rp_end_features: candidate end outside the 7-word window");
  const auto rm = non_edit_between(dag, a, bidx);
  if (rm.empty()) throw std::invalid_argument("rp_end_features: empty reparandum");
  const std::size_t rm_end = rm.back();
  const std::vector<std::size_t> rp = zero_length ? std::vector<std::size_t>{}
                                                  : non_edit_between(dag, bidx, e + 1);
  const std::size_t end = zero_length ? bidx : e;
  const auto prefix = dag.clean_history(a, 2);

  Builder b(Stage::RpEnd);
  for (Model m : {Model::Lex, Model::Pos}) {
    const std::string sfx = suffix(m);
    const NGramModel& lm = dag.model(m);
    const auto rm_ctx = tail_context(dag.ids(dag.clean_path_to(rm_end, 2), m));
    std::vector<WordId> rp_seq = dag.ids(prefix, m);
    for (std::size_t i : rp) rp_seq.push_back(dag.node(i).id(m));
    b.set("KL" + sfx, lm.kl(rm_ctx, tail_context(rp_seq)));

    const auto pre = dag.ids(prefix, m);
    std::vector<WordId> rm_words = dag.ids(rm, m);
    std::vector<WordId> rp_words = dag.ids(rp, m);
    if (zero_length) {
      rp_words = {dag.node(bidx).id(m)};
      rm_words.push_back(dag.node(bidx).id(m));
    }
    b.set("ReparandumRepairDifference" + sfx,
          sequence_logprob(lm, pre, rp_words) - sequence_logprob(lm, pre, rm_words));

    const NodeValues ev = values_of(dag, m, end);
    const NodeValues rv = values_of(dag, m, rm_end);
    b.set("s" + sfx, ev.s);
    b.set("WML" + sfx, ev.wml);
    b.set("H" + sfx, ev.h);
    b.set("DeltaWML" + sfx, rv.wml - ev.wml);
    if (m == Model::Lex) b.set("DeltaH^lex", rv.h - ev.h);
  }
  b.set("rp_length", static_cast<double>(rp.size()));
  b.set("rm_length", static_cast<double>(rm.size()));
  b.set("length_difference", static_cast<double>(rm.size()) - static_cast<double>(rp.size()));
  b.set("w_e=w_rm_end", same_word(dag, rm_end, end));
  b.set("POS_e=POS_rm_end", same_pos(dag, rm_end, end));
  std::optional<std::size_t> parallel;
  if (!rp.empty() && rp.size() <= rm.size()) parallel = rm[rp.size() - 1];
  b.set("w_e=w_parallel", same_word(dag, parallel, end));
  b.set("POS_e=POS_parallel", same_pos(dag, parallel, end));
  b.set("zero_length", zero_length);
  bool inter = false;
  for (std::size_t i = rm_end + 1; i < bidx; ++i) inter = inter || dag.node(i).ed;
  b.set("interregnum", inter);
  double copies = 0;
  for (std::size_t j = 0; j < rp.size() && j < rm.size(); ++j)
    if (dag.node(rp[j]).token.word == dag.node(rm[j]).token.word) copies += 1;
  b.set("copy_fraction", rp.empty() ? 0.0 : copies / static_cast<double>(rp.size()));
  return b.done();
}

}  // namespace stir
