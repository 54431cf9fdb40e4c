#include "stir/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace stir {

namespace {

constexpr TagClass kClasses[] = {TagClass::Rm, TagClass::Ed, TagClass::Rp};

std::uint8_t coarse_bits(const TagSet& s) {
  std::uint8_t b = 0;
  for (std::size_t k = 0; k < 3; ++k)
    if (s.has_class(kClasses[k])) b |= static_cast<std::uint8_t>(1u << k);
  return b;
}

std::uint8_t class_bit(TagClass c) {
  for (std::size_t k = 0; k < 3; ++k)
    if (kClasses[k] == c) return static_cast<std::uint8_t>(1u << k);
  return 0;
}

void count_rm(const TagSet& gold, const TagSet& hyp, std::size_t& tp, std::size_t& fp,
              std::size_t& fn) {
  const bool g = gold.has_rm(), h = hyp.has_rm();
  tp += g && h;
  fp += !g && h;
  fn += g && !h;
}

std::string num(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

FScore f_score(std::size_t tp, std::size_t fp, std::size_t fn) {
  FScore s;
  s.tp = tp;
  s.fp = fp;
  s.fn = fn;
  if (tp + fp == 0 && tp + fn == 0) {
    s.undefined = true;
    s.f = 1.0;
    return s;
  }
  if (tp + fp == 0 || tp + fn == 0) s.undefined = true;
  s.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  s.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  s.f = s.precision + s.recall == 0.0 ? 0.0
                                      : 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

FScore f_score_rm(const std::vector<GoldLabels>& gold, const std::vector<LabelState>& hyp) {
  if (gold.size() != hyp.size()) throw std::invalid_argument("f_score_rm: utterance count mismatch");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t u = 0; u < gold.size(); ++u) {
    if (gold[u].size() != hyp[u].size()) throw std::invalid_argument("f_score_rm: length mismatch");
    for (std::size_t i = 0; i < gold[u].size(); ++i) count_rm(gold[u][i], hyp[u][i], tp, fp, fn);
  }
  return f_score(tp, fp, fn);
}

FScore f_score_structure(const std::vector<GoldLabels>& gold, const std::vector<LabelState>& hyp) {
  if (gold.size() != hyp.size()) throw std::invalid_argument("f_score_structure: utterance count mismatch");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t u = 0; u < gold.size(); ++u) {
    if (gold[u].size() != hyp[u].size()) throw std::invalid_argument("f_score_structure: length mismatch");
    for (std::size_t i = 0; i < gold[u].size(); ++i) {
      for (TagClass c : kClasses) {
        const bool g = gold[u][i].has_class(c), h = hyp[u][i].has_class(c);
        tp += g && h;
        fp += !g && h;
        fn += g && !h;
      }
    }
  }
  return f_score(tp, fp, fn);
}

DelayedAccuracy delayed_accuracy(const std::vector<GoldLabels>& gold,
                                 const std::vector<std::vector<LabelState>>& history) {
  if (gold.size() != history.size()) throw std::invalid_argument("delayed_accuracy: utterance count mismatch");
  DelayedAccuracy out;
  for (std::size_t d = 1; d <= kDelays; ++d) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t u = 0; u < gold.size(); ++u) {
      const auto& h = history[u];
      for (std::size_t t = d; t < h.size(); ++t) {
        const std::size_t i = t - d;
        if (i >= gold[u].size() || i >= h[t].size())
          throw std::invalid_argument("delayed_accuracy: snapshot shorter than prefix");
        count_rm(gold[u][i], h[t][i], tp, fp, fn);
      }
    }
    out.curve[d - 1] = f_score(tp, fp, fn).f;
  }
  double sum = 0.0;
  for (double v : out.curve) sum += v;
  out.mean = sum / static_cast<double>(kDelays);
  return out;
}

std::vector<std::vector<CoarseEdit>> coarse_edit_log(const std::vector<std::vector<LabelEdit>>& log) {
  std::vector<std::vector<CoarseEdit>> out;
  LabelState state;
  for (const auto& step : log) {
    std::vector<std::uint8_t> before(state.size());
    for (std::size_t i = 0; i < state.size(); ++i) before[i] = coarse_bits(state[i]);
    apply_edits(state, step);
    before.resize(state.size(), 0);

    std::vector<std::size_t> touched;
    for (const auto& e : step) touched.push_back(e.index);
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());

    std::vector<CoarseEdit> coarse;
    for (std::size_t i : touched) {
      const std::uint8_t after = coarse_bits(state[i]);
      for (TagClass c : kClasses) {
        const auto b = class_bit(c);
        if ((before[i] & b) && !(after & b)) coarse.push_back({LabelEdit::Op::Revoke, i, c});
      }
      for (TagClass c : kClasses) {
        const auto b = class_bit(c);
        if (!(before[i] & b) && (after & b)) coarse.push_back({LabelEdit::Op::Add, i, c});
      }
      for (const auto& e : step)
        if (e.index == i && !e.tag && e.op == LabelEdit::Op::Add)
          coarse.push_back({LabelEdit::Op::Add, i, std::nullopt});
    }
    out.push_back(std::move(coarse));
  }
  return out;
}

EditOverhead edit_overhead(const std::vector<std::vector<CoarseEdit>>& log,
                           const std::vector<GoldLabels>& incremental_gold) {
  if (log.size() > incremental_gold.size())
    throw std::invalid_argument("edit_overhead: more steps than incremental gold prefixes");
  EditOverhead eo;
  std::vector<std::uint8_t> necessary;
  std::vector<bool> seen;
  for (std::size_t t = 0; t < log.size(); ++t) {
    const auto& gold = incremental_gold[t];
    necessary.resize(gold.size(), 0);
    seen.resize(gold.size(), false);
    for (const auto& e : log[t]) {
      ++eo.total;
      bool ok = false;
      if (e.index < gold.size()) {
        const std::uint8_t g = coarse_bits(gold[e.index]);
        std::uint8_t& have = necessary[e.index];
        if (!e.cls) {
          ok = e.op == LabelEdit::Op::Add && g == 0 && !seen[e.index];
          if (ok) seen[e.index] = true;
        } else {
          const auto b = class_bit(*e.cls);
          if (e.op == LabelEdit::Op::Add) {
            ok = (g & b) && !(have & b);
            if (ok) {
              have |= b;
              seen[e.index] = true;
            }
          } else {
            ok = (have & b) && !(g & b);
            if (ok) have &= static_cast<std::uint8_t>(~b);
          }
        }
      }
      if (!ok) ++eo.unnecessary;
    }
  }
  return eo;
}

TimeToDetection time_to_detection(
    const std::vector<Utterance>& gold,
    const std::vector<std::vector<std::vector<std::pair<std::size_t, std::size_t>>>>& asserted) {
  if (gold.size() != asserted.size()) throw std::invalid_argument("time_to_detection: utterance count mismatch");
  TimeToDetection out;
  double rm_sum = 0.0, rp_sum = 0.0;
  for (std::size_t u = 0; u < gold.size(); ++u) {
    for (const auto& r : gold[u].repairs) {
      const std::pair<std::size_t, std::size_t> key{r.rm_start, r.rp_start};
      for (std::size_t t = 0; t < asserted[u].size(); ++t) {
        const auto& a = asserted[u][t];
        if (std::find(a.begin(), a.end(), key) == a.end()) continue;
        ++out.detected;
        rm_sum += static_cast<double>(t - r.rm_start + 1);
        rp_sum += static_cast<double>(t - r.rp_start + 1);
        break;
      }
    }
  }
  if (out.detected > 0) {
    out.td_rm = rm_sum / static_cast<double>(out.detected);
    out.td_rp = rp_sum / static_cast<double>(out.detected);
  }
  return out;
}

double processing_overhead(std::size_t classifications, std::size_t words) {
  return words == 0 ? 0.0 : static_cast<double>(classifications) / static_cast<double>(words);
}

MetricsReport evaluate(const std::vector<Utterance>& gold,
                       const std::vector<std::vector<StepResult>>& runs) {
  if (gold.size() != runs.size()) throw std::invalid_argument("evaluate: utterance count mismatch");
  std::vector<GoldLabels> final_gold;
  std::vector<LabelState> final_hyp;
  std::vector<std::vector<LabelState>> history;
  std::vector<std::vector<std::vector<std::pair<std::size_t, std::size_t>>>> asserted;
  MetricsReport r;
  for (std::size_t u = 0; u < gold.size(); ++u) {
    const auto& steps = runs[u];
    if (steps.size() != gold[u].size())
      throw std::invalid_argument("evaluate: run length differs from utterance length");
    final_gold.push_back(gold_labels(gold[u]));
    final_hyp.push_back(steps.empty() ? LabelState{} : steps.back().state);
    auto& h = history.emplace_back();
    auto& a = asserted.emplace_back();
    std::vector<std::vector<LabelEdit>> log;
    for (const auto& s : steps) {
      h.push_back(s.state);
      a.push_back(s.asserted);
      log.push_back(s.edits);
      r.classifications += s.classifications;
    }
    r.words += steps.size();
    r.eo_counts += edit_overhead(coarse_edit_log(log), to_incremental_gold(gold[u]));
  }
  r.rm = f_score_rm(final_gold, final_hyp);
  r.s = f_score_structure(final_gold, final_hyp);
  r.f_rm = r.rm.f;
  r.f_s = r.s.f;
  const auto da = delayed_accuracy(final_gold, history);
  r.da = da.mean;
  r.da_curve = da.curve;
  r.eo = r.eo_counts.value();
  r.po = processing_overhead(r.classifications, r.words);
  const auto td = time_to_detection(gold, asserted);
  r.td_rm = td.td_rm;
  r.td_rp = td.td_rp;
  return r;
}

std::vector<double> total_score(const std::vector<MetricsReport>& reports) {
  std::vector<double> ts(reports.size(), 0.0);
  if (reports.empty()) return ts;
  auto higher = [&](auto get) {
    double best = get(reports[0]);
    for (const auto& r : reports) best = std::max(best, get(r));
    std::vector<double> v;
    for (const auto& r : reports) v.push_back(best > 0.0 ? get(r) / best : 1.0);
    return v;
  };
  auto lower = [&](auto get) {
    double best = get(reports[0]);
    for (const auto& r : reports) best = std::min(best, get(r));
    std::vector<double> v;
    for (const auto& r : reports) v.push_back(get(r) > 0.0 ? std::min(1.0, best / get(r)) : 1.0);
    return v;
  };
  const std::vector<std::vector<double>> parts = {
      higher([](const MetricsReport& r) { return r.f_rm; }),
      higher([](const MetricsReport& r) { return r.f_s; }),
      higher([](const MetricsReport& r) { return r.da; }),
      lower([](const MetricsReport& r) { return r.eo; }),
      lower([](const MetricsReport& r) { return r.po; }),
  };
  for (std::size_t i = 0; i < reports.size(); ++i) {
    double sum = 0.0;
    for (const auto& p : parts) sum += p[i];
    ts[i] = sum / static_cast<double>(parts.size());
  }
  return ts;
}

void assign_total_scores(std::vector<MetricsReport>& reports) {
  const auto ts = total_score(reports);
  for (std::size_t i = 0; i < reports.size(); ++i) reports[i].ts = ts[i];
}

BestRows best_rows(const std::vector<MetricsReport>& reports) {
  BestRows b;
  for (std::size_t i = 1; i < reports.size(); ++i) {
    const auto& r = reports[i];
    if (r.f_rm > reports[b.f_rm].f_rm) b.f_rm = i;
    if (r.f_s > reports[b.f_s].f_s) b.f_s = i;
    if (r.da > reports[b.da].da) b.da = i;
    if (r.eo < reports[b.eo].eo) b.eo = i;
    if (r.po < reports[b.po].po) b.po = i;
    if (r.ts > reports[b.ts].ts) b.ts = i;
  }
  return b;
}

void write_report_table(std::ostream& out, const std::vector<std::string>& names,
                        const std::vector<MetricsReport>& reports) {
  if (names.size() != reports.size()) throw std::invalid_argument("write_report_table: name count mismatch");
  if (reports.empty()) return;
  const BestRows b = best_rows(reports);
  const std::pair<const char*, std::size_t> rows[] = {
      {"Best F_rm", b.f_rm},       {"Best F_s", b.f_s},          {"Best DA", b.da},
      {"Best (lowest) EO", b.eo}, {"Best (lowest) PO", b.po}, {"Best TS", b.ts},
  };
  char line[256];
  std::snprintf(line, sizeof line, "%-18s %7s %7s %7s %7s %7s %7s  %s\n", "", "F_rm", "F_s", "DA", "EO",
                "PO", "TS", "setting");
  out << line;
  for (const auto& [label, i] : rows) {
    const auto& r = reports[i];
    std::snprintf(line, sizeof line, "%-18s %7.3f %7.3f %7.3f %7.3f %7.3f %7.3f  ", label, r.f_rm,
                  r.f_s, r.da, r.eo, r.po, r.ts);
    out << line << names[i] << '\n';
  }
}

void write_report_kv(std::ostream& out, const MetricsReport& r) {
  out << "f_rm=" << num(r.f_rm) << '\n';
  out << "precision_rm=" << num(r.rm.precision) << '\n';
  out << "recall_rm=" << num(r.rm.recall) << '\n';
  out << "f_s=" << num(r.f_s) << '\n';
  out << "da=" << num(r.da) << '\n';
  for (std::size_t d = 0; d < kDelays; ++d) out << "da_" << d + 1 << '=' << num(r.da_curve[d]) << '\n';
  out << "eo=" << num(r.eo) << '\n';
  out << "eo_edits=" << r.eo_counts.total << '\n';
  out << "eo_unnecessary=" << r.eo_counts.unnecessary << '\n';
  out << "po=" << num(r.po) << '\n';
  out << "td_rm=" << (r.td_rm ? num(*r.td_rm) : "absent") << '\n';
  out << "td_rp=" << (r.td_rp ? num(*r.td_rp) : "absent") << '\n';
  out << "ts=" << num(r.ts) << '\n';
  out << "words=" << r.words << '\n';
  out << "classifications=" << r.classifications << '\n';
}

}  // namespace stir
