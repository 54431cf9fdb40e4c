#include "stir/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace stir {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

nlohmann::json fscore_json(const FScore& f) {
  return {{"precision", f.precision}, {"recall", f.recall}, {"f", f.f},
          {"tp", f.tp},               {"fp", f.fp},         {"fn", f.fn},
          {"undefined", f.undefined}};
}

FScore fscore_from(const nlohmann::json& j) {
  FScore f;
  f.precision = j.at("precision").get<double>();
  f.recall = j.at("recall").get<double>();
  f.f = j.at("f").get<double>();
  f.tp = j.at("tp").get<std::size_t>();
  f.fp = j.at("fp").get<std::size_t>();
  f.fn = j.at("fn").get<std::size_t>();
  f.undefined = j.at("undefined").get<bool>();
  return f;
}

template <class F>
void parallel_for(std::size_t n, std::size_t workers, F&& body) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto run = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

SweepGrid SweepGrid::full() {
  return {{1, 2, 4, 8, 16, 32, 64, 128}, {1, 2, 4, 8, 16}, {1, 2, 4, 8, 16, 32, 64, 128}, {1, 2}, 1.0};
}

std::string SweepSetting::key() const {
  return "rp" + fmt(rp_start_fn) + "_rm" + fmt(rm_start_fn) + "_end" + fmt(rp_end_fn) + "_cap" +
         std::to_string(capacity);
}

std::vector<SweepSetting> enumerate_settings(const SweepGrid& grid) {
  std::vector<SweepSetting> out;
  for (std::size_t cap : grid.capacities)
    for (double a : grid.rp_start_fn)
      for (double b : grid.rm_start_fn)
        for (double c : grid.rp_end_fn) out.push_back({a, b, c, cap});
  return out;
}

std::string result_json(const SweepResult& r) {
  const auto& m = r.report;
  nlohmann::json j;
  j["key"] = r.setting.key();
  j["rp_start_fn"] = r.setting.rp_start_fn;
  j["rm_start_fn"] = r.setting.rm_start_fn;
  j["rp_end_fn"] = r.setting.rp_end_fn;
  j["capacity"] = r.setting.capacity;
  j["f_rm"] = m.f_rm;
  j["f_s"] = m.f_s;
  j["da"] = m.da;
  j["da_curve"] = m.da_curve;
  j["eo"] = m.eo;
  j["eo_edits"] = m.eo_counts.total;
  j["eo_unnecessary"] = m.eo_counts.unnecessary;
  j["po"] = m.po;
  j["td_rm"] = m.td_rm ? nlohmann::json(*m.td_rm) : nlohmann::json(nullptr);
  j["td_rp"] = m.td_rp ? nlohmann::json(*m.td_rp) : nlohmann::json(nullptr);
  j["words"] = m.words;
  j["classifications"] = m.classifications;
  j["rm"] = fscore_json(m.rm);
  j["s"] = fscore_json(m.s);
  return j.dump();
}

bool parse_result_json(const std::string& line, SweepResult& out) {
  try {
    const auto j = nlohmann::json::parse(line);
    SweepResult r;
    r.setting.rp_start_fn = j.at("rp_start_fn").get<double>();
    r.setting.rm_start_fn = j.at("rm_start_fn").get<double>();
    r.setting.rp_end_fn = j.at("rp_end_fn").get<double>();
    r.setting.capacity = j.at("capacity").get<std::size_t>();
    if (j.at("key").get<std::string>() != r.setting.key()) return false;
    auto& m = r.report;
    m.f_rm = j.at("f_rm").get<double>();
    m.f_s = j.at("f_s").get<double>();
    m.da = j.at("da").get<double>();
    m.da_curve = j.at("da_curve").get<std::array<double, kDelays>>();
    m.eo = j.at("eo").get<double>();
    m.eo_counts.total = j.at("eo_edits").get<std::size_t>();
    m.eo_counts.unnecessary = j.at("eo_unnecessary").get<std::size_t>();
    m.po = j.at("po").get<double>();
    if (!j.at("td_rm").is_null()) m.td_rm = j.at("td_rm").get<double>();
    if (!j.at("td_rp").is_null()) m.td_rp = j.at("td_rp").get<double>();
    m.words = j.at("words").get<std::size_t>();
    m.classifications = j.at("classifications").get<std::size_t>();
    m.rm = fscore_from(j.at("rm"));
    m.s = fscore_from(j.at("s"));
    out = std::move(r);
    return true;
  } catch (const nlohmann::json::exception&) {
    return false;
  }
}

MetricsReport evaluate_forests(const LanguageModels& lms, const ForestSet& forests,
                               const std::vector<Utterance>& test, std::size_t capacity) {
  ForestClassifier cls(forests);
  DetectorConfig cfg;
  cfg.capacity = capacity;
  std::vector<std::vector<StepResult>> runs;
  runs.reserve(test.size());
  for (const auto& u : test) runs.push_back(run_detector(lms.set(), cls, u, cfg));
  return evaluate(test, runs);
}

std::vector<SweepResult> run_sweep(const LanguageModels& lms, const StageDatasets& examples,
                                   const ForestParams& params, const std::vector<Utterance>& test,
                                   const SweepGrid& grid, const SweepOptions& options) {
  const auto settings = enumerate_settings(grid);
  std::map<std::string, SweepResult> done;
  if (!options.results.empty() && std::filesystem::exists(options.results)) {
    std::ifstream in(options.results);
    std::string line;
    while (std::getline(in, line)) {
      SweepResult r;
      if (parse_result_json(line, r)) done[r.setting.key()] = r;
    }
  }

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < settings.size(); ++i)
    if (!done.count(settings[i].key())) todo.push_back(i);
  if (options.limit > 0 && todo.size() > options.limit) todo.resize(options.limit);

  // One forest per (stage, cost) actually needed.
  using CacheKey = std::pair<Stage, double>;
  std::map<CacheKey, Forest> cache;
  if (!todo.empty()) {
    std::vector<CacheKey> need{{Stage::Edit, options.edit_fn}};
    for (std::size_t i : todo) {
      need.emplace_back(Stage::RpStart, settings[i].rp_start_fn);
      need.emplace_back(Stage::RmStart, settings[i].rm_start_fn);
      need.emplace_back(Stage::RpEnd, settings[i].rp_end_fn);
    }
    std::sort(need.begin(), need.end());
    need.erase(std::unique(need.begin(), need.end()), need.end());
    std::vector<Forest> trained(need.size());
    const std::string prov = lms.provenance();
    parallel_for(need.size(), options.workers, [&](std::size_t i) {
      const auto [stage, fn] = need[i];
      trained[i] = train_stage_forest(stage, examples[static_cast<std::size_t>(stage)],
                                      CostMatrix{fn, grid.fp_cost}, params, prov);
    });
    for (std::size_t i = 0; i < need.size(); ++i) cache[need[i]] = std::move(trained[i]);
  }

  std::ofstream sink;
  if (!options.results.empty()) {
    if (options.results.has_parent_path()) std::filesystem::create_directories(options.results.parent_path());
    bool needs_newline = false;
    if (std::filesystem::exists(options.results) && std::filesystem::file_size(options.results) > 0) {
      std::ifstream tail(options.results, std::ios::binary);
      tail.seekg(-1, std::ios::end);
      needs_newline = tail.get() != '\n';  // an interrupted run left a partial line
    }
    sink.open(options.results, std::ios::app);
    if (!sink) throw std::runtime_error("cannot write " + options.results.string());
    if (needs_newline) sink << '\n';
  }
  std::mutex mu;
  parallel_for(todo.size(), options.workers, [&](std::size_t k) {
    const SweepSetting& s = settings[todo[k]];
    ForestSet set;
    set.at(Stage::Edit) = cache.at({Stage::Edit, options.edit_fn});
    set.at(Stage::RpStart) = cache.at({Stage::RpStart, s.rp_start_fn});
    set.at(Stage::RmStart) = cache.at({Stage::RmStart, s.rm_start_fn});
    set.at(Stage::RpEnd) = cache.at({Stage::RpEnd, s.rp_end_fn});
    SweepResult r{s, evaluate_forests(lms, set, test, s.capacity)};
    std::lock_guard lock(mu);
    if (sink.is_open()) {
      sink << result_json(r) << '\n';
      sink.flush();
    }
    done[s.key()] = std::move(r);
  });

  std::vector<SweepResult> out;
  for (const auto& s : settings) {
    auto it = done.find(s.key());
    if (it != done.end()) out.push_back(it->second);
  }
  std::vector<MetricsReport> reports;
  for (const auto& r : out) reports.push_back(r.report);
  const auto ts = total_score(reports);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].report.ts = ts[i];
  return out;
}

void write_sweep_table(std::ostream& out, const std::vector<SweepResult>& results) {
  std::vector<std::string> names;
  std::vector<MetricsReport> reports;
  for (const auto& r : results) {
    names.push_back(r.setting.key());
    reports.push_back(r.report);
  }
  write_report_table(out, names, reports);
}

}  // namespace stir
