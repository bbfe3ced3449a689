#pragma once

// Metrics output: "dasc-metrics/1" JSON (per-cycle records plus a run
// summary) and a one-row summary CSV.

#include <ostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "dasc/config.hpp"
#include "dasc/engine.hpp"
#include "dasc/metrics.hpp"

namespace dasc {

inline constexpr const char* kMetricsSchema = "dasc-metrics/1";

namespace detail {
inline void put_ratio(nlohmann::ordered_json& j, const char* key, Ratio r) {
  j[key] = r.value;
  j[std::string(key) + "_defined"] = r.defined;
}

inline void put_scores(nlohmann::ordered_json& j, const Confusion& c, const DeadlineTally& d) {
  j["tp"] = c.tp;
  j["fp"] = c.fp;
  j["tn"] = c.tn;
  j["fn"] = c.fn;
  put_ratio(j, "accuracy", c.accuracy());
  put_ratio(j, "precision", c.precision());
  put_ratio(j, "recall", c.recall());
  put_ratio(j, "f1", c.f1());
  j["accepted_tasks"] = d.accepted;
  j["deadline_hits"] = d.hits;
  j["deadline_misses"] = d.misses;
  put_ratio(j, "deadline_hit_rate", d.hit_rate());
}
}  // namespace detail

inline nlohmann::ordered_json metrics_json(const std::string& scenario, const RunConfig& cfg, const RunResult& r) {
  nlohmann::ordered_json j;
  j["schema"] = kMetricsSchema;
  j["scenario"] = scenario;
  j["scheme"] = std::string(scheme_name(cfg.scheme));
  j["seed"] = cfg.seed;
  j["cycles_run"] = r.cycles_run;
  nlohmann::ordered_json cycles = nlohmann::ordered_json::array();
  for (const auto& c : r.metrics.cycles) {
    nlohmann::ordered_json row;
    row["cycle"] = c.cycle;
    row["events_reported"] = c.events;
    row["concluded"] = c.concluded;
    row["tasks"] = c.tasks;
    row["verified"] = c.verified;
    row["drops"] = c.drops;
    row["reallocations"] = c.reallocations;
    detail::put_scores(row, c.confusion, c.deadlines);
    row["kappa"] = c.kappa;
    row["sigma"] = c.sigma;
    row["mean_reputation"] = c.mean_reputation;
    row["mean_accessibility"] = c.mean_accessibility;
    cycles.push_back(std::move(row));
  }
  j["cycles"] = std::move(cycles);
  nlohmann::ordered_json summary;
  detail::put_scores(summary, r.metrics.confusion, r.metrics.deadlines);
  summary["sigma_cap_hits"] = r.metrics.sigma_cap_hits;
  summary["uncertified_allocations"] = r.metrics.uncertified_allocations;
  summary["diagnostics"] = r.diagnostics.size();
  j["summary"] = std::move(summary);
  return j;
}

inline constexpr const char* kSummaryCsvHeader =
    "scenario,scheme,seed,cycles,tp,fp,tn,fn,accuracy,precision,recall,f1,accepted_tasks,deadline_hits,"
    "deadline_hit_rate,deadline_hit_rate_defined";

inline std::string summary_csv_row(const std::string& scenario, const RunConfig& cfg, const RunResult& r) {
  const auto& c = r.metrics.confusion;
  const auto& d = r.metrics.deadlines;
  std::ostringstream o;
  o.precision(17);
  o << scenario << ',' << scheme_name(cfg.scheme) << ',' << cfg.seed << ',' << r.cycles_run << ',' << c.tp << ','
    << c.fp << ',' << c.tn << ',' << c.fn << ',' << c.accuracy().value << ',' << c.precision().value << ','
    << c.recall().value << ',' << c.f1().value << ',' << d.accepted << ',' << d.hits << ',' << d.hit_rate().value
    << ',' << (d.hit_rate().defined ? 1 : 0);
  return o.str();
}

}  // namespace dasc
