#pragma once

// Trace files.
//
//   {
//     "n": 3, "t": 2, "strategy": "threshold:1", "seed": 42,
//     "records": [
//       {"ball": 1, "primary": 2, "decision": "accept", "final": 2, "sec_idx": null},
//       {"ball": 2, "primary": 2, "decision": "reject", "final": 1, "sec_idx": 0}
//     ],
//     "loads": [1, 1, 0]
//   }
//
// Bins are 1-based. With a retry budget k > 1 each rejected record carries an
// extra "rejects" count; "sec_idx" is then the pool index of the landing draw.

#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "thinlab/engine.hpp"

namespace thinlab {

inline void write_trace_json(std::ostream& out, const Trace& tr) {
  const bool multi = tr.params.strategy.retry_budget() > 1;
  out << "{\"n\":" << tr.params.n << ",\"t\":" << tr.params.t << ",\"strategy\":\""
      << tr.params.strategy.to_string() << "\",\"seed\":" << tr.params.seed << ",\"records\":[";
  bool first = true;
  for (const auto& r : tr.records) {
    out << (first ? "\n" : ",\n");
    first = false;
    out << "{\"ball\":" << r.ball << ",\"primary\":" << r.primary + 1 << ",\"decision\":\""
        << (r.accepted_primary() ? "accept" : "reject") << "\",\"final\":" << r.final_bin + 1
        << ",\"sec_idx\":";
    if (r.secondary_index) out << *r.secondary_index;
    else out << "null";
    if (multi && !r.accepted_primary()) out << ",\"rejects\":" << static_cast<unsigned>(r.rejects);
    out << '}';
  }
  out << "\n],\"loads\":[";
  for (bin_t m = 0; m < tr.final_state.n; ++m) out << (m ? "," : "") << tr.final_state.load[m];
  out << "]}\n";
}

/// Reads a trace and rebuilds its final state by replay. Throws
/// std::runtime_error when the stored loads disagree with the replay.
inline Trace read_trace_json(std::istream& in) {
  const auto j = nlohmann::json::parse(in);
  Trace tr;
  const auto n = j.at("n").get<std::uint64_t>();
  if (n == 0 || n > 0xffffffffULL) throw std::runtime_error("trace: bad bin count");
  tr.params.n = static_cast<bin_t>(n);
  tr.params.t = j.at("t").get<std::uint64_t>();
  tr.params.strategy = parse_strategy(j.at("strategy").get<std::string>(), n);
  tr.params.seed = j.at("seed").get<std::uint64_t>();
  const auto budget = static_cast<std::uint8_t>(tr.params.strategy.retry_budget());

  const auto& recs = j.at("records");
  tr.records.reserve(recs.size());
  for (const auto& jr : recs) {
    AllocationRecord r;
    r.ball = jr.at("ball").get<std::uint64_t>();
    r.primary = jr.at("primary").get<bin_t>() - 1;
    r.final_bin = jr.at("final").get<bin_t>() - 1;
    r.retry_budget = budget;
    const auto decision = jr.at("decision").get<std::string>();
    if (decision == "accept") {
      r.rejects = 0;
    } else if (decision == "reject") {
      r.rejects = jr.contains("rejects") ? jr["rejects"].get<std::uint8_t>() : 1;
    } else {
      throw std::runtime_error("trace: unknown decision '" + decision + "'");
    }
    if (!jr.at("sec_idx").is_null()) r.secondary_index = jr["sec_idx"].get<std::uint64_t>();
    tr.records.push_back(r);
  }
  if (tr.records.size() != tr.params.t) throw std::runtime_error("trace: record count != t");

  tr.final_state = replay(tr);
  const auto loads = j.at("loads").get<std::vector<count_t>>();
  if (loads != tr.final_state.load) throw std::runtime_error("trace: loads disagree with replay");
  return tr;
}

}  // namespace thinlab
