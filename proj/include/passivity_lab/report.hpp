#pragma once

#include "json.hpp"

#include <fstream>
#include <string>
#include <vector>

#include "passivity_lab/analysis.hpp"
#include "passivity_lab/dictionary.hpp"
#include "passivity_lab/errors.hpp"
#include "passivity_lab/identify.hpp"

namespace passivity_lab {

using json = nlohmann::json;

inline json dictionary_to_json(const Dictionary& dict) {
  json arr = json::array();
  for (const auto& f : dict.features) {
    json idx = json::array({f.i + 1});
    if (f.kind == FeatureKind::cross) idx.push_back(f.j + 1);
    arr.push_back({{"kind", kind_tag(f.kind)}, {"indices", idx}, {"name", f.name()}});
  }
  return arr;
}

inline Dictionary dictionary_from_json(const json& arr, int state_dim) {
  std::vector<Feature> features;
  for (const auto& item : arr) {
    const FeatureKind kind = kind_from_tag(item.at("kind").get<std::string>());
    const auto idx = item.at("indices").get<std::vector<int>>();
    const std::size_t want = kind == FeatureKind::cross ? 2 : 1;
    if (idx.size() != want) throw ParseError("feature has wrong number of indices");
    features.push_back({kind, idx[0] - 1, want == 2 ? idx[1] - 1 : -1});
  }
  try {
    return Dictionary::make(std::move(features), state_dim);
  } catch (const ArgumentError& e) {
    throw ParseError(e.what());
  }
}

inline json estimate_to_json(const StorageEstimate& est) {
  const auto& d = est.diagnostics;
  json j{{"status", "optimal"},
         {"state_dim", est.dictionary.state_dim},
         {"dictionary", dictionary_to_json(est.dictionary)},
         {"theta", std::vector<double>(est.theta.data(), est.theta.data() + est.theta.size())},
         {"margin", est.margin},
         {"supply_kind", supply_tag(est.supply_kind)},
         {"T", d.window},
         {"constraint_count", d.constraint_count},
         {"cuts_added", d.cuts_added},
         {"diagnostics",
          {{"solver_iterations", d.solver_iterations},
           {"seed_cuts", d.seed_cuts},
           {"min_psd_eigenvalue", d.min_psd_eigenvalue}}}};
  if (est.is_pruned()) {
    j["pruned"] = {{"mask", est.pruned_mask}, {"kept_terms", kept_terms(est)}};
  }
  return j;
}

inline json infeasible_to_json(const InfeasibleReport& rep) {
  json j{{"status", status_tag(rep.status)},
         {"T", rep.window},
         {"constraint_count", rep.constraint_count},
         {"summary", rep.summary}};
  if (rep.certificate) {
    const auto& c = *rep.certificate;
    j["certificate"] = {{"combined_rhs", c.combined_rhs},
                        {"residual", c.residual},
                        {"support", (c.multipliers.array() > 0.0).count()},
                        {"summary", c.summary}};
  }
  return j;
}

inline json result_to_json(const IdentifyResult& r) {
  return std::visit(
      [](const auto& v) {
        if constexpr (std::is_same_v<std::decay_t<decltype(v)>, StorageEstimate>)
          return estimate_to_json(v);
        else
          return infeasible_to_json(v);
      },
      r);
}

/// Inverse of estimate_to_json; rejects non-optimal results.
inline StorageEstimate estimate_from_json(const json& j) {
  try {
    if (j.at("status").get<std::string>() != "optimal")
      throw ParseError("result is not an optimal estimate (status " + j.at("status").dump() + ")");
    StorageEstimate est;
    est.dictionary = dictionary_from_json(j.at("dictionary"), j.value("state_dim", 2));
    const auto theta = j.at("theta").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(theta.size()) != est.dictionary.size())
      throw ParseError("theta length does not match the dictionary");
    est.theta = Eigen::Map<const Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(theta.size()));
    est.margin = j.at("margin").get<double>();
    est.supply_kind = supply_from_tag(j.at("supply_kind").get<std::string>());
    est.diagnostics.window = j.value("T", 0);
    est.diagnostics.constraint_count = j.value("constraint_count", 0);
    est.diagnostics.cuts_added = j.value("cuts_added", 0);
    if (j.contains("diagnostics")) {
      const auto& d = j["diagnostics"];
      est.diagnostics.solver_iterations = d.value("solver_iterations", 0);
      est.diagnostics.seed_cuts = d.value("seed_cuts", 0);
      est.diagnostics.min_psd_eigenvalue = d.value("min_psd_eigenvalue", 0.0);
    }
    if (j.contains("pruned")) {
      est.pruned_mask = j["pruned"].at("mask").get<std::vector<bool>>();
      if (est.pruned_mask.size() != theta.size()) throw ParseError("pruned mask has wrong length");
    }
    return est;
  } catch (const json::exception& e) {
    throw ParseError(std::string("result JSON: ") + e.what());
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline json doa_to_json(const DoAEstimate& d, const std::string& storage_ref) {
  json j{{"c", d.level},
         {"storage_ref", storage_ref},
         {"region_kind", region_tag(d.region.kind)},
         {"boundedness_checked", d.boundedness_checked},
         {"limited_by_boundedness", d.limited_by_boundedness},
         {"grid_resolution", d.grid_resolution},
         {"boundary_samples", d.boundary_samples},
         {"boundary_samples_inside", d.boundary_samples_inside},
         {"search_box",
          {{"lower", {d.box_lower(0), d.box_lower(1)}}, {"upper", {d.box_upper(0), d.box_upper(1)}}}}};
  if (d.region.kind == RegionKind::convex_hull) {
    json verts = json::array();
    for (const auto& v : d.region.vertices()) verts.push_back({v(0), v(1)});
    j["region_vertices"] = verts;
  }
  return j;
}

}  // namespace passivity_lab
