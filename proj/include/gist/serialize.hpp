#pragma once

#include <json.hpp>

#include "gist/pipeline.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace gist {

nlohmann::json to_json(const CorrelationStat& s);
nlohmann::json to_json(const OfflineReport& r);
nlohmann::json to_json(const SelectionPlan& p);
nlohmann::json to_json(const EvalMetrics& e);
nlohmann::json to_json(const Heatmap& h);
nlohmann::json to_json(const Dendrogram& d);
/// {"property":"kmnc","mut":..,"k":..,"profiles":{testset:{neuron:[sections]}}}
nlohmann::json kmnc_profiles_json(const std::string& mut, int k, const std::map<std::string, CoverageProfile>& profiles);
/// {"property":"fault_types","mut":..,"config_hash":..,"profiles":{testset:[ids]},"counts":..}
nlohmann::json to_json(const FaultTypeProfile& p);

/// Per-objective rows: metric,objective,mut_type,seed,n,tau,p,method,error
void write_offline_csv(const std::filesystem::path& path, const OfflineReport& r);
/// Per-metric aggregates: metric,n,median_tau,q1,q3,frac_p05,frac_p10,mean_rank,verdict
void write_summary_csv(const std::filesystem::path& path, const OfflineReport& r);
/// T x T rank matrix with a leading type column; empty cells for missing pairs.
void write_heatmap_csv(const std::filesystem::path& path, const Heatmap& h);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace gist
