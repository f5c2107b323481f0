#pragma once

// Instance JSON:
// {
//   "format": "voql-instance", "version": 1,
//   "horizon": H, "num_states": nX, "num_actions": nA, "seed": u64,
//   "reward_model": "deterministic" | "bernoulli",
//   "initial": [nX],
//   "feature_dim": d,                        (only with features)
//   "levels": [ {                            (H entries, level 1 first)
//       "transitions": [[nX] per pair],      pair index z = x * nA + a
//       "rewards": [per pair],
//       "features": [[d] per pair], "measures": [[nX] per feature],
//       "theta": [d], "norm_bound": B        (only with features)
//   } ],
//   "function_classes": { ... }              (optional, see harness)
// }

#include <string>

#include "json.hpp"
#include "voql/env.hpp"

namespace voql {

nlohmann::json instance_to_json(const EpisodicMdp& mdp);
EpisodicMdp instance_from_json(const nlohmann::json& doc);

// Parses JSON text, reporting syntax errors with line and column.
nlohmann::json parse_json_text(const std::string& text, const std::string& source);
nlohmann::json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

void save_instance(const EpisodicMdp& mdp, const std::string& path);
EpisodicMdp load_instance(const std::string& path);

}  // namespace voql
