#pragma once

#include <string>

#include <json.hpp>

#include "survkit/bart.hpp"
#include "survkit/cox.hpp"
#include "survkit/rsf.hpp"

namespace survkit {

// Versioned JSON model artifacts. Every document carries format_version,
// kind ("cox" | "rsf" | "bart"), and the training schema; the model payload
// sits under "model". Serialization is deterministic (sorted keys, shortest
// round-trip numbers), so equal fits produce byte-equal files.

nlohmann::json cox_to_json(const CoxModel& model);
CoxModel cox_from_json(const nlohmann::json& doc);

nlohmann::json forest_to_json(const Forest& forest);
Forest forest_from_json(const nlohmann::json& doc);

nlohmann::json bart_to_json(const BartPosterior& post);
BartPosterior bart_from_json(const nlohmann::json& doc);

// Envelope validation; returns the kind string.
std::string model_kind(const nlohmann::json& doc);

void write_model_file(const std::string& path, const nlohmann::json& doc);
nlohmann::json read_model_file(const std::string& path);

}  // namespace survkit
