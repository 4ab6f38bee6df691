// SPDX-License-Identifier: Apache-2.0
//
// Line-delimited JSON artifacts. Line 1 of every file is a header object
// {"schema", "version", "seed", "config_digest", "config", ...}; each later
// line is one record. Field order is fixed (ordered_json) so equal inputs
// serialize to equal bytes. See docs/formats.md for the per-file layouts.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "pad/bench_sim.h"
#include "pad/classifier.h"
#include "pad/label_pipeline.h"
#include "pad/lm_core.h"

namespace pad {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

// FNV-1a 64, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);
// Digest of the compact serialization of `config`.
std::string config_digest(const Json& config);

// Header with schema name, version, seed, digest and config. Fields of
// `extra` are appended after those.
Json make_header(const std::string& schema, std::uint64_t seed, const Json& config,
                 const Json& extra = Json::object());

struct JsonlFile {
  Json header;
  std::vector<Json> rows;
};

// Throws Error when the file cannot be written.
void write_jsonl(const std::filesystem::path& path, const Json& header,
                 const std::vector<Json>& rows);
// Throws SchemaError on a missing/garbled header, a different schema name or
// a different version, and Error when the file cannot be read.
JsonlFile read_jsonl(const std::filesystem::path& path, const std::string& expected_schema);

Json to_json(const GenerationParams& p);
GenerationParams generation_params_from_json(const Json& j);

Json to_json(const SyntheticTaskSpec& spec);
SyntheticTaskSpec task_spec_from_json(const Json& j);

Json to_json(const LabeledSample& s);
LabeledSample labeled_sample_from_json(const Json& j);

Json to_json(const MlpParams& p);
MlpParams mlp_params_from_json(const Json& j);

Json to_json(const TrainReport& r);
Json to_json(const RunReport& r);

// One audit line per verified position.
Json audit_record(std::size_t context_id, std::size_t block, const PositionRecord& rec);

}  // namespace pad
