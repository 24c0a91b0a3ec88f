#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "mmiq/core.hpp"
#include "mmiq/dipmodel.hpp"
#include "mmiq/interference.hpp"
#include "mmiq/reconstruct.hpp"

// Exchange formats. Mode labels and pair labels are 1-based on disk.
//
//   matrix:      {"n_inputs", "n_outputs", "entries": [[[re, im], ...], ...]}
//   visibility:  {"input_pairs": [[1,2],...], "output_pairs": [...],
//                 "values": [[v or null, ...], ...]}
//   magnitudes:  {"values": [[...]], "uncertainty": [[...]]} or a bare grid
//   trace CSV:   delay_um,coincidences[,accidentals]
namespace mmiq::io {

using nlohmann::json;

/// Parses JSON text; errors carry line and column.
json parse_json(std::string_view text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

/// Two-space indented dump with a trailing newline.
std::string dump(const json& j);

json to_json(const TransitionMatrix& m);
TransitionMatrix matrix_from_json(const json& j);

json to_json(const VisibilityMatrix& v);
VisibilityMatrix visibility_from_json(const json& j);

json to_json(const MagnitudeGrid& g);
MagnitudeGrid magnitudes_from_json(const json& j);

json to_json(const DipFit& fit);
json to_json(const ReconstructionOptions& options);
/// Result bundle: canonical matrix, objective, residual table, diagnostics
/// and the options used.
json to_json(const ReconstructionResult& result, const VisibilityMatrix& measured);

json to_json(const std::map<PhotonConfiguration, double>& distribution);

std::string trace_to_csv(const DipTrace& trace);
DipTrace trace_from_csv(std::string_view text);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

}  // namespace mmiq::io
