#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "iqbart/data.hpp"
#include "iqbart/model.hpp"
#include "iqbart/sampler.hpp"

namespace iqbart {

std::string code_version();

/// Provenance stamped on every artifact.
struct ArtifactMeta {
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string version = code_version();
};

/// FNV-1a 64 of the compact JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& config);

/// Comma-separated, header row required, '.' decimals, no quoting. Lines
/// starting with '#' are comments. Throws InputError (with line and column)
/// on malformed content and NonFiniteError on nan/inf cells.
struct CsvTable {
  std::vector<std::string> header;
  Matrix data;

  std::size_t column_index(const std::string& name) const;  // MissingColumnError
};

CsvTable parse_csv(std::istream& in, const std::string& source = "<stream>");
CsvTable read_csv(const std::string& path);

/// y from `y_columns`; x from `x_columns`, or every other column when empty.
Dataset select_columns(const CsvTable& table, const std::vector<std::string>& y_columns,
                       const std::vector<std::string>& x_columns = {});

/// Time-series design: difference `diff` times, then regress z_t on
/// (z_{t-1}, ..., z_{t-lag}); row t only uses indices below t.
Dataset make_lagged(std::span<const double> series, std::size_t lag, std::size_t diff = 0);

/// Shortest round-trip decimal form.
std::string format_double(double v);

void write_meta(std::ostream& out, const ArtifactMeta& meta);
void write_csv(std::ostream& out, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows, const ArtifactMeta& meta);

nlohmann::json sampler_config_json(const SamplerConfig& cfg);
SamplerConfig sampler_config_from_json(const nlohmann::json& j);
nlohmann::json scheme_json(const AugmentationScheme& s);
AugmentationScheme scheme_from_json(const nlohmann::json& j);

nlohmann::json model_json(const QuantileModel& model);
QuantileModel model_from_json(const nlohmann::json& j);
nlohmann::json multivariate_model_json(const MultivariateQuantileModel& model);
MultivariateQuantileModel multivariate_model_from_json(const nlohmann::json& j);

/// Writes `j` with a trailing newline; byte-stable for equal inputs.
void write_json_file(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::string& path);

}  // namespace iqbart
