#include "iqbart/io.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "iqbart/error.hpp"

namespace iqbart {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string kind_name(AugmentationKind k) {
  switch (k) {
    case AugmentationKind::Single: return "single";
    case AugmentationKind::Simultaneous: return "simultaneous";
    case AugmentationKind::FullyAugmented: return "fully_augmented";
  }
  return "fully_augmented";
}

}  // namespace

std::string code_version() { return IQBART_VERSION; }

std::string config_hash(const nlohmann::json& config) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::array<char, 17> buf{};
  std::snprintf(buf.data(), buf.size(), "%016llx", static_cast<unsigned long long>(h));
  return buf.data();
}

std::size_t CsvTable::column_index(const std::string& name) const {
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == name) return j;
  throw MissingColumnError("column '" + name + "' not found");
}

CsvTable parse_csv(std::istream& in, const std::string& source) {
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    auto fields = split_fields(body);
    const std::string where = source + ":" + std::to_string(line_no);
    if (!have_header) {
      for (const auto& f : fields)
        if (f.empty()) throw InputError(where + ": empty column name in header");
      t.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size())
      throw InputError(where + ": expected " + std::to_string(t.header.size()) + " fields, found " +
                       std::to_string(fields.size()));
    for (std::size_t j = 0; j < fields.size(); ++j) {
      const auto& f = fields[j];
      const std::string cell = where + " column '" + t.header[j] + "'";
      const std::string lower = [&] {
        std::string s;
        for (char c : f) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        return s;
      }();
      if (lower == "nan" || lower == "inf" || lower == "+inf" || lower == "-inf" || lower == "infinity" ||
          lower == "-infinity")
        throw NonFiniteError(cell + ": non-finite value '" + f + "'");
      double v = 0.0;
      const char* first = f.data();
      const char* last = f.data() + f.size();
      if (first != last && *first == '+') ++first;
      const auto [ptr, ec] = std::from_chars(first, last, v);
      if (f.empty() || ec != std::errc() || ptr != last) throw InputError(cell + ": cannot parse '" + f + "'");
      if (!std::isfinite(v)) throw NonFiniteError(cell + ": non-finite value '" + f + "'");
      values.push_back(v);
    }
  }
  if (!have_header) throw InputError(source + ": missing header row");
  t.data.cols = t.header.size();
  t.data.rows = t.data.cols ? values.size() / t.data.cols : 0;
  t.data.data = std::move(values);
  return t;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return parse_csv(in, path);
}

Dataset select_columns(const CsvTable& table, const std::vector<std::string>& y_columns,
                       const std::vector<std::string>& x_columns) {
  if (y_columns.empty()) throw InputError("no response column given");
  std::vector<std::size_t> yi, xi;
  for (const auto& name : y_columns) yi.push_back(table.column_index(name));
  if (x_columns.empty()) {
    for (std::size_t j = 0; j < table.header.size(); ++j)
      if (std::find(yi.begin(), yi.end(), j) == yi.end()) xi.push_back(j);
  } else {
    for (const auto& name : x_columns) xi.push_back(table.column_index(name));
  }
  if (xi.empty()) throw InputError("no covariate columns");
  Dataset d;
  const std::size_t n = table.data.rows;
  d.x = Matrix(n, xi.size());
  d.y = Matrix(n, yi.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < xi.size(); ++j) d.x(i, j) = table.data(i, xi[j]);
    for (std::size_t j = 0; j < yi.size(); ++j) d.y(i, j) = table.data(i, yi[j]);
  }
  for (auto j : xi) d.x_names.push_back(table.header[j]);
  for (auto j : yi) d.y_names.push_back(table.header[j]);
  d.validate();
  return d;
}

Dataset make_lagged(std::span<const double> series, std::size_t lag, std::size_t diff) {
  if (lag == 0) throw InputError("time-series mode: lag must be positive");
  std::vector<double> z(series.begin(), series.end());
  for (double v : z)
    if (!std::isfinite(v)) throw NonFiniteError("time-series mode: non-finite value in series");
  for (std::size_t k = 0; k < diff; ++k) {
    if (z.size() < 2) break;
    for (std::size_t t = z.size() - 1; t > 0; --t) z[t] -= z[t - 1];
    z.erase(z.begin());
  }
  if (z.size() <= lag) throw InputError("time-series mode: series too short for the requested lag");
  const std::size_t n = z.size() - lag;
  Dataset d;
  d.x = Matrix(n, lag);
  d.y = Matrix(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t t = i + lag;
    for (std::size_t l = 1; l <= lag; ++l) d.x(i, l - 1) = z[t - l];
    d.y(i, 0) = z[t];
  }
  for (std::size_t l = 1; l <= lag; ++l) d.x_names.push_back("lag" + std::to_string(l));
  d.y_names = {"z"};
  return d;
}

std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

void write_meta(std::ostream& out, const ArtifactMeta& meta) {
  out << "# seed=" << meta.seed << "\n# config_hash=" << meta.config_hash << "\n# version=" << meta.version << "\n";
}

void write_csv(std::ostream& out, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows, const ArtifactMeta& meta) {
  write_meta(out, meta);
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << format_double(row[j]);
    out << "\n";
  }
}

nlohmann::json sampler_config_json(const SamplerConfig& cfg) {
  return {{"alpha", cfg.prior.alpha},
          {"beta", cfg.prior.beta},
          {"num_trees", cfg.prior.num_trees},
          {"leaf_scale", cfg.prior.leaf_scale},
          {"learning_rate", cfg.learning_rate},
          {"burn_in", cfg.burn_in},
          {"draws", cfg.draws},
          {"num_particles", cfg.num_particles},
          {"seed", cfg.seed},
          {"max_depth", cfg.max_depth}};
}

SamplerConfig sampler_config_from_json(const nlohmann::json& j) {
  SamplerConfig c;
  c.prior.alpha = j.at("alpha").get<double>();
  c.prior.beta = j.at("beta").get<double>();
  c.prior.num_trees = j.at("num_trees").get<int>();
  c.prior.leaf_scale = j.at("leaf_scale").get<double>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.burn_in = j.at("burn_in").get<int>();
  c.draws = j.at("draws").get<int>();
  c.num_particles = j.at("num_particles").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.max_depth = j.at("max_depth").get<int>();
  return c;
}

nlohmann::json scheme_json(const AugmentationScheme& s) { return {{"kind", kind_name(s.kind)}, {"r", s.r}}; }

AugmentationScheme scheme_from_json(const nlohmann::json& j) {
  AugmentationScheme s;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "single") s.kind = AugmentationKind::Single;
  else if (kind == "simultaneous") s.kind = AugmentationKind::Simultaneous;
  else if (kind == "fully_augmented") s.kind = AugmentationKind::FullyAugmented;
  else throw InputError("unknown augmentation kind '" + kind + "'");
  s.r = j.at("r").get<int>();
  s.validate();
  return s;
}

nlohmann::json model_json(const QuantileModel& model) {
  nlohmann::json config{{"sampler", sampler_config_json(model.draws.config)}, {"scheme", scheme_json(model.scheme)}};
  nlohmann::json j;
  j["format"] = "iqbart-model";
  j["kind"] = "univariate";
  j["meta"] = {{"seed", model.draws.config.seed}, {"config_hash", config_hash(config)}, {"version", code_version()}};
  j["config"] = config;
  j["d"] = model.d;
  j["x_names"] = model.x_names;
  j["y_name"] = model.y_name;
  j["y_range"] = {model.y_range.first, model.y_range.second};
  j["feature_ranges"] = model.draws.feature_ranges;
  j["leaf_scale"] = model.draws.leaf_scale;
  j["log_likelihood"] = model.draws.log_likelihood;
  j["forests"] = model.draws.forests;
  return j;
}

QuantileModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "iqbart-model") throw InputError("not an iqbart model file");
    if (j.at("kind").get<std::string>() != "univariate") throw InputError("expected a univariate model");
    QuantileModel m;
    m.draws.config = sampler_config_from_json(j.at("config").at("sampler"));
    m.scheme = scheme_from_json(j.at("config").at("scheme"));
    m.d = j.at("d").get<std::size_t>();
    m.x_names = j.at("x_names").get<std::vector<std::string>>();
    m.y_name = j.at("y_name").get<std::string>();
    const auto yr = j.at("y_range").get<std::vector<double>>();
    if (yr.size() != 2) throw InputError("model y_range must have 2 entries");
    m.y_range = {yr[0], yr[1]};
    m.draws.feature_ranges = j.at("feature_ranges").get<std::vector<std::pair<double, double>>>();
    m.draws.leaf_scale = j.at("leaf_scale").get<double>();
    m.draws.log_likelihood = j.at("log_likelihood").get<std::vector<double>>();
    m.draws.forests = j.at("forests").get<std::vector<Forest>>();
    m.validate();
    for (const auto& f : m.draws.forests)
      for (const auto& t : f.trees)
        for (const auto& nd : t.nodes())
          if (nd.feature > static_cast<int>(m.d)) throw InputError("model tree splits on an unknown feature");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed model file: ") + e.what());
  }
}

nlohmann::json multivariate_model_json(const MultivariateQuantileModel& model) {
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : model.components) comps.push_back(model_json(c));
  nlohmann::json config{{"ordering", model.ordering}};
  for (const auto& c : comps) config["components"].push_back(c.at("meta").at("config_hash"));
  const std::uint64_t seed = model.components.empty() ? 0 : model.components.front().draws.config.seed;
  return {{"format", "iqbart-model"},
          {"kind", "multivariate"},
          {"meta", {{"seed", seed}, {"config_hash", config_hash(config)}, {"version", code_version()}}},
          {"ordering", model.ordering},
          {"components", comps}};
}

MultivariateQuantileModel multivariate_model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "iqbart-model" || j.at("kind").get<std::string>() != "multivariate")
      throw InputError("expected a multivariate model file");
    MultivariateQuantileModel m;
    m.ordering = j.at("ordering").get<std::vector<std::size_t>>();
    for (const auto& c : j.at("components")) m.components.push_back(model_from_json(c));
    if (m.ordering.size() != m.components.size()) throw InputError("ordering and component counts differ");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed model file: ") + e.what());
  }
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << j.dump() << "\n";
  if (!out) throw InputError("write to '" + path + "' failed");
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("'" + path + "' is not valid JSON: " + e.what());
  }
}

}  // namespace iqbart
