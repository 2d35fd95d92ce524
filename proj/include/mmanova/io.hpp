#pragma once

// Dataset CSV ingestion, the model configuration document, and writers that
// print every floating-point value with 17 significant digits.

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmanova/model.hpp"

namespace mmanova {

inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write '" + path + "'");
  out << content;
  if (!out) throw Error(Errc::io, "failed writing '" + path + "'");
}

// ---------------------------------------------------------------- CSV

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw Error(Errc::invalid_argument, "CSV has no column '" + name + "'");
  }
};

/// RFC 4180 style: comma separated, optional double quotes with "" escapes,
/// LF or CRLF line ends. Blank lines are skipped.
inline CsvTable parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t line = 1;
  auto end_field = [&] {
    record.push_back(field);
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    if (!(record.empty() && !field_started && field.empty())) {
      end_field();
      records.push_back(std::move(record));
    }
    record.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty()) throw Error(Errc::parse, "stray quote on CSV line " + std::to_string(line));
        quoted = true;
        field_started = true;
        break;
      case ',': end_field(); field_started = true; break;
      case '\r': break;
      case '\n':
        end_record();
        ++line;
        break;
      default: field += c; field_started = true;
    }
  }
  if (quoted) throw Error(Errc::parse, "unterminated quote in CSV");
  end_record();
  if (records.empty()) throw Error(Errc::parse, "CSV is empty");

  CsvTable t;
  t.header = std::move(records.front());
  std::set<std::string> seen;
  for (const auto& h : t.header)
    if (!seen.insert(h).second) throw Error(Errc::parse, "duplicate CSV column '" + h + "'");
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != t.header.size()) {
      throw Error(Errc::parse, "CSV row " + std::to_string(r + 1) + " has " + std::to_string(records[r].size()) +
                                   " fields, header has " + std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(records[r]));
  }
  return t;
}

inline double parse_number(const std::string& s, const std::string& where) {
  const char* begin = s.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (s.empty() || end != begin + s.size() || errno == ERANGE || !std::isfinite(v)) {
    throw Error(Errc::parse, where + ": '" + s + "' is not a finite number");
  }
  return v;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

/// Builds the dataset a configuration needs: its response columns, every
/// factor named by a batch (labels indexed in first-appearance order) and
/// every covariate.
inline Dataset dataset_from_csv(const CsvTable& table, const ModelConfig& config) {
  if (config.responses.empty()) throw Error(Errc::invalid_argument, "config lists no responses");
  Dataset data;
  const std::size_t n = table.rows.size();
  if (n == 0) throw Error(Errc::invalid_argument, "CSV has no observations");
  data.response_names = config.responses;
  data.responses.resize(static_cast<Index>(n), static_cast<Index>(config.responses.size()));
  for (std::size_t k = 0; k < config.responses.size(); ++k) {
    const std::size_t col = table.column(config.responses[k]);
    for (std::size_t i = 0; i < n; ++i) {
      data.responses(static_cast<Index>(i), static_cast<Index>(k)) =
          parse_number(table.rows[i][col], "row " + std::to_string(i + 2) + ", column '" + config.responses[k] + "'");
    }
  }
  for (const auto& b : config.batches) {
    for (const auto& f : b.factors) {
      if (data.factors.count(f)) continue;
      const std::size_t col = table.column(f);
      FactorColumn fc;
      std::map<std::string, std::size_t> index;
      for (std::size_t i = 0; i < n; ++i) {
        const auto& label = table.rows[i][col];
        auto [it, inserted] = index.try_emplace(label, fc.labels.size());
        if (inserted) fc.labels.push_back(label);
        fc.index.push_back(it->second);
      }
      data.factors[f] = std::move(fc);
    }
    if (b.covariate && !data.covariates.count(*b.covariate)) {
      const std::size_t col = table.column(*b.covariate);
      std::vector<double> v(n);
      for (std::size_t i = 0; i < n; ++i) {
        v[i] = parse_number(table.rows[i][col], "row " + std::to_string(i + 2) + ", column '" + *b.covariate + "'");
      }
      data.covariates[*b.covariate] = std::move(v);
    }
  }
  return data;
}

/// Long-format CSV of a dataset: factor columns, covariates, responses.
inline std::string dataset_to_csv(const Dataset& data) {
  std::ostringstream out;
  std::vector<std::string> cols;
  for (const auto& [name, f] : data.factors) cols.push_back(csv_escape(name));
  for (const auto& [name, c] : data.covariates) cols.push_back(csv_escape(name));
  for (const auto& r : data.response_names) cols.push_back(csv_escape(r));
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << "\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    bool first = true;
    auto sep = [&] {
      if (!first) out << ",";
      first = false;
    };
    for (const auto& [name, f] : data.factors) {
      sep();
      out << csv_escape(f.labels[f.index[i]]);
    }
    for (const auto& [name, c] : data.covariates) {
      sep();
      out << format_double(c[i]);
    }
    for (Index k = 0; k < data.responses.cols(); ++k) {
      sep();
      out << format_double(data.responses(static_cast<Index>(i), k));
    }
    out << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------- config

namespace detail {

using Json = nlohmann::json;

inline void reject_unknown_keys(const Json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw Error(Errc::invalid_argument, where + " must be an object");
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) {
      throw Error(Errc::invalid_argument, where + ": unknown key '" + item.key() + "'");
    }
  }
}

template <class T>
T json_get(const Json& j, const std::string& where) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(Errc::invalid_argument, where + " has the wrong type");
  }
}

inline Matrix json_matrix(const Json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw Error(Errc::invalid_argument, where + " must be a non-empty array of rows");
  const std::size_t rows = j.size();
  Matrix m(static_cast<Index>(rows), static_cast<Index>(rows));
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != rows) throw Error(Errc::invalid_argument, where + " must be square");
    for (std::size_t k = 0; k < rows; ++k) {
      m(static_cast<Index>(i), static_cast<Index>(k)) = json_get<double>(j[i][k], where);
    }
  }
  return m;
}

inline PriorConfig json_prior(const Json& j, const std::string& where, bool allow_beta0) {
  std::set<std::string> keys{"psi", "kappa"};
  if (allow_beta0) keys.insert("beta0");
  reject_unknown_keys(j, keys, where);
  PriorConfig p;
  if (j.contains("psi")) p.psi = json_matrix(j["psi"], where + ".psi");
  if (j.contains("kappa")) p.kappa = json_get<double>(j["kappa"], where + ".kappa");
  if (j.contains("beta0")) {
    const auto v = json_get<std::vector<double>>(j["beta0"], where + ".beta0");
    p.beta0 = Vector(static_cast<Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) (*p.beta0)(static_cast<Index>(i)) = v[i];
  }
  return p;
}

inline BatchKind json_kind(const std::string& s, const std::string& where) {
  if (s == "intercept") return BatchKind::intercept;
  if (s == "main") return BatchKind::main;
  if (s == "interaction") return BatchKind::interaction;
  if (s == "slope") return BatchKind::slope;
  throw Error(Errc::invalid_argument, where + ": unknown kind '" + s + "'");
}

}  // namespace detail

/// Parses the model configuration document. Unknown keys are rejected.
inline ModelConfig parse_config(const std::string& text) {
  using detail::Json;
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::parse, std::string("config is not valid JSON: ") + e.what());
  }
  detail::reject_unknown_keys(
      j, {"responses", "batches", "draws", "seed", "quantiles", "error_prior", "rejection_cap", "fallback"}, "config");
  ModelConfig c;
  if (!j.contains("responses")) throw Error(Errc::invalid_argument, "config: 'responses' is required");
  if (!j.contains("batches")) throw Error(Errc::invalid_argument, "config: 'batches' is required");
  c.responses = detail::json_get<std::vector<std::string>>(j["responses"], "config.responses");
  if (!j["batches"].is_array()) throw Error(Errc::invalid_argument, "config.batches must be an array");
  for (std::size_t i = 0; i < j["batches"].size(); ++i) {
    const auto& jb = j["batches"][i];
    const std::string where = "config.batches[" + std::to_string(i) + "]";
    detail::reject_unknown_keys(jb, {"name", "kind", "factors", "covariate", "transform", "prior"}, where);
    BatchConfig b;
    if (!jb.contains("name") || !jb.contains("kind")) {
      throw Error(Errc::invalid_argument, where + ": 'name' and 'kind' are required");
    }
    b.name = detail::json_get<std::string>(jb["name"], where + ".name");
    b.kind = detail::json_kind(detail::json_get<std::string>(jb["kind"], where + ".kind"), where);
    if (jb.contains("factors")) b.factors = detail::json_get<std::vector<std::string>>(jb["factors"], where + ".factors");
    if (jb.contains("covariate")) b.covariate = detail::json_get<std::string>(jb["covariate"], where + ".covariate");
    if (jb.contains("transform")) {
      const auto t = detail::json_get<std::string>(jb["transform"], where + ".transform");
      if (t == "center") {
        b.transform = CovariateTransform::center;
      } else if (t == "orthogonalize") {
        b.transform = CovariateTransform::orthogonalize;
      } else if (t == "none") {
        b.transform = CovariateTransform::none;
      } else {
        throw Error(Errc::invalid_argument, where + ": unknown transform '" + t + "'");
      }
    }
    if (jb.contains("prior")) b.prior = detail::json_prior(jb["prior"], where + ".prior", true);
    c.batches.push_back(std::move(b));
  }
  if (j.contains("draws")) {
    const auto draws = detail::json_get<long long>(j["draws"], "config.draws");
    if (draws < 1) throw Error(Errc::invalid_argument, "config.draws must be >= 1");
    c.draws = static_cast<std::size_t>(draws);
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw Error(Errc::invalid_argument, "config.seed must be a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("quantiles")) {
    c.quantiles = detail::json_get<std::vector<double>>(j["quantiles"], "config.quantiles");
    if (c.quantiles.empty()) throw Error(Errc::invalid_argument, "config.quantiles must not be empty");
    for (std::size_t i = 0; i < c.quantiles.size(); ++i) {
      if (!(c.quantiles[i] >= 0.0 && c.quantiles[i] <= 1.0) || (i && c.quantiles[i] <= c.quantiles[i - 1])) {
        throw Error(Errc::invalid_argument, "config.quantiles must be increasing within [0, 1]");
      }
    }
  }
  if (j.contains("error_prior")) c.error_prior = detail::json_prior(j["error_prior"], "config.error_prior", false);
  if (j.contains("rejection_cap")) {
    const auto cap = detail::json_get<long long>(j["rejection_cap"], "config.rejection_cap");
    if (cap < 1) throw Error(Errc::invalid_argument, "config.rejection_cap must be >= 1");
    c.rejection_cap = static_cast<std::size_t>(cap);
  }
  if (j.contains("fallback")) {
    const auto f = detail::json_get<std::string>(j["fallback"], "config.fallback");
    if (f == "truncate") {
      c.fallback = TruncationFallback::truncate;
    } else if (f == "fail") {
      c.fallback = TruncationFallback::fail;
    } else {
      throw Error(Errc::invalid_argument, "config.fallback must be 'truncate' or 'fail'");
    }
  }
  return c;
}

// ---------------------------------------------------------------- JSON out

/// Streaming JSON writer with two-space indentation. Doubles use 17
/// significant digits; non-finite values become null.
class JsonWriter {
 public:
  explicit JsonWriter(std::ostream& out) : out_(out) {}

  JsonWriter& begin_object() { return open('{'); }
  JsonWriter& end_object() { return close('}'); }
  JsonWriter& begin_array() { return open('['); }
  JsonWriter& end_array() { return close(']'); }

  JsonWriter& key(const std::string& k) {
    separate();
    write_string(k);
    out_ << ": ";
    after_key_ = true;
    return *this;
  }

  JsonWriter& value(double v) {
    separate();
    out_ << (std::isfinite(v) ? format_double(v) : std::string("null"));
    return *this;
  }
  JsonWriter& value(int v) { return integer(v); }
  JsonWriter& value(long v) { return integer(v); }
  JsonWriter& value(long long v) { return integer(v); }
  JsonWriter& value(unsigned v) { return integer(v); }
  JsonWriter& value(unsigned long v) { return integer(v); }
  JsonWriter& value(unsigned long long v) { return integer(v); }
  JsonWriter& value(bool v) {
    separate();
    out_ << (v ? "true" : "false");
    return *this;
  }
  JsonWriter& value(const std::string& s) {
    separate();
    write_string(s);
    return *this;
  }
  JsonWriter& value(const char* s) { return value(std::string(s)); }
  JsonWriter& value(std::string_view s) { return value(std::string(s)); }
  JsonWriter& null() {
    separate();
    out_ << "null";
    return *this;
  }

  JsonWriter& value(const std::vector<double>& v) {
    begin_array();
    for (double x : v) value(x);
    return end_array();
  }

  JsonWriter& value(const Matrix& m) {
    begin_array();
    for (Index i = 0; i < m.rows(); ++i) {
      begin_array();
      for (Index k = 0; k < m.cols(); ++k) value(m(i, k));
      end_array();
    }
    return end_array();
  }

  template <class T>
  JsonWriter& field(const std::string& k, const T& v) {
    key(k);
    return value(v);
  }

  void finish() { out_ << "\n"; }

 private:
  template <class T>
  JsonWriter& integer(T v) {
    separate();
    out_ << v;
    return *this;
  }

  JsonWriter& open(char c) {
    separate();
    out_ << c;
    counts_.push_back(0);
    return *this;
  }

  JsonWriter& close(char c) {
    const bool had_items = counts_.back() > 0;
    counts_.pop_back();
    if (had_items) newline();
    out_ << c;
    return *this;
  }

  void separate() {
    if (after_key_) {
      after_key_ = false;
      return;
    }
    if (!counts_.empty()) {
      if (counts_.back()++ > 0) out_ << ",";
      newline();
    }
  }

  void newline() {
    out_ << "\n";
    for (std::size_t i = 0; i < counts_.size(); ++i) out_ << "  ";
  }

  void write_string(const std::string& s) {
    out_ << '"';
    for (unsigned char c : s) {
      switch (c) {
        case '"': out_ << "\\\""; break;
        case '\\': out_ << "\\\\"; break;
        case '\n': out_ << "\\n"; break;
        case '\r': out_ << "\\r"; break;
        case '\t': out_ << "\\t"; break;
        default:
          if (c < 0x20) {
            char buf[8];
            std::snprintf(buf, sizeof buf, "\\u%04x", c);
            out_ << buf;
          } else {
            out_ << c;
          }
      }
    }
    out_ << '"';
  }

  std::ostream& out_;
  std::vector<std::size_t> counts_;
  bool after_key_ = false;
};

}  // namespace mmanova
