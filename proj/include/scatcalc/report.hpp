#pragma once

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "common.hpp"

namespace scatcalc {

using ojson = nlohmann::ordered_json;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when a module fails inside an experiment; carries the experiment name.
struct ExperimentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- strict config schema ----------------------------------------------------------

struct Field {
  std::string key;
  ojson def;
  std::function<std::string(const ojson&)> check;  // empty string when valid
  std::vector<Field> sub;                           // nested object
  std::string help;
};

namespace schema {

inline std::string describe(const ojson& v) {
  std::string s = v.dump();
  return s.size() > 40 ? s.substr(0, 37) + "..." : s;
}

inline std::function<std::string(const ojson&)> number(double lo, double hi, bool open_lo = false) {
  return [=](const ojson& v) -> std::string {
    if (!v.is_number()) return "expected a number, got " + describe(v);
    double x = v.get<double>();
    if (!std::isfinite(x) || x < lo || x > hi || (open_lo && x == lo)) {
      std::ostringstream s;
      s << "value " << describe(v) << " outside " << (open_lo ? "(" : "[") << lo << ", " << hi << "]";
      return s.str();
    }
    return "";
  };
}

inline std::function<std::string(const ojson&)> integer(long lo, long hi, bool even = false, bool odd = false) {
  return [=](const ojson& v) -> std::string {
    if (!v.is_number_integer()) return "expected an integer, got " + describe(v);
    long x = v.get<long>();
    if (x < lo || x > hi) return "value " + std::to_string(x) + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]";
    if (even && x % 2) return "must be even, got " + std::to_string(x);
    if (odd && x % 2 == 0) return "must be odd, got " + std::to_string(x);
    return "";
  };
}

inline std::function<std::string(const ojson&)> choice(std::vector<std::string> opts) {
  return [=](const ojson& v) -> std::string {
    if (v.is_string() && std::find(opts.begin(), opts.end(), v.get<std::string>()) != opts.end()) return "";
    std::string s = "expected one of";
    for (auto& o : opts) s += " " + o;
    return s + ", got " + describe(v);
  };
}

inline std::function<std::string(const ojson&)> text() {
  return [](const ojson& v) -> std::string { return v.is_string() ? "" : "expected a string, got " + describe(v); };
}

inline std::function<std::string(const ojson&)> list(std::function<std::string(const ojson&)> item, size_t min_size,
                                                      size_t max_size = 1000) {
  return [=](const ojson& v) -> std::string {
    if (!v.is_array()) return "expected a list, got " + describe(v);
    if (v.size() < min_size || v.size() > max_size)
      return "list length " + std::to_string(v.size()) + " outside [" + std::to_string(min_size) + ", " + std::to_string(max_size) + "]";
    for (size_t i = 0; i < v.size(); ++i) {
      auto e = item(v[i]);
      if (!e.empty()) return "entry " + std::to_string(i) + ": " + e;
    }
    return "";
  };
}

inline Field grid(const std::string& key, int n, double L, int N, int max_n = 2, int max_N = 1024) {
  return {key, nullptr, nullptr,
          {{"n", n, integer(1, max_n)}, {"L", L, number(0, 1e4, true)}, {"N", N, integer(4, max_N, true)}},
          "periodic grid: dimension n, box [-L/2, L/2)^n, N points per axis (even)"};
}

}  // namespace schema

inline size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline std::optional<std::string> closest_key(const std::string& key, const std::vector<Field>& fields) {
  std::optional<std::string> best;
  size_t bd = std::max<size_t>(2, key.size() / 3) + 1;
  for (auto& f : fields) {
    size_t d = edit_distance(key, f.key);
    if (d < bd) {
      bd = d;
      best = f.key;
    }
  }
  return best;
}

// Fills defaults in schema order and collects every violation (dotted paths).
inline ojson apply_schema(const ojson& in, const std::vector<Field>& fields, const std::string& prefix,
                          std::vector<std::string>& errors) {
  ojson out = ojson::object();
  if (!in.is_object()) {
    errors.push_back((prefix.empty() ? std::string("config") : prefix) + ": expected an object, got " + schema::describe(in));
    return out;
  }
  for (auto it = in.begin(); it != in.end(); ++it) {
    bool known = std::any_of(fields.begin(), fields.end(), [&](const Field& f) { return f.key == it.key(); });
    if (known) continue;
    std::string msg = prefix + it.key() + ": unknown key";
    if (auto s = closest_key(it.key(), fields)) msg += " (did you mean \"" + *s + "\"?)";
    errors.push_back(msg);
  }
  for (auto& f : fields) {
    const std::string path = prefix + f.key;
    if (!f.sub.empty()) {
      out[f.key] = apply_schema(in.contains(f.key) ? in[f.key] : ojson::object(), f.sub, path + ".", errors);
      continue;
    }
    if (!in.contains(f.key)) {
      out[f.key] = f.def;
      continue;
    }
    const ojson& v = in[f.key];
    if (f.check) {
      auto e = f.check(v);
      if (!e.empty()) errors.push_back(path + ": " + e);
    }
    out[f.key] = v;
  }
  return out;
}

inline std::string join_errors(const std::vector<std::string>& errors) {
  std::string s;
  for (auto& e : errors) s += "\n  " + e;
  return s;
}

// ---- reports -------------------------------------------------------------------------

struct Criterion {
  std::string name;
  std::string status;  // pass, fail, skipped
  std::string detail;
};

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<ojson>> rows;
  void add(std::vector<ojson> row) { rows.push_back(std::move(row)); }
};

struct RunReport {
  std::string experiment;
  ojson parameters;
  ojson metrics = ojson::object();
  std::vector<Criterion> criteria;
  std::vector<Table> tables;
  std::optional<double> wall_time;

  void check(const std::string& name, bool pass, const std::string& detail) {
    criteria.push_back({name, pass ? "pass" : "fail", detail});
  }
  void skip(const std::string& name, const std::string& reason) { criteria.push_back({name, "skipped", reason}); }
  bool passed() const {
    return std::none_of(criteria.begin(), criteria.end(), [](const Criterion& c) { return c.status == "fail"; });
  }
  const Criterion* find(const std::string& name) const {
    for (auto& c : criteria)
      if (c.name == name) return &c;
    return nullptr;
  }
  Table& table(const std::string& name, std::vector<std::string> columns) {
    tables.push_back({name, std::move(columns), {}});
    return tables.back();
  }
};

// %.17g, with non-finite values as strings (JSON has no literal for them).
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_json(std::ostream& os, const ojson& v, int indent = 0) {
  const std::string pad(indent + 2, ' '), close(indent, ' ');
  switch (v.type()) {
    case ojson::value_t::object: {
      if (v.empty()) {
        os << "{}";
        return;
      }
      os << "{\n";
      size_t k = 0;
      for (auto it = v.begin(); it != v.end(); ++it, ++k) {
        os << pad << ojson(it.key()).dump() << ": ";
        write_json(os, it.value(), indent + 2);
        os << (k + 1 < v.size() ? ",\n" : "\n");
      }
      os << close << "}";
      return;
    }
    case ojson::value_t::array: {
      if (v.empty()) {
        os << "[]";
        return;
      }
      bool flat = std::all_of(v.begin(), v.end(), [](const ojson& e) { return e.is_primitive(); });
      if (flat) {
        os << "[";
        for (size_t k = 0; k < v.size(); ++k) {
          if (k) os << ", ";
          write_json(os, v[k], indent + 2);
        }
        os << "]";
        return;
      }
      os << "[\n";
      for (size_t k = 0; k < v.size(); ++k) {
        os << pad;
        write_json(os, v[k], indent + 2);
        os << (k + 1 < v.size() ? ",\n" : "\n");
      }
      os << close << "]";
      return;
    }
    case ojson::value_t::number_float: {
      double x = v.get<double>();
      if (std::isfinite(x))
        os << format_double(x);
      else
        os << '"' << format_double(x) << '"';
      return;
    }
    default:
      os << v.dump();
  }
}

inline std::string csv_cell(const ojson& v) {
  if (v.is_number_float()) return format_double(v.get<double>());
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  }
  if (v.is_null()) return "";
  return v.dump();
}

inline std::string table_csv(const Table& t) {
  std::ostringstream os;
  for (size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
  os << "\n";
  for (auto& row : t.rows) {
    for (size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_cell(row[i]);
    os << "\n";
  }
  return os.str();
}

inline std::string csv_name(const RunReport& r, const Table& t) { return r.experiment + "_" + t.name + ".csv"; }

inline ojson report_json(const RunReport& r, bool embed_tables) {
  ojson j;
  j["experiment"] = r.experiment;
  j["passed"] = r.passed();
  j["parameters"] = r.parameters;
  j["metrics"] = r.metrics;
  ojson crit = ojson::array();
  for (auto& c : r.criteria) crit.push_back({{"name", c.name}, {"status", c.status}, {"detail", c.detail}});
  j["criteria"] = crit;
  ojson tabs = ojson::object();
  for (auto& t : r.tables) {
    if (!embed_tables) {
      tabs[t.name] = csv_name(r, t);
      continue;
    }
    ojson rows = ojson::array();
    for (auto& row : t.rows) rows.push_back(ojson(row));
    tabs[t.name] = {{"columns", t.columns}, {"rows", rows}};
  }
  j["tables"] = tabs;
  j["wall_time"] = r.wall_time ? ojson(*r.wall_time) : ojson(nullptr);
  return j;
}

inline void write_file(const std::filesystem::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot open " + p.string() + " for writing");
  out << body;
  out.close();
  if (!out) throw IoError("write failed for " + p.string());
}

// Writes <dir>/<experiment>.json and, for csv, one <experiment>_<table>.csv per table.
// Returns the written paths.
inline std::vector<std::filesystem::path> emit_report(const RunReport& r, const std::filesystem::path& dir,
                                                      const std::string& format, bool create_dirs = true) {
  namespace fs = std::filesystem;
  if (format != "json" && format != "csv") throw ConfigError("format must be json or csv");
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    if (!create_dirs) throw IoError("output directory " + dir.string() + " does not exist");
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  }
  std::vector<fs::path> written;
  const bool csv = format == "csv";
  std::ostringstream js;
  write_json(js, report_json(r, !csv));
  js << "\n";
  written.push_back(dir / (r.experiment + ".json"));
  write_file(written.back(), js.str());
  if (csv)
    for (auto& t : r.tables) {
      written.push_back(dir / csv_name(r, t));
      write_file(written.back(), table_csv(t));
    }
  return written;
}

}  // namespace scatcalc
