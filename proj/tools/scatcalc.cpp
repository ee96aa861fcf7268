// scatcalc <experiment> [--config file] [--out dir] [--seed n] [--format json|csv] [--key value ...]
//
// Extra --key value pairs override config entries (dotted keys reach nested objects, comma
// lists become arrays). Exit codes: 0 all criteria pass, 1 a criterion or module failed,
// 2 config error, 3 I/O error.

#include <CLI11.hpp>

#include <iostream>

#include "scatcalc/experiments.hpp"

using namespace scatcalc;
namespace ex = scatcalc::experiments;

namespace {

ojson parse_value(const std::string& s) {
  try {
    return ojson::parse(s);
  } catch (const ojson::parse_error&) {
  }
  if (s.find(',') != std::string::npos) {
    ojson arr = ojson::array();
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) arr.push_back(parse_value(item));
    return arr;
  }
  return s;
}

void set_path(ojson& cfg, const std::string& key, const ojson& v) {
  ojson* node = &cfg;
  std::stringstream ss(key);
  std::string part, next;
  std::getline(ss, part, '.');
  while (std::getline(ss, next, '.')) {
    if (!(*node)[part].is_object()) (*node)[part] = ojson::object();
    node = &(*node)[part];
    part = next;
  }
  (*node)[part] = v;
}

// --key value and --key=value pairs left over by the parser
ojson overrides(const std::vector<std::string>& extra) {
  ojson o = ojson::object();
  for (size_t i = 0; i < extra.size(); ++i) {
    const std::string& a = extra[i];
    if (a.rfind("--", 0) != 0 || a.size() < 3) throw ConfigError("unexpected argument \"" + a + "\"");
    std::string key = a.substr(2), value;
    if (auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key = key.substr(0, eq);
    } else {
      if (i + 1 >= extra.size()) throw ConfigError("option --" + key + " needs a value");
      value = extra[++i];
    }
    std::replace(key.begin(), key.end(), '-', '_');
    set_path(o, key, parse_value(value));
  }
  return o;
}

void merge(ojson& base, const ojson& top) {
  for (auto it = top.begin(); it != top.end(); ++it) {
    if (it.value().is_object() && base.contains(it.key()) && base[it.key()].is_object())
      merge(base[it.key()], it.value());
    else
      base[it.key()] = it.value();
  }
}

int run(int argc, char** argv) {
  CLI::App app{"scatcalc: scattering-calculus experiment runner"};
  app.allow_extras();
  std::string experiment, config, out, format;
  std::optional<long> seed;
  bool timing = false, no_mkdir = false, list = false, dump = false;
  app.add_option("experiment", experiment, "experiment name (see --list)");
  app.add_option("--config,-c", config, "JSON config file");
  app.add_option("--out,-o", out, "output directory (overrides output_dir)");
  app.add_option("--seed,-s", seed, "seed for randomized checks");
  app.add_option("--format,-f", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  app.add_flag("--timing", timing, "record wall time (the report is then not byte-stable)");
  app.add_flag("--no-mkdir", no_mkdir, "fail with exit 3 instead of creating a missing output directory");
  app.add_flag("--list", list, "list experiments and exit");
  app.add_flag("--dump-config", dump, "print the validated config with defaults and exit");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  if (list) {
    for (auto& e : ex::registry()) std::cout << e.name << "  " << e.summary << "\n";
    return 0;
  }
  if (experiment.empty()) throw ConfigError("no experiment given; try --list");

  ojson raw = config.empty() ? ojson::object() : ex::load_config(config);
  if (!raw.is_object()) throw ConfigError("config must be a JSON object");
  merge(raw, overrides(app.remaining()));
  if (!out.empty()) raw["output_dir"] = out;
  if (seed) raw["seed"] = *seed;
  if (!format.empty()) raw["format"] = format;
  ojson cfg = ex::validate_config(experiment, raw);
  if (dump) {
    write_json(std::cout, cfg);
    std::cout << "\n";
    return 0;
  }

  RunReport rep = ex::run_experiment(cfg, timing);
  auto files = emit_report(rep, cfg["output_dir"].get<std::string>(), cfg["format"], !no_mkdir);
  for (auto& c : rep.criteria) {
    std::string tag = c.status == "pass" ? "PASS" : c.status == "fail" ? "FAIL" : "SKIP";
    std::cout << tag << " " << c.name << ": " << c.detail << "\n";
  }
  for (auto& f : files) std::cout << "wrote " << f.string() << "\n";
  if (rep.wall_time) std::cerr << "wall time " << format_double(*rep.wall_time) << " s\n";
  return rep.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 3;
  } catch (const ExperimentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
