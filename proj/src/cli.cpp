#include "coldl/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <new>
#include <optional>
#include <sstream>

#include "coldl/engine.hpp"

namespace coldl {

namespace {

struct RunConfig {
  std::string rules;
  std::vector<std::string> data;
  std::string format = "tsv";
  std::string output;
  std::string opt = "mr,rr,sub";
  bool no_opt = false;
  std::string memo = "off";
  std::int64_t memo_timeout_ms = 1000;
  std::size_t dyn_check_limit = 32;
  std::string timeout;
  std::string stats;
  std::string save_store;
  std::string store;
  std::string pattern;
  std::string config;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
  if (v == "off" || v == "false" || v == "0" || v == "no") return false;
  throw InputError("config key '" + key + "': expected on/off, got '" + v + "'");
}

std::size_t parse_count(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const unsigned long long n = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
    throw InputError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
}

// Applies `key = value` lines for every option not given on the command line.
void apply_config(RunConfig& cfg, const CLI::App& cmd) {
  if (cfg.config.empty()) return;
  const std::map<std::string, std::function<void(const std::string&)>> setters = {
      {"rules", [&](const std::string& v) { cfg.rules = v; }},
      {"data", [&](const std::string& v) { cfg.data = split_list(v); }},
      {"format", [&](const std::string& v) { cfg.format = v; }},
      {"output", [&](const std::string& v) { cfg.output = v; }},
      {"opt", [&](const std::string& v) { cfg.opt = v; }},
      {"no-opt", [&](const std::string& v) { cfg.no_opt = parse_bool("no-opt", v); }},
      {"memo", [&](const std::string& v) { cfg.memo = v; }},
      {"memo-timeout-ms", [&](const std::string& v) { cfg.memo_timeout_ms = static_cast<std::int64_t>(parse_count("memo-timeout-ms", v)); }},
      {"dyn-check-limit", [&](const std::string& v) { cfg.dyn_check_limit = parse_count("dyn-check-limit", v); }},
      {"timeout", [&](const std::string& v) { cfg.timeout = v; }},
      {"stats", [&](const std::string& v) { cfg.stats = v; }},
      {"save-store", [&](const std::string& v) { cfg.save_store = v; }},
      {"store", [&](const std::string& v) { cfg.store = v; }},
  };
  std::istringstream in(read_file(cfg.config));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw InputError(cfg.config + ":" + std::to_string(lineno) + ": expected 'key = value'");
    std::string key = trim(t.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    const std::string value = trim(t.substr(eq + 1));
    auto it = setters.find(key);
    if (it == setters.end()) throw InputError(cfg.config + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    const CLI::Option* opt = cmd.get_option_no_throw("--" + key);
    if (opt && opt->count() > 0) continue;
    it->second(value);
  }
}

MaterializeOptions build_options(const RunConfig& cfg) {
  MaterializeOptions o;
  o.disable_optimizations();
  if (!cfg.no_opt) {
    for (const auto& name : split_list(cfg.opt)) {
      if (name == "mr") o.opt_mismatch = true;
      else if (name == "rr") o.opt_redundancy = true;
      else if (name == "sub") o.opt_subsumption = true;
      else if (name == "all") o.opt_mismatch = o.opt_redundancy = o.opt_subsumption = true;
      else if (name != "none") throw InputError("unknown optimization '" + name + "' (expected mr, rr, sub)");
    }
  }
  if (cfg.memo == "on") o.memo = true;
  else if (cfg.memo != "off") throw InputError("--memo expects on or off");
  o.memo_timeout = std::chrono::milliseconds(cfg.memo_timeout_ms);
  if (cfg.dyn_check_limit == 0) throw InputError("--dyn-check-limit must be positive");
  o.dyn_check_limit = cfg.dyn_check_limit;
  if (!cfg.timeout.empty()) o.timeout = parse_duration(cfg.timeout);
  return o;
}

FactFormat parse_format(const std::string& f) {
  if (f == "tsv") return FactFormat::tsv;
  if (f == "nt" || f == "ntriples") return FactFormat::ntriples;
  throw InputError("unknown data format '" + f + "' (expected tsv or nt)");
}

struct Loaded {
  Program program;
  std::shared_ptr<EdbStore> edb;
};

Loaded load_inputs(const RunConfig& cfg, Dictionary& dict) {
  if (cfg.rules.empty()) throw InputError("--rules is required");
  Loaded l;
  l.program = parse_program(read_file(cfg.rules), dict);
  l.program.canonicalize();
  l.edb = std::make_shared<EdbStore>();
  l.edb->add_facts(l.program);
  const FactFormat fmt = parse_format(cfg.format);
  for (const auto& path : cfg.data) load_facts_file(path, fmt, *l.edb, dict, &l.program);
  l.edb->seal();
  return l;
}

void write_stats(const StatsReport& stats, const std::string& path) {
  if (path.empty()) return;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write stats to '" + path + "'");
  const bool json = path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
  out << (json ? stats.to_json() : stats.to_text());
}

// Base facts plus derived facts under their own names, for later queries.
void save_store(const Materialization& m, const Dictionary& dict, const std::string& path) {
  EdbStore all;
  for (const auto& name : m.edb->predicate_names()) {
    const std::size_t k = *m.edb->arity(name);
    const auto rows = m.edb->tuples(name);
    if (k == 0) {
      if (m.edb->count(name) > 0) all.add_fact(name, {});
      continue;
    }
    for (std::size_t r = 0; r < rows.size(); r += k) all.add_fact(name, std::span<const Id>(rows.data() + r, k));
  }
  for (PredId p = 0; p < m.program->predicates().size(); ++p) {
    if (!m.program->is_idb(p)) continue;
    const auto& pred = m.program->predicate(p);
    if (pred.arity == 0) {
      if (m.store.fact_count(p) > 0) all.add_fact(pred.name, {});
      continue;
    }
    const auto rows = m.store.facts(p);
    for (std::size_t r = 0; r < rows.size(); r += pred.arity)
      all.add_fact(pred.name, std::span<const Id>(rows.data() + r, pred.arity));
  }
  all.seal();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write store to '" + path + "'");
  all.save(out, dict);
}

std::vector<std::string> query_snapshot(const std::string& path, const std::string& pattern, Dictionary& dict) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open store '" + path + "'");
  EdbStore store;
  store.load(in, dict);
  store.seal();
  Program scratch;
  const Atom atom = parse_atom(pattern, scratch, dict);
  const auto& pred = scratch.predicate(atom.pred);
  if (!store.has_predicate(pred.name)) throw InputError("unknown predicate '" + pred.name + "'");
  if (*store.arity(pred.name) != pred.arity)
    throw InputError("predicate '" + pred.name + "' has arity " + std::to_string(*store.arity(pred.name)));
  std::vector<std::string> out;
  if (pred.arity == 0) {
    if (store.count(pred.name) > 0) out.push_back(pred.name);
    return out;
  }
  const auto rows = store.tuples(pred.name);
  for (std::size_t r = 0; r < rows.size(); r += pred.arity) {
    Atom fact{atom.pred, {}};
    bool ok = true;
    std::map<std::string, Id> seen;
    for (std::size_t c = 0; c < pred.arity && ok; ++c) {
      const Id v = rows[r + c];
      const Term& t = atom.terms[c];
      if (t.is_constant()) ok = t.id() == v;
      else {
        auto [it, fresh] = seen.emplace(t.name(), v);
        ok = fresh || it->second == v;
      }
      fact.terms.push_back(Term::constant(v));
    }
    if (ok) out.push_back(to_string(fact, scratch, dict));
  }
  std::sort(out.begin(), out.end());
  return out;
}

int cmd_materialize(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  Dictionary dict;
  const MaterializeOptions opts = build_options(cfg);
  Loaded in = load_inputs(cfg, dict);
  Materialization m = materialize(in.program, in.edb, opts);
  if (cfg.output.empty() || cfg.output == "-") {
    m.export_facts(dict, out);
  } else {
    std::ofstream file(cfg.output, std::ios::binary);
    if (!file) throw InputError("cannot write output to '" + cfg.output + "'");
    m.export_facts(dict, file);
  }
  write_stats(m.stats, cfg.stats);
  if (!cfg.save_store.empty()) save_store(m, dict, cfg.save_store);
  if (m.status != RunStatus::fixpoint) {
    err << "coldl: time limit reached after " << m.stats.counter("steps") << " steps; output is partial\n";
    return exit_timeout;
  }
  return exit_ok;
}

int cmd_query(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  Dictionary dict;
  std::vector<std::string> lines;
  if (!cfg.store.empty()) {
    lines = query_snapshot(cfg.store, cfg.pattern, dict);
  } else {
    const MaterializeOptions opts = build_options(cfg);
    Loaded in = load_inputs(cfg, dict);
    Materialization m = materialize(in.program, in.edb, opts);
    if (m.status != RunStatus::fixpoint) {
      err << "coldl: time limit reached before the fixpoint\n";
      return exit_timeout;
    }
    lines = query_facts(m, dict, cfg.pattern);
  }
  for (const auto& l : lines) out << l << '\n';
  return exit_ok;
}

int cmd_stats(const std::string& path, std::ostream& out) {
  const StatsReport stats = StatsReport::parse(read_file(path));
  out << "steps: " << stats.counter("steps") << "\n";
  out << "idb facts: " << stats.counter("facts.idb") << "\n";
  out << "peak blocks: " << stats.counter("blocks.peak") << "\n";
  for (const char* k : {"mr", "rr", "sub"})
    out << "blocks pruned (" << k << "): " << stats.counter(std::string("opt.") + k + ".blocks_pruned") << "\n";
  const auto before = stats.counter("dedup.rows_before");
  const auto removed = stats.counter("dedup.rows_removed");
  out << "dedup: " << removed << " of " << before << " derived rows were duplicates";
  if (before > 0) {
    std::ostringstream pct;
    pct.setf(std::ios::fixed);
    pct.precision(1);
    pct << 100.0 * static_cast<double>(removed) / static_cast<double>(before);
    out << " (" << pct.str() << "%)";
  }
  out << "\n";
  if (stats.has("memo.atoms_attempted"))
    out << "memoized atoms: " << stats.counter("memo.atoms_memoized") << " of " << stats.counter("memo.atoms_attempted")
        << "\n";
  out << "per rule (applications, variants, blocks joined, ms):\n";
  for (std::size_t r = 0;; ++r) {
    const std::string p = "rule." + std::to_string(r) + ".";
    if (!stats.has(p + "applications")) break;
    std::ostringstream ms;
    ms.setf(std::ios::fixed);
    ms.precision(3);
    ms << stats.get(p + "time_ms");
    out << "  rule " << r << ": " << stats.counter(p + "applications") << ", " << stats.counter(p + "sne_variants")
        << ", " << stats.counter(p + "blocks_joined") << ", " << ms.str() << "\n";
  }
  return exit_ok;
}

void add_run_options(CLI::App& cmd, RunConfig& cfg) {
  cmd.add_option("--rules", cfg.rules, "Rule file");
  cmd.add_option("--data", cfg.data, "Fact files")->delimiter(',');
  cmd.add_option("--format", cfg.format, "Fact format: tsv or nt");
  cmd.add_option("--opt", cfg.opt, "Optimizations to enable: comma list of mr, rr, sub");
  cmd.add_flag("--no-opt", cfg.no_opt, "Disable all optimizations");
  cmd.add_option("--memo", cfg.memo, "Memoization: on or off");
  cmd.add_option("--memo-timeout-ms", cfg.memo_timeout_ms, "Per-atom memoization budget");
  cmd.add_option("--dyn-check-limit", cfg.dyn_check_limit, "Largest binding set checked dynamically");
  cmd.add_option("--timeout", cfg.timeout, "Time limit, e.g. 30s or 500ms");
  cmd.add_option("--config", cfg.config, "File of key = value defaults");
}

}  // namespace

std::chrono::milliseconds parse_duration(std::string_view text) {
  const std::string s = trim(text);
  std::size_t used = 0;
  double value = 0;
  try {
    value = std::stod(s, &used);
  } catch (const std::exception&) {
    throw InputError("bad duration '" + s + "'");
  }
  const std::string unit = s.substr(used);
  double factor = 0;
  if (unit.empty() || unit == "s") factor = 1000;
  else if (unit == "ms") factor = 1;
  else if (unit == "m" || unit == "min") factor = 60'000;
  else if (unit == "h") factor = 3'600'000;
  else throw InputError("bad duration unit in '" + s + "'");
  if (!(value >= 0) || !std::isfinite(value)) throw InputError("duration must be non-negative: '" + s + "'");
  return std::chrono::milliseconds(static_cast<std::int64_t>(std::llround(value * factor)));
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Column-oriented Datalog materialization"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::string stats_path;

  auto* mat = app.add_subcommand("materialize", "Compute all derivable facts");
  add_run_options(*mat, cfg);
  mat->add_option("--output", cfg.output, "Output file (default: standard output)");
  mat->add_option("--stats", cfg.stats, "Statistics file (.json for JSON)");
  mat->add_option("--save-store", cfg.save_store, "Write all facts as a store snapshot");

  auto* query = app.add_subcommand("query", "Print facts matching an atom pattern");
  add_run_options(*query, cfg);
  query->add_option("--store", cfg.store, "Store snapshot written by materialize --save-store");
  query->add_option("pattern", cfg.pattern, "Atom such as T(X,pO,Y)")->required();

  auto* stats = app.add_subcommand("stats", "Summarize a statistics file");
  stats->add_option("file", stats_path, "Statistics file")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    err << "coldl: " << e.what() << "\n";
    return exit_input;
  }

  try {
    if (*stats) return cmd_stats(stats_path, out);
    CLI::App& cmd = *mat ? *mat : *query;
    apply_config(cfg, cmd);
    return *mat ? cmd_materialize(cfg, out, err) : cmd_query(cfg, out, err);
  } catch (const std::bad_alloc&) {
    err << "coldl: out of memory\n";
    return exit_resource;
  } catch (const ResourceError& e) {
    err << "coldl: " << e.what() << "\n";
    return exit_resource;
  } catch (const ParseError& e) {
    err << "coldl: " << e.what() << "\n";
    return exit_input;
  } catch (const Error& e) {
    err << "coldl: " << e.what() << "\n";
    return exit_input;
  } catch (const std::exception& e) {
    err << "coldl: " << e.what() << "\n";
    return exit_input;
  }
}

}  // namespace coldl
