#include <pybind11/chrono.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <sstream>

#include "coldl/engine.hpp"

namespace py = pybind11;

namespace {

using Row = std::vector<std::string>;
using FactMap = std::map<std::string, std::vector<Row>>;

/// Program, facts and dictionary for one evaluation.
class Session {
 public:
  Session(const std::string& rules, const FactMap& facts) {
    program_ = coldl::parse_program(rules, dict_);
    program_.canonicalize();
    auto edb = std::make_shared<coldl::EdbStore>();
    edb->add_facts(program_);
    for (const auto& [pred, rows] : facts) {
      if (auto id = program_.find_predicate(pred); id && program_.is_idb(*id))
        throw coldl::InputError("facts given for derived predicate '" + pred + "'");
      std::vector<coldl::Id> tuple;
      for (const auto& row : rows) {
        tuple.clear();
        for (const auto& v : row) tuple.push_back(dict_.intern(v));
        edb->add_fact(pred, tuple);
      }
    }
    edb->seal();
    edb_ = std::move(edb);
  }

  void load(const std::string& path, const std::string& format) {
    auto edb = std::make_shared<coldl::EdbStore>(*edb_);
    coldl::load_facts_file(path, format == "nt" ? coldl::FactFormat::ntriples : coldl::FactFormat::tsv, *edb, dict_,
                           &program_);
    edb_ = std::move(edb);
  }

  void run(const coldl::MaterializeOptions& opts) {
    py::gil_scoped_release release;
    result_ = coldl::materialize(program_, edb_, opts);
  }

  const coldl::Materialization& result() const {
    if (!result_) throw coldl::Error("materialize() has not been called");
    return *result_;
  }

  std::vector<Row> facts(const std::string& pred) const {
    const auto& r = result();
    auto id = r.program->find_predicate(pred);
    if (!id) throw coldl::InputError("unknown predicate '" + pred + "'");
    const std::size_t k = r.program->predicate(*id).arity;
    std::vector<coldl::Id> rows;
    if (r.program->is_idb(*id)) rows = r.store.facts(*id);
    else rows = r.edb->tuples(pred);
    std::vector<Row> out;
    if (k == 0) {
      const bool present = r.program->is_idb(*id) ? r.store.fact_count(*id) > 0 : r.edb->count(pred) > 0;
      if (present) out.emplace_back();
      return out;
    }
    for (std::size_t i = 0; i < rows.size(); i += k) {
      Row row;
      for (std::size_t c = 0; c < k; ++c) row.push_back(dict_.lookup(rows[i + c]));
      out.push_back(std::move(row));
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<std::string> query(const std::string& pattern) { return coldl::query_facts(result(), dict_, pattern); }

  std::string export_text() const {
    std::ostringstream out;
    result().export_facts(dict_, out);
    return out.str();
  }

  std::map<std::string, double> stats() const {
    std::map<std::string, double> out;
    for (const auto& [k, v] : result().stats.counters()) out[k] = static_cast<double>(v);
    for (const auto& [k, v] : result().stats.timings()) out[k] = v;
    return out;
  }

  std::string status() const {
    switch (result().status) {
      case coldl::RunStatus::fixpoint: return "fixpoint";
      case coldl::RunStatus::timeout: return "timeout";
      case coldl::RunStatus::step_limit: return "step_limit";
    }
    return "unknown";
  }

  std::size_t idb_fact_count() const { return result().idb_fact_count(); }

 private:
  coldl::Dictionary dict_;
  coldl::Program program_;
  std::shared_ptr<const coldl::EdbStore> edb_;
  std::optional<coldl::Materialization> result_;
};

}  // namespace

PYBIND11_MODULE(_coldl, m) {
  m.doc() = "Column-oriented Datalog materialization";

  // Translators run newest first, so the base class goes first.
  auto error = py::register_exception<coldl::Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<coldl::ParseError>(m, "ParseError", error.ptr());
  py::register_exception<coldl::SafetyError>(m, "SafetyError", error.ptr());
  py::register_exception<coldl::ArityError>(m, "ArityError", error.ptr());
  py::register_exception<coldl::InputError>(m, "InputError", error.ptr());
  py::register_exception<coldl::ResourceError>(m, "ResourceError", error.ptr());

  py::class_<coldl::MaterializeOptions>(m, "Options")
      .def(py::init<>())
      .def_readwrite("mismatch", &coldl::MaterializeOptions::opt_mismatch)
      .def_readwrite("redundancy", &coldl::MaterializeOptions::opt_redundancy)
      .def_readwrite("subsumption", &coldl::MaterializeOptions::opt_subsumption)
      .def_readwrite("validate_drops", &coldl::MaterializeOptions::validate_drops)
      .def_readwrite("dyn_check_limit", &coldl::MaterializeOptions::dyn_check_limit)
      .def_readwrite("timeout", &coldl::MaterializeOptions::timeout)
      .def_readwrite("max_steps", &coldl::MaterializeOptions::max_steps)
      .def_readwrite("seed", &coldl::MaterializeOptions::seed)
      .def_readwrite("memo", &coldl::MaterializeOptions::memo)
      .def_readwrite("memo_timeout", &coldl::MaterializeOptions::memo_timeout)
      .def_property(
          "random_schedule",
          [](const coldl::MaterializeOptions& o) { return o.schedule == coldl::Schedule::random; },
          [](coldl::MaterializeOptions& o, bool v) {
            o.schedule = v ? coldl::Schedule::random : coldl::Schedule::round_robin;
          })
      .def("disable_optimizations", &coldl::MaterializeOptions::disable_optimizations);

  py::class_<Session>(m, "Session")
      .def(py::init<const std::string&, const FactMap&>(), py::arg("rules"), py::arg("facts") = FactMap{})
      .def("load", &Session::load, py::arg("path"), py::arg("format") = "tsv")
      .def("run", &Session::run, py::arg("options") = coldl::MaterializeOptions{})
      .def("facts", &Session::facts, py::arg("predicate"))
      .def("query", &Session::query, py::arg("pattern"))
      .def("export", &Session::export_text)
      .def("stats", &Session::stats)
      .def_property_readonly("status", &Session::status)
      .def_property_readonly("idb_fact_count", &Session::idb_fact_count);
}
