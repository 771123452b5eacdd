#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "kgqr/runner.hpp"
#include "kgqr/synthetic.hpp"

namespace py = pybind11;
using namespace kgqr;

namespace {

QueryType type_arg(const std::string& name) {
  auto t = query_type_from_string(name);
  if (!t) throw ConfigError("type", "unknown query type: " + name);
  return *t;
}

RunConfig config_arg(const py::dict& d) {
  nlohmann::json doc = nlohmann::json::object();
  for (auto item : d) {
    const std::string key = py::cast<std::string>(item.first);
    py::handle v = item.second;
    if (py::isinstance<py::bool_>(v)) {
      doc[key] = py::cast<bool>(v);
    } else if (py::isinstance<py::int_>(v)) {
      doc[key] = py::cast<long long>(v);
    } else if (py::isinstance<py::float_>(v)) {
      doc[key] = py::cast<double>(v);
    } else if (py::isinstance<py::str>(v)) {
      doc[key] = py::cast<std::string>(v);
    } else if (py::isinstance<py::list>(v)) {
      doc[key] = py::cast<std::vector<std::string>>(v);
    } else {
      throw ConfigError(key, "unsupported config value type");
    }
  }
  return parse_config_json(doc);
}

py::dict instance_dict(const KnowledgeGraph& kg, const QueryInstance& inst) {
  py::dict out;
  out["type"] = std::string(to_string(inst.type));
  auto labels = [&](const std::vector<EntityId>& ids) {
    std::vector<std::string> v;
    for (EntityId e : ids) v.push_back(kg.entity_label(e));
    return v;
  };
  out["anchors"] = labels(inst.anchors);
  std::vector<std::string> rels;
  for (RelationId r : inst.relations) rels.push_back(kg.relation_label(r));
  out["relations"] = rels;
  out["easy_answers"] = labels(inst.easy_answers);
  out["hard_answers"] = labels(inst.hard_answers);
  return out;
}

py::dict report_dict(const EvalReport& report) {
  py::dict out;
  py::dict per_type;
  for (const auto& [name, m] : report.per_type) {
    py::dict row;
    row["mrr"] = m.mrr;
    row["hits1"] = m.hits1;
    row["hits3"] = m.hits3;
    row["hits10"] = m.hits10;
    row["count"] = m.count;
    per_type[name.c_str()] = row;
  }
  out["per_type"] = per_type;
  out["avg_mrr"] = report.avg_mrr();
  out["skipped_degenerate"] = report.skipped_degenerate;
  return out;
}

}  // namespace

PYBIND11_MODULE(kgqr, m) {
  m.doc() = "knowledge-graph multi-hop query reasoning";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<KnowledgeGraph>(m, "KnowledgeGraph")
      .def_static("load", &KnowledgeGraph::load, py::arg("path"), py::arg("add_inverses") = true,
                  py::arg("vocabulary") = nullptr, py::keep_alive<0, 3>())
      .def_property_readonly("entity_count", &KnowledgeGraph::entity_count)
      .def_property_readonly("relation_count", &KnowledgeGraph::relation_count)
      .def_property_readonly("triple_count", &KnowledgeGraph::triple_count)
      .def("entity_label",
           [](const KnowledgeGraph& kg, EntityId e) { return kg.entity_label(e); })
      .def("relation_label",
           [](const KnowledgeGraph& kg, RelationId r) { return kg.relation_label(r); })
      .def("entity_id",
           [](const KnowledgeGraph& kg, const std::string& label) { return kg.entity_id(label); })
      .def("relation_id", [](const KnowledgeGraph& kg,
                             const std::string& label) { return kg.relation_id(label); })
      .def("inverse", &KnowledgeGraph::inverse)
      .def("neighbors",
           [](const KnowledgeGraph& kg, const std::string& entity, const std::string& relation) {
             auto e = kg.entity_id(entity);
             if (!e) throw UnknownEntityError("unknown entity label: " + entity);
             auto r = kg.relation_id(relation);
             if (!r) throw UnknownRelationError("unknown relation label: " + relation);
             std::vector<std::string> out;
             for (EntityId t : kg.neighbors(*e, *r)) out.push_back(kg.entity_label(t));
             return out;
           })
      .def("relation_endpoints",
           [](const KnowledgeGraph& kg, const std::string& relation, const std::string& side) {
             auto r = kg.relation_id(relation);
             if (!r) throw UnknownRelationError("unknown relation label: " + relation);
             auto s = side == "head" ? EndpointSide::kHead : EndpointSide::kTail;
             std::vector<std::string> out;
             for (EntityId e : kg.relation_endpoints(*r, s)) out.push_back(kg.entity_label(e));
             return out;
           })
      .def("sample_context_ids",
           [](const KnowledgeGraph& kg, const std::string& relation, const std::string& side,
              std::size_t k, std::uint64_t seed) {
             auto r = kg.relation_id(relation);
             if (!r) throw UnknownRelationError("unknown relation label: " + relation);
             auto s = side == "head" ? EndpointSide::kHead : EndpointSide::kTail;
             return kg.sample_context_ids(*r, s, k, seed);
           });

  m.def("query_types", [] {
    std::vector<std::string> names;
    for (QueryType t : all_query_types()) names.emplace_back(to_string(t));
    return names;
  });

  m.def(
      "count_table",
      [](const std::string& type) {
        const TemplateArity& a = template_arity(type_arg(type));
        std::vector<EntityId> anchors(static_cast<std::size_t>(a.anchors), 0);
        std::vector<RelationId> relations(static_cast<std::size_t>(a.relations), 0);
        CountTable c = count_table(build_query_graph(type_arg(type), anchors, relations));
        std::vector<std::vector<int>> rows;
        for (const auto& row : c.counts) rows.emplace_back(row.begin(), row.end());
        return rows;
      },
      py::arg("type"));

  m.def(
      "type_vector",
      [](const std::string& type) {
        const TemplateArity& a = template_arity(type_arg(type));
        std::vector<EntityId> anchors(static_cast<std::size_t>(a.anchors), 0);
        std::vector<RelationId> relations(static_cast<std::size_t>(a.relations), 0);
        auto tv = type_vector(count_table(build_query_graph(type_arg(type), anchors, relations)));
        return std::vector<double>(tv.begin(), tv.end());
      },
      py::arg("type"));

  m.def(
      "evaluate_answers",
      [](const KnowledgeGraph& kg, const std::string& type,
         const std::vector<std::string>& anchors, const std::vector<std::string>& relations) {
        QueryGraph g = build_query_graph(kg, type_arg(type), anchors, relations);
        std::vector<std::string> out;
        for (EntityId e : evaluate_answers(kg, to_computation_graph(g))) {
          out.push_back(kg.entity_label(e));
        }
        return out;
      },
      py::arg("kg"), py::arg("type"), py::arg("anchors"), py::arg("relations"),
      "Exact traversal answers of one query under set semantics.");

  m.def(
      "generate_queries",
      [](const KnowledgeGraph& kg_train, const KnowledgeGraph& kg_full,
         const std::vector<std::string>& types, int count_per_type, std::uint64_t seed,
         bool require_hard, int max_tries) {
        std::vector<QueryType> ts;
        for (const std::string& name : types) ts.push_back(type_arg(name));
        auto instances =
            generate_queries(kg_train, kg_full, ts, count_per_type, seed, require_hard, max_tries);
        py::list out;
        for (const QueryInstance& inst : instances) out.append(instance_dict(kg_full, inst));
        return out;
      },
      py::arg("kg_train"), py::arg("kg_full"), py::arg("types"), py::arg("count_per_type"),
      py::arg("seed"), py::arg("require_hard") = false, py::arg("max_tries") = 200);

  m.def("make_random_kg", &make_random_kg, py::arg("entities"), py::arg("base_relations"),
        py::arg("triples"), py::arg("seed"));

  m.def(
      "make_queries", [](const py::dict& cfg) {
        MakeQueriesResult r = run_make_queries(config_arg(cfg));
        py::dict out;
        out["train"] = r.train_count;
        out["valid"] = r.valid_count;
        out["test"] = r.test_count;
        return out;
      },
      py::arg("config"), "Ground query datasets onto files named in the config.");

  m.def(
      "train",
      [](const py::dict& cfg) {
        TrainRunResult r = run_train(config_arg(cfg));
        py::dict out;
        out["steps"] = r.steps;
        out["final_loss"] = r.final_loss;
        if (r.validation) out["validation"] = report_dict(*r.validation);
        return out;
      },
      py::arg("config"), "Train per config; writes the checkpoint named in the config.");

  m.def(
      "evaluate",
      [](const py::dict& cfg, const std::string& split) {
        EvalRunResult r = run_eval(config_arg(cfg), split);
        py::dict out = report_dict(r.report);
        if (r.baseline) {
          out["improvement_percent"] = improvement_percent(*r.baseline, r.report);
        }
        return out;
      },
      py::arg("config"), py::arg("split") = "test",
      "Filtered-ranking evaluation of the checkpoint named in the config.");

  m.def(
      "answer",
      [](const py::dict& cfg, const std::string& type, const std::vector<std::string>& anchors,
         const std::vector<std::string>& relations) {
        return run_answer(config_arg(cfg), type, anchors, relations);
      },
      py::arg("config"), py::arg("type"), py::arg("anchors"), py::arg("relations"),
      "Top-k (entity, distance) pairs for one query under a trained checkpoint.");
}
