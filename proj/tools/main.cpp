#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "kgqr/runner.hpp"
#include "kgqr/synthetic.hpp"

namespace {

using namespace kgqr;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct CommonOpts {
  std::string config_path;
  std::optional<long long> seed;
  std::optional<std::string> backend;
  std::optional<long long> max_steps;
  std::optional<long long> workers;
};

RunConfig resolve_config(const CommonOpts& opts) {
  RunConfig cfg = opts.config_path.empty() ? default_config() : parse_config(opts.config_path);
  // Flags override config-file values.
  if (opts.seed) {
    if (*opts.seed < 0) throw ConfigError("seed", "must be nonnegative");
    cfg.train.seed = static_cast<std::uint64_t>(*opts.seed);
    cfg.train.model.context_seed = Rng(cfg.train.seed).split("context").seed();
  }
  if (opts.backend) {
    auto b = backend_from_string(*opts.backend);
    if (!b) throw ConfigError("backend", "expected \"box\" or \"beta\"");
    cfg.train.model.backend = *b;
  }
  if (opts.max_steps) {
    if (*opts.max_steps < 1) throw ConfigError("max_steps", "must be positive");
    cfg.train.max_steps = *opts.max_steps;
  }
  if (opts.workers) {
    if (*opts.workers < 1) throw ConfigError("workers", "must be at least 1");
    cfg.train.workers = static_cast<int>(*opts.workers);
  }
  return cfg;
}

void echo(const RunConfig& cfg) {
  std::cout << "config " << echo_config(cfg).dump() << "\n";
  std::cout << "seed " << cfg.train.seed << "\n";
}

int cmd_build_kg(const RunConfig& cfg) {
  echo(cfg);
  const std::string path = cfg.triples_full.empty() ? cfg.triples_train : cfg.triples_full;
  if (path.empty()) throw ConfigError("triples_full", "build-kg needs a triple file");
  KnowledgeGraph kg = KnowledgeGraph::load(path);
  nlohmann::ordered_json stats;
  stats["entities"] = kg.entity_count();
  stats["relations"] = kg.relation_count();
  stats["triples"] = kg.triple_count();
  std::cout << stats.dump() << "\n";
  return kExitOk;
}

int cmd_make_queries(const RunConfig& cfg) {
  echo(cfg);
  MakeQueriesResult res = run_make_queries(cfg);
  std::cout << "queries train " << res.train_count << " valid " << res.valid_count << " test "
            << res.test_count << "\n";
  return kExitOk;
}

int cmd_train(const RunConfig& cfg) {
  echo(cfg);
  std::ofstream metrics;
  if (!cfg.metrics_out.empty()) {
    metrics.open(cfg.metrics_out);
    if (!metrics) throw DataError("cannot open metrics log: " + cfg.metrics_out);
  }
  const long long report_every = std::max<long long>(1, cfg.train.max_steps / 10);
  MetricsSink sink = [&](const StepRecord& rec) {
    if (metrics.is_open()) {
      nlohmann::ordered_json line;
      line["step"] = rec.step;
      line["loss"] = rec.loss;
      line["qe_loss"] = rec.qe_loss;
      line["var_loss"] = rec.var_loss;
      line["lr"] = rec.lr;
      metrics << line.dump() << "\n";
    }
    if (rec.step % report_every == 0) {
      std::cout << "step " << rec.step << " loss " << rec.loss << "\n";
    }
  };
  TrainRunResult result = run_train(cfg, sink);
  std::cout << "trained " << result.steps << " steps, final loss " << result.final_loss << "\n";
  if (result.validation) std::cout << report_table(*result.validation);
  return kExitOk;
}

int cmd_eval(const RunConfig& cfg, const std::string& split) {
  echo(cfg);
  EvalRunResult result = run_eval(cfg, split);
  std::cout << report_table(result.report);
  if (result.baseline) {
    std::cout << "improvement " << improvement_percent(*result.baseline, result.report) << "%\n";
  }
  return kExitOk;
}

int cmd_answer(const RunConfig& cfg, const std::string& type_name,
               const std::vector<std::string>& anchors,
               const std::vector<std::string>& relations) {
  echo(cfg);
  auto ranked = run_answer(cfg, type_name, anchors, relations);
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    std::cout << (i + 1) << "\t" << ranked[i].first << "\t" << ranked[i].second << "\n";
  }
  return kExitOk;
}

// Finite-difference verification of every primitive, the special functions,
// and the full per-query loss for both backends.
int cmd_gradcheck() {
  Rng rng(20240817);
  auto rand_vec = [&](int n, double lo, double hi) {
    Tensor t(n, 1);
    for (double& x : t.v) x = rng.uniform(lo, hi);
    return t;
  };
  auto rand_mat = [&](int r, int c) {
    Tensor t(r, c);
    for (double& x : t.v) x = rng.uniform(-1.0, 1.0);
    return t;
  };

  bool ok = true;
  auto check = [&](const std::string& name, double err, double threshold) {
    ok &= err < threshold;
    std::cout << "gradcheck " << name << " max_rel_err " << err << " threshold " << threshold
              << (err < threshold ? " ok" : " FAIL") << "\n";
  };

  using F = std::function<Value(Tape&, const std::vector<Value>&)>;
  auto scalarize = [](Tape& t, Value v) { return t.sum(v); };
  const double h = 1e-5;
  const int dim = 6;

  std::vector<std::pair<std::string, std::pair<F, std::vector<Tensor>>>> cases;
  auto two = [&](double lo, double hi) {
    return std::vector<Tensor>{rand_vec(dim, lo, hi), rand_vec(dim, lo, hi)};
  };
  cases.push_back({"add", {[&](Tape& t, const std::vector<Value>& p) {
                             return scalarize(t, t.add(p[0], p[1]));
                           },
                           two(-2, 2)}});
  cases.push_back({"sub", {[&](Tape& t, const std::vector<Value>& p) {
                             return scalarize(t, t.sub(p[0], p[1]));
                           },
                           two(-2, 2)}});
  cases.push_back({"mul", {[&](Tape& t, const std::vector<Value>& p) {
                             return scalarize(t, t.mul(p[0], p[1]));
                           },
                           two(-2, 2)}});
  cases.push_back({"div", {[&](Tape& t, const std::vector<Value>& p) {
                             return scalarize(t, t.div(p[0], p[1]));
                           },
                           {rand_vec(dim, -2, 2), rand_vec(dim, 0.5, 2.5)}}});
  cases.push_back({"matvec", {[&](Tape& t, const std::vector<Value>& p) {
                                return scalarize(t, t.matvec(p[0], p[1]));
                              },
                              {rand_mat(5, dim), rand_vec(dim, -1, 1)}}});
  cases.push_back({"matmul", {[&](Tape& t, const std::vector<Value>& p) {
                                return scalarize(t, t.matmul(p[0], p[1]));
                              },
                              {rand_mat(4, 5), rand_mat(5, 3)}}});
  cases.push_back({"concat+slice", {[&](Tape& t, const std::vector<Value>& p) {
                                      Value c = t.concat({p[0], p[1]});
                                      return scalarize(t, t.slice(c, 2, 7));
                                    },
                                    two(-2, 2)}});
  cases.push_back({"relu", {[&](Tape& t, const std::vector<Value>& p) {
                              return scalarize(t, t.relu(p[0]));
                            },
                            {rand_vec(dim, -2, 2)}}});
  cases.push_back({"sigmoid", {[&](Tape& t, const std::vector<Value>& p) {
                                 return scalarize(t, t.sigmoid(p[0]));
                               },
                               {rand_vec(dim, -3, 3)}}});
  cases.push_back({"softplus", {[&](Tape& t, const std::vector<Value>& p) {
                                  return scalarize(t, t.softplus(p[0]));
                                },
                                {rand_vec(dim, -3, 3)}}});
  cases.push_back({"exp", {[&](Tape& t, const std::vector<Value>& p) {
                             return scalarize(t, t.exp(p[0]));
                           },
                           {rand_vec(dim, -1, 1)}}});
  cases.push_back({"log", {[&](Tape& t, const std::vector<Value>& p) {
                             return scalarize(t, t.log(p[0]));
                           },
                           {rand_vec(dim, 0.5, 3)}}});
  cases.push_back({"sqrt", {[&](Tape& t, const std::vector<Value>& p) {
                              return scalarize(t, t.sqrt(p[0]));
                            },
                            {rand_vec(dim, 0.5, 3)}}});
  cases.push_back({"abs", {[&](Tape& t, const std::vector<Value>& p) {
                             return scalarize(t, t.abs(p[0]));
                           },
                           {rand_vec(dim, 0.5, 2)}}});
  cases.push_back({"min_list", {[&](Tape& t, const std::vector<Value>& p) {
                                  return scalarize(t, t.min_list({p[0], p[1]}));
                                },
                                two(-2, 2)}});
  cases.push_back({"mean_list", {[&](Tape& t, const std::vector<Value>& p) {
                                   return scalarize(t, t.mean_list({p[0], p[1]}));
                                 },
                                 two(-2, 2)}});
  cases.push_back({"softmax", {[&](Tape& t, const std::vector<Value>& p) {
                                 Value s = t.softmax(p[0]);
                                 return t.sum(t.mul(s, p[1]));
                               },
                               two(-2, 2)}});
  cases.push_back({"l1_norm", {[&](Tape& t, const std::vector<Value>& p) {
                                 return t.l1_norm(p[0]);
                               },
                               {rand_vec(dim, 0.3, 2)}}});
  cases.push_back({"l2_norm", {[&](Tape& t, const std::vector<Value>& p) {
                                 return t.l2_norm(p[0]);
                               },
                               {rand_vec(dim, 0.3, 2)}}});
  cases.push_back({"posmap", {[&](Tape& t, const std::vector<Value>& p) {
                                return scalarize(t, t.posmap(p[0], 0.05, 1e9));
                              },
                              {rand_vec(dim, -2, 2)}}});
  cases.push_back({"lgamma", {[&](Tape& t, const std::vector<Value>& p) {
                                return scalarize(t, t.lgamma(p[0]));
                              },
                              {rand_vec(dim, 0.2, 8)}}});
  cases.push_back({"digamma", {[&](Tape& t, const std::vector<Value>& p) {
                                 return scalarize(t, t.digamma(p[0]));
                               },
                               {rand_vec(dim, 0.2, 8)}}});
  for (auto& [name, fc] : cases) {
    check(name, grad_check(fc.first, fc.second, h), 1e-4);
  }

  // Full per-query loss, both backends, all context inputs enabled.
  KnowledgeGraph kg = make_random_kg(24, 3, 140, 7);
  for (Backend backend : {Backend::kBox, Backend::kBeta}) {
    ModelConfig mc;
    mc.backend = backend;
    mc.dim = 4;
    mc.dim_pos = mc.dim_rol = mc.dim_type = 3;
    mc.context_samples = 4;
    mc.context_seed = 11;
    mc.init_range = 0.5;
    Model model(&kg, mc);
    model.init(5);
    TrainConfig tc;
    tc.model = mc;
    tc.negatives = 3;
    tc.variance_weight = 0.1;
    double worst = 0.0;
    for (QueryType type : all_query_types()) {
      if (!model.supports(type)) continue;
      Rng ground_rng = Rng(31).split(static_cast<std::uint64_t>(type));
      QueryInstance inst = ground_query(kg, kg, type, ground_rng, 400, false);
      std::vector<Tensor> point;
      for (std::size_t i = 0; i < model.params().size(); ++i) {
        point.push_back(model.params().at(i));
      }
      F loss_fn = [&](Tape& t, const std::vector<Value>& vals) {
        TapeBinding b = binding_from_values(model.params(), vals);
        Rng loss_rng(97);
        return instance_loss(t, b, model, kg, inst, tc, loss_rng).total;
      };
      worst = std::max(worst, grad_check(loss_fn, point, h));
    }
    check(std::string("full_loss_") + std::string(to_string(backend)), worst, 1e-3);
  }

  std::cout << (ok ? "gradcheck passed" : "gradcheck FAILED") << "\n";
  return ok ? kExitOk : kExitNumeric;
}

int cmd_bench_context(const RunConfig& cfg) {
  echo(cfg);
  KnowledgeGraph kg = make_random_kg(800, 2, 4000, cfg.train.seed + 1);
  nlohmann::ordered_json out;
  double base = 0.0;
  for (int k : {60, 120, 240, 480}) {
    double mean = benchmark_relation_induced(kg, cfg.train.model, k, cfg.bench_calls);
    if (k == 60) base = mean;
    nlohmann::ordered_json row;
    row["K"] = k;
    row["mean_us"] = mean * 1e6;
    row["ratio_vs_K60"] = mean / base;
    out.push_back(row);
    std::cout << "K=" << k << " mean=" << mean * 1e6 << "us ratio=" << mean / base << "\n";
  }
  if (!cfg.report_out.empty()) {
    std::ofstream f(cfg.report_out);
    f << out.dump(2) << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"knowledge-graph multi-hop query reasoning"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  CommonOpts opts;
  app.add_option("-c,--config", opts.config_path, "JSON config file");
  app.add_option("--seed", opts.seed, "override config seed");
  app.add_option("--backend", opts.backend, "override backend (box|beta)");
  app.add_option("--steps", opts.max_steps, "override max training steps");
  app.add_option("--workers", opts.workers, "override worker count");

  auto* build_kg = app.add_subcommand("build-kg", "load and index a triple file, print stats");
  std::string triples_flag;
  build_kg->add_option("--triples", triples_flag, "triple file (overrides config)");

  auto* make_queries =
      app.add_subcommand("make-queries", "ground query datasets by backward sampling");
  auto* train = app.add_subcommand("train", "train a reasoning model");
  auto* eval = app.add_subcommand("eval", "filtered-ranking evaluation of a checkpoint");
  std::string split = "test";
  eval->add_option("--split", split, "queries_valid or queries_test")
      ->check(CLI::IsMember({"valid", "test"}));

  auto* answer = app.add_subcommand("answer", "answer a single query with a checkpoint");
  std::string answer_type;
  std::vector<std::string> answer_anchors, answer_relations;
  answer->add_option("--type", answer_type, "query type (1p..pni)")->required();
  answer->add_option("--anchors", answer_anchors, "anchor entity labels")->delimiter(',');
  answer->add_option("--relations", answer_relations, "relation labels")->delimiter(',');

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  auto* bench = app.add_subcommand("bench-context", "relation-induced context timing vs K");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gradcheck->parsed()) return cmd_gradcheck();
    RunConfig cfg = resolve_config(opts);
    if (build_kg->parsed()) {
      if (!triples_flag.empty()) cfg.triples_full = triples_flag;
      return cmd_build_kg(cfg);
    }
    if (make_queries->parsed()) return cmd_make_queries(cfg);
    if (train->parsed()) return cmd_train(cfg);
    if (eval->parsed()) return cmd_eval(cfg, split);
    if (answer->parsed()) return cmd_answer(cfg, answer_type, answer_anchors, answer_relations);
    if (bench->parsed()) return cmd_bench_context(cfg);
    std::cerr << "error: no subcommand\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error(config): " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "error(numeric): " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    std::cerr << "error(data): " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
