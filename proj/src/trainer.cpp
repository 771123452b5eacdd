#include "kgqr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <thread>
#include <unordered_set>

namespace kgqr {

void TrainConfig::validate() const {
  if (gamma <= 0.0) throw ConfigError("gamma", "margin must be positive");
  if (negatives < 1) throw ConfigError("negatives", "need at least one negative sample");
  if (model.context_samples < 0) throw ConfigError("K", "sample count must be nonnegative");
  if (variance_weight < 0.0) throw ConfigError("variance_weight", "lambda must be nonnegative");
  if (lr <= 0.0) throw ConfigError("lr", "learning rate must be positive");
  if (batch_size < 1) throw ConfigError("batch_size", "batch size must be positive");
  if (max_steps < 1) throw ConfigError("max_steps", "need at least one step");
  if (workers < 1) throw ConfigError("workers", "need at least one worker");
}

std::vector<EntityId> sample_negatives(const KnowledgeGraph& kg, const QueryInstance& inst,
                                       int k, Rng& rng) {
  std::unordered_set<EntityId> answers(inst.easy_answers.begin(), inst.easy_answers.end());
  answers.insert(inst.hard_answers.begin(), inst.hard_answers.end());
  const std::size_t complement = kg.entity_count() - answers.size();
  if (complement == 0) throw NoNegativesAvailableError("every entity answers this query");

  std::vector<EntityId> out;
  out.reserve(static_cast<std::size_t>(k));
  if (complement < static_cast<std::size_t>(k)) {
    // Complement smaller than k: duplicates permitted.
    while (out.size() < static_cast<std::size_t>(k)) {
      EntityId e = static_cast<EntityId>(rng.below(kg.entity_count()));
      if (!answers.contains(e)) out.push_back(e);
    }
    return out;
  }
  std::unordered_set<EntityId> used;
  while (out.size() < static_cast<std::size_t>(k)) {
    EntityId e = static_cast<EntityId>(rng.below(kg.entity_count()));
    if (answers.contains(e) || used.contains(e)) continue;
    used.insert(e);
    out.push_back(e);
  }
  return out;
}

Value qe_loss(Tape& tape, Value dist_pos, const std::vector<Value>& dist_negs, double gamma) {
  if (dist_negs.empty()) throw ShapeMismatchError("qe_loss needs at least one negative");
  Value g = tape.constant_scalar(gamma);
  // -log sigmoid(z) == softplus(-z), computed stably.
  Value loss = tape.softplus(tape.sub(dist_pos, g));
  std::vector<Value> neg_terms;
  neg_terms.reserve(dist_negs.size());
  for (Value dn : dist_negs) neg_terms.push_back(tape.softplus(tape.sub(g, dn)));
  return tape.add(loss, tape.mean_list(neg_terms));
}

Value total_loss(Tape& tape, Value qe, std::optional<Value> var, double lambda, Backend backend) {
  if (backend == Backend::kBox) {
    if (var && tape.scalar_value(*var) != 0.0) {
      throw VarianceOnBoxBackendError("variance loss is undefined for the box backend");
    }
    return qe;
  }
  if (!var || lambda == 0.0) return qe;
  return tape.add(qe, tape.mul(tape.constant_scalar(lambda), *var));
}

AdamOptimizer::AdamOptimizer(double beta1, double beta2, double epsilon)
    : beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

void AdamOptimizer::step(ParamStore& params, const std::vector<Tensor>& grads, double lr) {
  if (grads.size() != params.size()) {
    throw ShapeMismatchError("gradient list does not match parameter registry");
  }
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = Tensor(params.at(i).rows, params.at(i).cols);
      v_[i] = Tensor(params.at(i).rows, params.at(i).cols);
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params.at(i);
    const Tensor& g = grads[i];
    if (!p.same_shape(g)) throw ShapeMismatchError("gradient shape mismatch");
    for (int j = 0; j < p.size(); ++j) {
      m_[i].v[j] = beta1_ * m_[i].v[j] + (1.0 - beta1_) * g.v[j];
      v_[i].v[j] = beta2_ * v_[i].v[j] + (1.0 - beta2_) * g.v[j] * g.v[j];
      const double m_hat = m_[i].v[j] / bc1;
      const double v_hat = v_[i].v[j] / bc2;
      p.v[j] -= lr * m_hat / (std::sqrt(v_hat) + epsilon_);
    }
  }
}

InstanceLoss instance_loss(Tape& tape, const TapeBinding& binding, const Model& model,
                           const KnowledgeGraph& kg, const QueryInstance& inst,
                           const TrainConfig& cfg, Rng& rng) {
  const QueryGraph graph = inst.graph();
  std::vector<Value> disjuncts = model.embed_query(tape, binding, graph, true);

  std::vector<EntityId> positives = inst.easy_answers;
  positives.insert(positives.end(), inst.hard_answers.begin(), inst.hard_answers.end());
  if (positives.empty()) throw DataError("training instance without answers");
  EntityId pos = positives[static_cast<std::size_t>(rng.below(positives.size()))];

  Value dist_pos = model.query_distance(tape, binding, pos, disjuncts);
  std::vector<Value> dist_negs;
  for (EntityId neg : sample_negatives(kg, inst, cfg.negatives, rng)) {
    dist_negs.push_back(model.query_distance(tape, binding, neg, disjuncts));
  }
  Value qe = qe_loss(tape, dist_pos, dist_negs, cfg.gamma);

  if (model.config().backend == Backend::kBeta && cfg.variance_weight > 0.0 &&
      model.config().use_integration) {
    // Variance loss compares the base answer embedding against the
    // integrated one, disjunct by disjunct.
    std::vector<Value> base = model.embed_query(tape, binding, graph, false);
    std::vector<Value> terms;
    for (std::size_t i = 0; i < disjuncts.size(); ++i) {
      terms.push_back(variance_loss(tape, base[i], disjuncts[i], model.config().dim));
    }
    Value var = terms.size() == 1 ? terms[0] : tape.mean_list(terms);
    return {total_loss(tape, qe, var, cfg.variance_weight, Backend::kBeta), qe, var};
  }
  return {total_loss(tape, qe, std::nullopt, cfg.variance_weight, model.config().backend), qe,
          std::nullopt};
}

namespace {

void round_to_fp32(ParamStore& params) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (double& x : params.at(i).v) x = static_cast<double>(static_cast<float>(x));
  }
}

struct WorkerResult {
  std::vector<Tensor> grads;
  double loss = 0.0;
  double qe = 0.0;
  double var = 0.0;
};

}  // namespace

TrainResult train_loop(const KnowledgeGraph& kg, const std::vector<QueryInstance>& dataset,
                       Model& model, const TrainConfig& cfg, const std::string& checkpoint_path,
                       const MetricsSink& sink) {
  cfg.validate();
  if (dataset.empty()) throw DataError("training dataset is empty");
  for (const QueryInstance& inst : dataset) {
    if (!model.supports(inst.type)) {
      throw ConfigError("backend", "the box backend cannot address negations (dataset contains " +
                                       std::string(to_string(inst.type)) + " queries)");
    }
  }

  // Group by type for uniform mixed-type batching.
  std::map<QueryType, std::vector<std::size_t>> by_type;
  for (std::size_t i = 0; i < dataset.size(); ++i) by_type[dataset[i].type].push_back(i);
  std::vector<QueryType> types;
  for (const auto& [t, ids] : by_type) types.push_back(t);

  Rng root(cfg.seed);
  AdamOptimizer opt;
  TrainResult result;
  result.loss_curve.reserve(static_cast<std::size_t>(cfg.max_steps));

  for (long long step = 0; step < cfg.max_steps; ++step) {
    Rng batch_rng = root.split("batch").split(static_cast<std::uint64_t>(step));
    std::vector<std::size_t> batch;
    batch.reserve(static_cast<std::size_t>(cfg.batch_size));
    for (int i = 0; i < cfg.batch_size; ++i) {
      QueryType t = types[static_cast<std::size_t>(batch_rng.below(types.size()))];
      const auto& pool = by_type[t];
      batch.push_back(pool[static_cast<std::size_t>(batch_rng.below(pool.size()))]);
    }

    const int workers = std::min<int>(cfg.workers, static_cast<int>(batch.size()));
    std::vector<WorkerResult> results(static_cast<std::size_t>(workers));
    auto run_worker = [&](int w) {
      WorkerResult& res = results[static_cast<std::size_t>(w)];
      Tape tape;
      TapeBinding binding = model.bind_params(tape);
      std::vector<Value> losses;
      for (std::size_t bi = static_cast<std::size_t>(w); bi < batch.size();
           bi += static_cast<std::size_t>(workers)) {
        Rng inst_rng = root.split("instance").split(static_cast<std::uint64_t>(step), bi);
        InstanceLoss il = instance_loss(tape, binding, model, kg, dataset[batch[bi]], cfg, inst_rng);
        res.qe += tape.scalar_value(il.qe);
        if (il.var) res.var += tape.scalar_value(*il.var);
        losses.push_back(il.total);
      }
      if (losses.empty()) {
        res.grads.resize(model.params().size());
        for (std::size_t i = 0; i < model.params().size(); ++i) {
          res.grads[i] = Tensor(model.params().at(i).rows, model.params().at(i).cols);
        }
        return;
      }
      // Sum of instance losses; the batch mean is applied at merge time.
      Value total = losses[0];
      for (std::size_t i = 1; i < losses.size(); ++i) total = tape.add(total, losses[i]);
      tape.backward(total);
      res.loss = tape.scalar_value(total);
      res.grads = tape.parameter_grads();
    };

    if (workers == 1) {
      run_worker(0);
    } else {
      std::vector<std::thread> threads;
      for (int w = 0; w < workers; ++w) threads.emplace_back(run_worker, w);
      for (auto& th : threads) th.join();
    }

    // Merge in fixed partition order.
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    std::vector<Tensor> grads = std::move(results[0].grads);
    double loss_sum = results[0].loss;
    double qe_sum = results[0].qe;
    double var_sum = results[0].var;
    for (int w = 1; w < workers; ++w) {
      loss_sum += results[static_cast<std::size_t>(w)].loss;
      qe_sum += results[static_cast<std::size_t>(w)].qe;
      var_sum += results[static_cast<std::size_t>(w)].var;
      for (std::size_t i = 0; i < grads.size(); ++i) {
        const Tensor& g = results[static_cast<std::size_t>(w)].grads[i];
        for (int j = 0; j < grads[i].size(); ++j) grads[i].v[j] += g.v[j];
      }
    }
    for (Tensor& g : grads) {
      for (double& x : g.v) x *= inv_batch;
    }
    const double loss = loss_sum * inv_batch;
    if (!std::isfinite(loss)) {
      throw DivergedLossError(step, "non-finite training loss");
    }

    opt.step(model.params(), grads, cfg.lr);
    if (cfg.fp32_params) round_to_fp32(model.params());

    result.loss_curve.push_back(loss);
    result.final_loss = loss;
    result.steps = step + 1;
    if (sink) sink(StepRecord{step, loss, qe_sum * inv_batch, var_sum * inv_batch, cfg.lr});

    if (!checkpoint_path.empty() && cfg.checkpoint_interval > 0 &&
        (step + 1) % cfg.checkpoint_interval == 0) {
      save_checkpoint(checkpoint_path, model);
    }
  }
  if (!checkpoint_path.empty()) save_checkpoint(checkpoint_path, model);
  return result;
}

}  // namespace kgqr
