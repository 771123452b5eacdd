#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kgqr/model.hpp"
#include "kgqr/oracle.hpp"

namespace kgqr {

struct TrainConfig {
  ModelConfig model;
  double gamma = 24.0;       // margin
  int negatives = 128;       // k
  double lr = 1e-4;
  int batch_size = 128;
  double variance_weight = 0.1;  // lambda, Beta backend only
  long long max_steps = 1000;
  long long checkpoint_interval = 0;  // 0: final checkpoint only
  std::uint64_t seed = 0;
  int workers = 1;
  bool fp32_params = false;  // round parameters to float32 after each update

  void validate() const;  // ConfigError on violated bounds
};

// k entities uniformly drawn from V minus (easy ∪ hard); sampling is without
// replacement unless the complement is smaller than k.
std::vector<EntityId> sample_negatives(const KnowledgeGraph& kg, const QueryInstance& inst,
                                       int k, Rng& rng);

// -log sigmoid(gamma - dist_pos) - (1/k) sum log sigmoid(dist_neg_j - gamma)
Value qe_loss(Tape& tape, Value dist_pos, const std::vector<Value>& dist_negs, double gamma);

// qe + lambda * var for the Beta backend; the box backend rejects a nonzero
// variance term.
Value total_loss(Tape& tape, Value qe, std::optional<Value> var, double lambda, Backend backend);

// Adaptive-moment update with bias correction; state is kept per parameter
// tensor in registration order.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);
  void step(ParamStore& params, const std::vector<Tensor>& grads, double lr);
  long long steps_taken() const { return t_; }

 private:
  double beta1_, beta2_, epsilon_;
  long long t_ = 0;
  std::vector<Tensor> m_, v_;
};

struct StepRecord {
  long long step;
  double loss;
  double qe_loss;
  double var_loss;
  double lr;
};

using MetricsSink = std::function<void(const StepRecord&)>;

struct TrainResult {
  long long steps = 0;
  double final_loss = 0.0;
  std::vector<double> loss_curve;
};

struct InstanceLoss {
  Value total;
  Value qe;
  std::optional<Value> var;
};

// Builds the per-instance loss (embedding + negative sampling + margin loss,
// plus the variance loss on the answer pair for Beta) on the given tape.
InstanceLoss instance_loss(Tape& tape, const TapeBinding& binding, const Model& model,
                           const KnowledgeGraph& kg, const QueryInstance& inst,
                           const TrainConfig& cfg, Rng& rng);

// Mixed-type mini-batch training. Batches draw query types uniformly from the
// types present; each instance carries an independent PRNG stream. Workers
// split each batch into fixed partitions whose gradients are summed in
// partition order, so a run is bit-reproducible for a given worker count.
TrainResult train_loop(const KnowledgeGraph& kg, const std::vector<QueryInstance>& dataset,
                       Model& model, const TrainConfig& cfg,
                       const std::string& checkpoint_path = "",
                       const MetricsSink& sink = nullptr);

}  // namespace kgqr
