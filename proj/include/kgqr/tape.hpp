#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "kgqr/errors.hpp"

namespace kgqr {

// Dense row-major tensor, rank <= 2. Scalars are 1x1, vectors are nx1.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {}

  static Tensor zeros(int r, int c) { return Tensor(r, c); }
  static Tensor scalar(double x) {
    Tensor t(1, 1);
    t.v[0] = x;
    return t;
  }
  static Tensor vec(std::vector<double> data) {
    Tensor t;
    t.rows = static_cast<int>(data.size());
    t.cols = 1;
    t.v = std::move(data);
    return t;
  }

  int size() const { return rows * cols; }
  bool is_scalar() const { return rows == 1 && cols == 1; }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
  double& operator[](int i) { return v[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return v[static_cast<std::size_t>(i)]; }
};

// Handle to a value recorded on a Tape.
struct Value {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode differentiation record. Operations append records in forward
// order; backward() walks them exactly once in reverse, accumulating adjoints
// additively, so a value used k times receives the sum of k contributions.
// A tape is confined to one thread; independent tapes may run concurrently
// over shared read-only parameter storage (parameter() copies its input).
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaves.
  Value parameter(const Tensor& t);
  Value constant(const Tensor& t);
  Value constant_scalar(double x) { return constant(Tensor::scalar(x)); }

  // Elementwise binary ops; one side may be a 1x1 scalar (broadcast).
  Value add(Value a, Value b);
  Value sub(Value a, Value b);
  Value mul(Value a, Value b);
  Value div(Value a, Value b);

  // Linear algebra.
  Value matvec(Value m, Value x);  // [r x c] . [c x 1] -> [r x 1]
  Value matmul(Value a, Value b);  // [r x k] . [k x c] -> [r x c]

  // Shape ops (vectors).
  Value concat(const std::vector<Value>& parts);
  Value slice(Value x, int begin, int len);

  // Elementwise unary.
  Value relu(Value x);
  Value sigmoid(Value x);
  Value softplus(Value x);
  Value exp(Value x);
  Value log(Value x);
  Value sqrt(Value x);
  Value abs(Value x);
  Value lgamma(Value x);
  Value digamma(Value x);
  // min(softplus(x) + floor, cap): the positivity mapping for Beta parameters.
  Value posmap(Value x, double floor, double cap);
  Value clamp(Value x, double lo, double hi);

  // List reductions (same-shape inputs).
  Value min_list(const std::vector<Value>& xs);  // ties route grad to first input
  Value mean_list(const std::vector<Value>& xs);

  // Vector reductions.
  Value softmax(Value x);  // [n x 1] -> [n x 1]
  Value sum(Value x);      // -> scalar
  Value l1_norm(Value x);  // -> scalar
  Value l2_norm(Value x);  // -> scalar; subgradient 0 at the origin

  // Row ops on matrices.
  Value gather_row(Value m, int row);                        // -> [cols x 1]
  Value gather_rows(Value m, const std::vector<int>& rows);  // -> [k x cols]
  Value row_mean(Value m);                                   // [n x d] -> [d x 1]
  // Fused mean over gathered rows without materializing the gather; when
  // mapped, each element passes through min(softplus(x) + floor, cap) first.
  Value rows_mean(Value m, const std::vector<int>& rows, bool mapped = false,
                  double floor = 0.0, double cap = 0.0);

  const Tensor& value(Value v) const { return values_[check(v)]; }
  double scalar_value(Value v) const;

  // Gradients of root w.r.t. every registered parameter; parameters the root
  // does not reach get zero gradients of matching shape.
  void backward(Value root);
  const Tensor& grad(Value v) const;
  std::vector<Tensor> parameter_grads() const;
  const std::vector<Value>& parameters() const { return params_; }

  std::size_t num_records() const { return records_.size(); }
  void reset();

 private:
  enum class Op {
    kLeaf,
    kAdd,
    kSub,
    kMul,
    kDiv,
    kMatVec,
    kMatMul,
    kConcat,
    kSlice,
    kRelu,
    kSigmoid,
    kSoftplus,
    kExp,
    kLog,
    kSqrt,
    kAbs,
    kLgamma,
    kDigamma,
    kPosMap,
    kClamp,
    kMinList,
    kMeanList,
    kSoftmax,
    kSum,
    kL1,
    kL2,
    kGatherRow,
    kGatherRows,
    kRowMean,
    kRowsMean,
  };

  struct Record {
    Op op;
    std::vector<int> in;
    int out;
    std::vector<int> iargs;
    std::vector<double> dargs;
  };

  int check(Value v) const;
  Value push(Op op, std::vector<int> in, Tensor out, std::vector<int> iargs = {},
             std::vector<double> dargs = {});
  Value binary(Op op, Value a, Value b);
  Value unary(Op op, Value x, std::function<double(double)> f);

  // deque keeps references from value() stable while new records are pushed
  std::deque<Tensor> values_;
  std::vector<Record> records_;
  std::vector<Value> params_;
  std::deque<Tensor> adjoints_;
  bool has_grads_ = false;
};

// Max relative central-difference error over every coordinate of every
// parameter: max |analytic - numeric| / max(1, |numeric|). The callable
// builds the scalar loss on a fresh tape from the given point tensors
// (registered as parameters, in order).
double grad_check(const std::function<Value(Tape&, const std::vector<Value>&)>& f,
                  const std::vector<Tensor>& point, double h);

}  // namespace kgqr
