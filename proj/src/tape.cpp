#include "kgqr/tape.hpp"

#include <cmath>
#include <cstdlib>

#include "kgqr/special_math.hpp"

namespace kgqr {

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  if (x > 35.0) return x;
  if (x < -35.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

}  // namespace

int Tape::check(Value v) const {
  if (!v.valid() || v.id >= static_cast<int>(values_.size())) {
    throw ShapeMismatchError("value handle does not belong to this tape");
  }
  return v.id;
}

Value Tape::push(Op op, std::vector<int> in, Tensor out, std::vector<int> iargs,
                 std::vector<double> dargs) {
  int id = static_cast<int>(values_.size());
  values_.push_back(std::move(out));
  records_.push_back(Record{op, std::move(in), id, std::move(iargs), std::move(dargs)});
  return Value{id};
}

Value Tape::parameter(const Tensor& t) {
  Value v = push(Op::kLeaf, {}, t);
  params_.push_back(v);
  return v;
}

Value Tape::constant(const Tensor& t) { return push(Op::kLeaf, {}, t); }

double Tape::scalar_value(Value v) const {
  const Tensor& t = value(v);
  if (!t.is_scalar()) throw NonScalarRootError("expected a scalar value");
  return t.v[0];
}

Value Tape::binary(Op op, Value a, Value b) {
  const Tensor& ta = values_[check(a)];
  const Tensor& tb = values_[check(b)];
  const bool a_scalar = ta.is_scalar();
  const bool b_scalar = tb.is_scalar();
  if (!ta.same_shape(tb) && !a_scalar && !b_scalar) {
    throw ShapeMismatchError("elementwise operands differ in shape and neither is scalar");
  }
  const Tensor& shape_src = a_scalar ? tb : ta;
  Tensor out(shape_src.rows, shape_src.cols);
  const int n = out.size();
  for (int i = 0; i < n; ++i) {
    double x = a_scalar ? ta.v[0] : ta.v[i];
    double y = b_scalar ? tb.v[0] : tb.v[i];
    switch (op) {
      case Op::kAdd: out.v[i] = x + y; break;
      case Op::kSub: out.v[i] = x - y; break;
      case Op::kMul: out.v[i] = x * y; break;
      case Op::kDiv:
        if (y == 0.0) throw DomainError("division by zero");
        out.v[i] = x / y;
        break;
      default: std::abort();
    }
  }
  return push(op, {a.id, b.id}, std::move(out));
}

Value Tape::add(Value a, Value b) { return binary(Op::kAdd, a, b); }
Value Tape::sub(Value a, Value b) { return binary(Op::kSub, a, b); }
Value Tape::mul(Value a, Value b) { return binary(Op::kMul, a, b); }
Value Tape::div(Value a, Value b) { return binary(Op::kDiv, a, b); }

Value Tape::matvec(Value m, Value x) {
  const Tensor& tm = values_[check(m)];
  const Tensor& tx = values_[check(x)];
  if (tx.cols != 1 || tm.cols != tx.rows) {
    throw ShapeMismatchError("matvec expects [r x c] . [c x 1]");
  }
  Tensor out(tm.rows, 1);
  for (int r = 0; r < tm.rows; ++r) {
    double acc = 0.0;
    for (int c = 0; c < tm.cols; ++c) acc += tm.at(r, c) * tx.v[c];
    out.v[r] = acc;
  }
  return push(Op::kMatVec, {m.id, x.id}, std::move(out));
}

Value Tape::matmul(Value a, Value b) {
  const Tensor& ta = values_[check(a)];
  const Tensor& tb = values_[check(b)];
  if (ta.cols != tb.rows) throw ShapeMismatchError("matmul inner dimensions differ");
  Tensor out(ta.rows, tb.cols);
  for (int r = 0; r < ta.rows; ++r) {
    for (int k = 0; k < ta.cols; ++k) {
      double av = ta.at(r, k);
      if (av == 0.0) continue;
      for (int c = 0; c < tb.cols; ++c) out.at(r, c) += av * tb.at(k, c);
    }
  }
  return push(Op::kMatMul, {a.id, b.id}, std::move(out));
}

Value Tape::concat(const std::vector<Value>& parts) {
  if (parts.empty()) throw ShapeMismatchError("concat of zero parts");
  int total = 0;
  std::vector<int> in;
  in.reserve(parts.size());
  for (Value p : parts) {
    const Tensor& t = values_[check(p)];
    if (t.cols != 1) throw ShapeMismatchError("concat expects column vectors");
    total += t.rows;
    in.push_back(p.id);
  }
  Tensor out(total, 1);
  int at = 0;
  for (Value p : parts) {
    const Tensor& t = values_[p.id];
    for (int i = 0; i < t.rows; ++i) out.v[at++] = t.v[i];
  }
  return push(Op::kConcat, std::move(in), std::move(out));
}

Value Tape::slice(Value x, int begin, int len) {
  const Tensor& t = values_[check(x)];
  if (t.cols != 1 || begin < 0 || len < 0 || begin + len > t.rows) {
    throw ShapeMismatchError("slice out of range");
  }
  Tensor out(len, 1);
  for (int i = 0; i < len; ++i) out.v[i] = t.v[begin + i];
  return push(Op::kSlice, {x.id}, std::move(out), {begin, len});
}

Value Tape::unary(Op op, Value x, std::function<double(double)> f) {
  const Tensor& t = values_[check(x)];
  Tensor out(t.rows, t.cols);
  for (int i = 0; i < t.size(); ++i) out.v[i] = f(t.v[i]);
  return push(op, {x.id}, std::move(out));
}

Value Tape::relu(Value x) {
  return unary(Op::kRelu, x, [](double v) { return v > 0.0 ? v : 0.0; });
}

Value Tape::sigmoid(Value x) {
  return unary(Op::kSigmoid, x, [](double v) { return stable_sigmoid(v); });
}

Value Tape::softplus(Value x) {
  return unary(Op::kSoftplus, x, [](double v) { return stable_softplus(v); });
}

Value Tape::exp(Value x) {
  return unary(Op::kExp, x, [](double v) { return std::exp(v); });
}

Value Tape::log(Value x) {
  return unary(Op::kLog, x, [](double v) {
    if (v <= 0.0) throw DomainError("log of non-positive value");
    return std::log(v);
  });
}

Value Tape::sqrt(Value x) {
  return unary(Op::kSqrt, x, [](double v) {
    if (v < 0.0) throw DomainError("sqrt of negative value");
    return std::sqrt(v);
  });
}

Value Tape::abs(Value x) {
  return unary(Op::kAbs, x, [](double v) { return std::fabs(v); });
}

Value Tape::lgamma(Value x) {
  return unary(Op::kLgamma, x, [](double v) {
    if (v <= 0.0) throw DomainError("lgamma requires a positive argument");
    return log_gamma(v);
  });
}

Value Tape::digamma(Value x) {
  return unary(Op::kDigamma, x, [](double v) {
    if (v <= 0.0) throw DomainError("digamma requires a positive argument");
    return kgqr::digamma(v);
  });
}

Value Tape::posmap(Value x, double floor, double cap) {
  const Tensor& t = values_[check(x)];
  Tensor out(t.rows, t.cols);
  for (int i = 0; i < t.size(); ++i) {
    double s = stable_softplus(t.v[i]) + floor;
    out.v[i] = s < cap ? s : cap;
  }
  return push(Op::kPosMap, {x.id}, std::move(out), {}, {floor, cap});
}

Value Tape::clamp(Value x, double lo, double hi) {
  const Tensor& t = values_[check(x)];
  Tensor out(t.rows, t.cols);
  for (int i = 0; i < t.size(); ++i) {
    double v = t.v[i];
    out.v[i] = v < lo ? lo : (v > hi ? hi : v);
  }
  return push(Op::kClamp, {x.id}, std::move(out), {}, {lo, hi});
}

Value Tape::min_list(const std::vector<Value>& xs) {
  if (xs.empty()) throw ShapeMismatchError("min over zero tensors");
  const Tensor& first = values_[check(xs[0])];
  std::vector<int> in{xs[0].id};
  for (std::size_t k = 1; k < xs.size(); ++k) {
    const Tensor& t = values_[check(xs[k])];
    if (!t.same_shape(first)) throw ShapeMismatchError("min over differently shaped tensors");
    in.push_back(xs[k].id);
  }
  Tensor out = first;
  std::vector<int> argmin(static_cast<std::size_t>(first.size()), 0);
  for (std::size_t k = 1; k < xs.size(); ++k) {
    const Tensor& t = values_[xs[k].id];
    for (int i = 0; i < out.size(); ++i) {
      if (t.v[i] < out.v[i]) {  // strict: ties stay with the first input
        out.v[i] = t.v[i];
        argmin[i] = static_cast<int>(k);
      }
    }
  }
  return push(Op::kMinList, std::move(in), std::move(out), std::move(argmin));
}

Value Tape::mean_list(const std::vector<Value>& xs) {
  if (xs.empty()) throw ShapeMismatchError("mean over zero tensors");
  const Tensor& first = values_[check(xs[0])];
  std::vector<int> in;
  Tensor out(first.rows, first.cols);
  for (Value x : xs) {
    const Tensor& t = values_[check(x)];
    if (!t.same_shape(first)) throw ShapeMismatchError("mean over differently shaped tensors");
    for (int i = 0; i < out.size(); ++i) out.v[i] += t.v[i];
    in.push_back(x.id);
  }
  const double inv = 1.0 / static_cast<double>(xs.size());
  for (int i = 0; i < out.size(); ++i) out.v[i] *= inv;
  return push(Op::kMeanList, std::move(in), std::move(out));
}

Value Tape::softmax(Value x) {
  const Tensor& t = values_[check(x)];
  if (t.cols != 1) throw ShapeMismatchError("softmax expects a column vector");
  Tensor out(t.rows, 1);
  double mx = t.v[0];
  for (int i = 1; i < t.rows; ++i) mx = std::max(mx, t.v[i]);
  double z = 0.0;
  for (int i = 0; i < t.rows; ++i) {
    out.v[i] = std::exp(t.v[i] - mx);
    z += out.v[i];
  }
  for (int i = 0; i < t.rows; ++i) out.v[i] /= z;
  return push(Op::kSoftmax, {x.id}, std::move(out));
}

Value Tape::sum(Value x) {
  const Tensor& t = values_[check(x)];
  double acc = 0.0;
  for (double v : t.v) acc += v;
  return push(Op::kSum, {x.id}, Tensor::scalar(acc));
}

Value Tape::l1_norm(Value x) {
  const Tensor& t = values_[check(x)];
  double acc = 0.0;
  for (double v : t.v) acc += std::fabs(v);
  return push(Op::kL1, {x.id}, Tensor::scalar(acc));
}

Value Tape::l2_norm(Value x) {
  const Tensor& t = values_[check(x)];
  double acc = 0.0;
  for (double v : t.v) acc += v * v;
  return push(Op::kL2, {x.id}, Tensor::scalar(std::sqrt(acc)));
}

Value Tape::gather_row(Value m, int row) {
  const Tensor& t = values_[check(m)];
  if (row < 0 || row >= t.rows) throw ShapeMismatchError("gather_row out of range");
  Tensor out(t.cols, 1);
  for (int c = 0; c < t.cols; ++c) out.v[c] = t.at(row, c);
  return push(Op::kGatherRow, {m.id}, std::move(out), {row});
}

Value Tape::gather_rows(Value m, const std::vector<int>& rows) {
  const Tensor& t = values_[check(m)];
  Tensor out(static_cast<int>(rows.size()), t.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= t.rows) throw ShapeMismatchError("gather_rows out of range");
    for (int c = 0; c < t.cols; ++c) out.at(static_cast<int>(i), c) = t.at(rows[i], c);
  }
  return push(Op::kGatherRows, {m.id}, std::move(out), rows);
}

Value Tape::row_mean(Value m) {
  const Tensor& t = values_[check(m)];
  if (t.rows == 0) throw ShapeMismatchError("row_mean of an empty matrix");
  Tensor out(t.cols, 1);
  for (int r = 0; r < t.rows; ++r) {
    for (int c = 0; c < t.cols; ++c) out.v[c] += t.at(r, c);
  }
  const double inv = 1.0 / t.rows;
  for (int c = 0; c < t.cols; ++c) out.v[c] *= inv;
  return push(Op::kRowMean, {m.id}, std::move(out));
}

Value Tape::rows_mean(Value m, const std::vector<int>& rows, bool mapped, double floor,
                      double cap) {
  const Tensor& t = values_[check(m)];
  if (rows.empty()) throw ShapeMismatchError("rows_mean over zero rows");
  Tensor out(t.cols, 1);
  for (int r : rows) {
    if (r < 0 || r >= t.rows) throw ShapeMismatchError("rows_mean out of range");
    for (int c = 0; c < t.cols; ++c) {
      double x = t.at(r, c);
      if (mapped) {
        double s = stable_softplus(x) + floor;
        x = s < cap ? s : cap;
      }
      out.v[c] += x;
    }
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (int c = 0; c < t.cols; ++c) out.v[c] *= inv;
  return push(Op::kRowsMean, {m.id}, std::move(out), rows, {mapped ? 1.0 : 0.0, floor, cap});
}

void Tape::backward(Value root) {
  const Tensor& rt = values_[check(root)];
  if (!rt.is_scalar()) throw NonScalarRootError("backward root must be scalar");

  adjoints_.assign(values_.size(), Tensor());
  for (std::size_t i = 0; i < values_.size(); ++i) {
    adjoints_[i] = Tensor(values_[i].rows, values_[i].cols);
  }
  adjoints_[root.id].v[0] = 1.0;
  has_grads_ = true;

  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    const Record& rec = *it;
    const Tensor& g = adjoints_[rec.out];
    const Tensor& out = values_[rec.out];
    switch (rec.op) {
      case Op::kLeaf:
        break;
      case Op::kAdd:
      case Op::kSub:
      case Op::kMul:
      case Op::kDiv: {
        const Tensor& ta = values_[rec.in[0]];
        const Tensor& tb = values_[rec.in[1]];
        Tensor& da = adjoints_[rec.in[0]];
        Tensor& db = adjoints_[rec.in[1]];
        const bool as = ta.is_scalar() && !out.is_scalar();
        const bool bs = tb.is_scalar() && !out.is_scalar();
        for (int i = 0; i < out.size(); ++i) {
          double gi = g.v[i];
          double x = as ? ta.v[0] : ta.v[i];
          double y = bs ? tb.v[0] : tb.v[i];
          double gx = 0.0, gy = 0.0;
          switch (rec.op) {
            case Op::kAdd: gx = gi; gy = gi; break;
            case Op::kSub: gx = gi; gy = -gi; break;
            case Op::kMul: gx = gi * y; gy = gi * x; break;
            case Op::kDiv: gx = gi / y; gy = -gi * x / (y * y); break;
            default: break;
          }
          da.v[as ? 0 : i] += gx;
          db.v[bs ? 0 : i] += gy;
        }
        break;
      }
      case Op::kMatVec: {
        const Tensor& tm = values_[rec.in[0]];
        const Tensor& tx = values_[rec.in[1]];
        Tensor& dm = adjoints_[rec.in[0]];
        Tensor& dx = adjoints_[rec.in[1]];
        for (int r = 0; r < tm.rows; ++r) {
          double gr = g.v[r];
          if (gr == 0.0) continue;
          for (int c = 0; c < tm.cols; ++c) {
            dm.at(r, c) += gr * tx.v[c];
            dx.v[c] += gr * tm.at(r, c);
          }
        }
        break;
      }
      case Op::kMatMul: {
        const Tensor& ta = values_[rec.in[0]];
        const Tensor& tb = values_[rec.in[1]];
        Tensor& da = adjoints_[rec.in[0]];
        Tensor& db = adjoints_[rec.in[1]];
        for (int r = 0; r < ta.rows; ++r) {
          for (int c = 0; c < tb.cols; ++c) {
            double gv = g.at(r, c);
            if (gv == 0.0) continue;
            for (int k = 0; k < ta.cols; ++k) {
              da.at(r, k) += gv * tb.at(k, c);
              db.at(k, c) += gv * ta.at(r, k);
            }
          }
        }
        break;
      }
      case Op::kConcat: {
        int at = 0;
        for (int in_id : rec.in) {
          Tensor& d = adjoints_[in_id];
          for (int i = 0; i < d.rows; ++i) d.v[i] += g.v[at++];
        }
        break;
      }
      case Op::kSlice: {
        Tensor& dx = adjoints_[rec.in[0]];
        int begin = rec.iargs[0], len = rec.iargs[1];
        for (int i = 0; i < len; ++i) dx.v[begin + i] += g.v[i];
        break;
      }
      case Op::kRelu: {
        const Tensor& tx = values_[rec.in[0]];
        Tensor& dx = adjoints_[rec.in[0]];
        for (int i = 0; i < tx.size(); ++i) dx.v[i] += tx.v[i] > 0.0 ? g.v[i] : 0.0;
        break;
      }
      case Op::kSigmoid: {
        Tensor& dx = adjoints_[rec.in[0]];
        for (int i = 0; i < out.size(); ++i) dx.v[i] += g.v[i] * out.v[i] * (1.0 - out.v[i]);
        break;
      }
      case Op::kSoftplus: {
        const Tensor& tx = values_[rec.in[0]];
        Tensor& dx = adjoints_[rec.in[0]];
        for (int i = 0; i < tx.size(); ++i) dx.v[i] += g.v[i] * stable_sigmoid(tx.v[i]);
        break;
      }
      case Op::kExp: {
        Tensor& dx = adjoints_[rec.in[0]];
        for (int i = 0; i < out.size(); ++i) dx.v[i] += g.v[i] * out.v[i];
        break;
      }
      case Op::kLog: {
        const Tensor& tx = values_[rec.in[0]];
        Tensor& dx = adjoints_[rec.in[0]];
        for (int i = 0; i < tx.size(); ++i) dx.v[i] += g.v[i] / tx.v[i];
        break;
      }
      case Op::kSqrt: {
        Tensor& dx = adjoints_[rec.in[0]];
        for (int i = 0; i < out.size(); ++i) {
          dx.v[i] += out.v[i] > 0.0 ? g.v[i] * 0.5 / out.v[i] : 0.0;
        }
        break;
      }
      case Op::kAbs: {
        const Tensor& tx = values_[rec.in[0]];
        Tensor& dx = adjoints_[rec.in[0]];
        for (int i = 0; i < tx.size(); ++i) {
          double s = tx.v[i] > 0.0 ? 1.0 : (tx.v[i] < 0.0 ? -1.0 : 0.0);
          dx.v[i] += g.v[i] * s;
        }
        break;
      }
      case Op::kLgamma: {
        const Tensor& tx = values_[rec.in[0]];
        Tensor& dx = adjoints_[rec.in[0]];
        for (int i = 0; i < tx.size(); ++i) dx.v[i] += g.v[i] * kgqr::digamma(tx.v[i]);
        break;
      }
      case Op::kDigamma: {
        const Tensor& tx = values_[rec.in[0]];
        Tensor& dx = adjoints_[rec.in[0]];
        for (int i = 0; i < tx.size(); ++i) dx.v[i] += g.v[i] * trigamma(tx.v[i]);
        break;
      }
      case Op::kPosMap: {
        const Tensor& tx = values_[rec.in[0]];
        Tensor& dx = adjoints_[rec.in[0]];
        const double cap = rec.dargs[1];
        for (int i = 0; i < tx.size(); ++i) {
          if (out.v[i] < cap) dx.v[i] += g.v[i] * stable_sigmoid(tx.v[i]);
        }
        break;
      }
      case Op::kClamp: {
        const Tensor& tx = values_[rec.in[0]];
        Tensor& dx = adjoints_[rec.in[0]];
        const double lo = rec.dargs[0], hi = rec.dargs[1];
        for (int i = 0; i < tx.size(); ++i) {
          if (tx.v[i] >= lo && tx.v[i] <= hi) dx.v[i] += g.v[i];
        }
        break;
      }
      case Op::kMinList: {
        for (int i = 0; i < out.size(); ++i) {
          adjoints_[rec.in[rec.iargs[i]]].v[i] += g.v[i];
        }
        break;
      }
      case Op::kMeanList: {
        const double inv = 1.0 / static_cast<double>(rec.in.size());
        for (int in_id : rec.in) {
          Tensor& d = adjoints_[in_id];
          for (int i = 0; i < out.size(); ++i) d.v[i] += g.v[i] * inv;
        }
        break;
      }
      case Op::kSoftmax: {
        Tensor& dx = adjoints_[rec.in[0]];
        double dot = 0.0;
        for (int i = 0; i < out.size(); ++i) dot += g.v[i] * out.v[i];
        for (int i = 0; i < out.size(); ++i) dx.v[i] += out.v[i] * (g.v[i] - dot);
        break;
      }
      case Op::kSum: {
        Tensor& dx = adjoints_[rec.in[0]];
        for (int i = 0; i < dx.size(); ++i) dx.v[i] += g.v[0];
        break;
      }
      case Op::kL1: {
        const Tensor& tx = values_[rec.in[0]];
        Tensor& dx = adjoints_[rec.in[0]];
        for (int i = 0; i < tx.size(); ++i) {
          double s = tx.v[i] > 0.0 ? 1.0 : (tx.v[i] < 0.0 ? -1.0 : 0.0);
          dx.v[i] += g.v[0] * s;
        }
        break;
      }
      case Op::kL2: {
        const Tensor& tx = values_[rec.in[0]];
        Tensor& dx = adjoints_[rec.in[0]];
        if (out.v[0] > 0.0) {
          for (int i = 0; i < tx.size(); ++i) dx.v[i] += g.v[0] * tx.v[i] / out.v[0];
        }
        break;
      }
      case Op::kGatherRow: {
        Tensor& dm = adjoints_[rec.in[0]];
        const int row = rec.iargs[0];
        for (int c = 0; c < dm.cols; ++c) dm.at(row, c) += g.v[c];
        break;
      }
      case Op::kGatherRows: {
        Tensor& dm = adjoints_[rec.in[0]];
        for (std::size_t i = 0; i < rec.iargs.size(); ++i) {
          for (int c = 0; c < dm.cols; ++c) {
            dm.at(rec.iargs[i], c) += g.at(static_cast<int>(i), c);
          }
        }
        break;
      }
      case Op::kRowMean: {
        const Tensor& tm = values_[rec.in[0]];
        Tensor& dm = adjoints_[rec.in[0]];
        const double inv = 1.0 / tm.rows;
        for (int r = 0; r < tm.rows; ++r) {
          for (int c = 0; c < tm.cols; ++c) dm.at(r, c) += g.v[c] * inv;
        }
        break;
      }
      case Op::kRowsMean: {
        const Tensor& tm = values_[rec.in[0]];
        Tensor& dm = adjoints_[rec.in[0]];
        const bool mapped = rec.dargs[0] != 0.0;
        const double floor = rec.dargs[1], cap = rec.dargs[2];
        const double inv = 1.0 / static_cast<double>(rec.iargs.size());
        for (int r : rec.iargs) {
          for (int c = 0; c < tm.cols; ++c) {
            double dfdx = 1.0;
            if (mapped) {
              double x = tm.at(r, c);
              dfdx = stable_softplus(x) + floor < cap ? stable_sigmoid(x) : 0.0;
            }
            dm.at(r, c) += g.v[c] * inv * dfdx;
          }
        }
        break;
      }
    }
  }
}

const Tensor& Tape::grad(Value v) const {
  if (!has_grads_) throw NumericError("grad requested before backward");
  return adjoints_[check(v)];
}

std::vector<Tensor> Tape::parameter_grads() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (Value p : params_) out.push_back(grad(p));
  return out;
}

void Tape::reset() {
  values_.clear();
  records_.clear();
  params_.clear();
  adjoints_.clear();
  has_grads_ = false;
}

double grad_check(const std::function<Value(Tape&, const std::vector<Value>&)>& f,
                  const std::vector<Tensor>& point, double h) {
  Tape tape;
  std::vector<Value> params;
  params.reserve(point.size());
  for (const Tensor& t : point) params.push_back(tape.parameter(t));
  Value root = f(tape, params);
  tape.backward(root);
  std::vector<Tensor> analytic = tape.parameter_grads();

  auto eval_at = [&](std::size_t pi, int ci, double delta) {
    std::vector<Tensor> shifted = point;
    shifted[pi].v[ci] += delta;
    Tape t2;
    std::vector<Value> p2;
    p2.reserve(shifted.size());
    for (const Tensor& t : shifted) p2.push_back(t2.parameter(t));
    return t2.scalar_value(f(t2, p2));
  };

  double max_err = 0.0;
  for (std::size_t pi = 0; pi < point.size(); ++pi) {
    for (int ci = 0; ci < point[pi].size(); ++ci) {
      double numeric = (eval_at(pi, ci, h) - eval_at(pi, ci, -h)) / (2.0 * h);
      double err = std::fabs(analytic[pi].v[ci] - numeric) / std::max(1.0, std::fabs(numeric));
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

}  // namespace kgqr
