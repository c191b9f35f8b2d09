#include "dmfnet/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dmfnet {

const Tensor& Var::value() const {
  if (!tape) shape_error("use of an undefined Var");
  return tape->value(id);
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::input(Tensor value) {
  Node n;
  n.op = "input";
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::param(Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Var{this, it->second};
  Node n;
  n.op = "param";
  n.value = p.value();
  n.parameter = &p;
  Var v = push(std::move(n));
  param_nodes_.emplace(&p, v.id);
  return v;
}

Var Tape::record(const char* op, std::vector<Var> inputs, Tensor output, ForwardFn forward,
                 BackwardFn backward) {
  Node n;
  n.op = op;
  n.inputs.reserve(inputs.size());
  for (const Var& v : inputs) {
    if (v.tape != this) shape_error(std::string(op) + ": inputs recorded on different tapes");
    n.inputs.push_back(v.id);
  }
  n.value = std::move(output);
  if (grad_enabled_) {
    n.forward = std::move(forward);
    n.backward = std::move(backward);
  }
  return push(std::move(n));
}

void Tape::backward(Var loss) {
  if (loss.tape != this) shape_error("backward: loss recorded on a different tape");
  if (!grad_enabled_) shape_error("backward: tape was created without gradient recording");
  const Tensor& lv = value(loss.id);
  if (lv.size() != 1)
    shape_error("backward: loss must be scalar, got shape " + lv.shape_str());

  std::vector<Tensor> grads(static_cast<size_t>(loss.id) + 1);
  auto ensure = [&](int id) -> Tensor& {
    Tensor& g = grads[static_cast<size_t>(id)];
    if (g.size() == 0) g = Tensor::zeros(nodes_[static_cast<size_t>(id)].value.shape());
    return g;
  };
  ensure(loss.id)[0] = 1.0;

  std::vector<const Tensor*> in_values;
  std::vector<Tensor*> in_grads;
  for (int i = loss.id; i >= 0; --i) {
    const Node& node = nodes_[static_cast<size_t>(i)];
    const Tensor& gout = grads[static_cast<size_t>(i)];
    if (gout.size() == 0) continue;  // not reachable from the loss
    if (node.backward) {
      in_values.clear();
      in_grads.clear();
      for (int in : node.inputs) {
        in_values.push_back(&nodes_[static_cast<size_t>(in)].value);
        in_grads.push_back(&ensure(in));
      }
      node.backward(in_values, node.value, gout, in_grads);
    }
    if (node.parameter) {
      Tensor& pg = node.parameter->grad();
      const double* g = gout.data();
      double* dst = pg.data();
      for (int64_t k = 0; k < gout.size(); ++k) dst[k] += g[k];
    }
  }
}

bool Tape::replay_matches() const {
  std::vector<Tensor> replayed(nodes_.size());
  std::vector<const Tensor*> ins;
  for (size_t i = 0; i < nodes_.size(); ++i) {
    const Node& node = nodes_[i];
    if (!node.forward) {
      replayed[i] = node.value;  // leaf
      continue;
    }
    ins.clear();
    for (int in : node.inputs) ins.push_back(&replayed[static_cast<size_t>(in)]);
    replayed[i] = node.forward(ins);
    if (!replayed[i].bit_equal(node.value)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// helpers
// ---------------------------------------------------------------------------

namespace {

Tape* tape_of(const char* op, std::initializer_list<Var> vars) {
  Tape* t = nullptr;
  for (const Var& v : vars) {
    if (!v.defined()) shape_error(std::string(op) + ": undefined input");
    if (!t) t = v.tape;
    if (v.tape != t) shape_error(std::string(op) + ": inputs from different tapes");
  }
  return t;
}

// Decompose a shape around `axis` into (outer, n, inner) extents.
struct AxisSplit {
  int64_t outer, n, inner;
};

AxisSplit split_axis(const std::vector<int64_t>& shape, int axis, const char* op) {
  if (axis < 0 || axis >= static_cast<int>(shape.size()))
    shape_error(std::string(op) + ": axis " + std::to_string(axis) + " out of range for shape " +
                shape_to_string(shape));
  AxisSplit s{1, shape[static_cast<size_t>(axis)], 1};
  for (int i = 0; i < axis; ++i) s.outer *= shape[static_cast<size_t>(i)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Tensor matmul_fwd(const Tensor& a, const Tensor& b) {
  const int64_t m = a.dim(0), kk = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  const double* A = a.data();
  const double* B = b.data();
  double* C = out.data();
  for (int64_t i = 0; i < m; ++i) {
    double* Crow = C + i * n;
    for (int64_t k = 0; k < kk; ++k) {
      const double aik = A[i * kk + k];
      const double* Brow = B + k * n;
      for (int64_t j = 0; j < n; ++j) Crow[j] += aik * Brow[j];
    }
  }
  return out;
}

Tensor linear_fwd(const Tensor& x, const Tensor& w, const Tensor* b) {
  const int64_t cin = w.dim(0), cout = w.dim(1);
  const int64_t rows = x.size() / cin;
  std::vector<int64_t> out_shape = x.shape();
  out_shape.back() = cout;
  Tensor out(std::move(out_shape));
  const double* X = x.data();
  const double* W = w.data();
  double* Y = out.data();
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = X + r * cin;
    double* yr = Y + r * cout;
    if (b) {
      const double* bv = b->data();
      for (int64_t j = 0; j < cout; ++j) yr[j] = bv[j];
    }
    for (int64_t k = 0; k < cin; ++k) {
      const double xk = xr[k];
      const double* wrow = W + k * cout;
      for (int64_t j = 0; j < cout; ++j) yr[j] += xk * wrow[j];
    }
  }
  return out;
}

Tensor softmax_fwd(const Tensor& x) {
  const int64_t n = x.shape().back();
  const int64_t rows = x.size() / n;
  Tensor out(x.shape());
  const double* X = x.data();
  double* Y = out.data();
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = X + r * n;
    double* yr = Y + r * n;
    double m = xr[0];
    for (int64_t j = 1; j < n; ++j)
      if (xr[j] > m) m = xr[j];
    double s = 0.0;
    for (int64_t j = 0; j < n; ++j) {
      yr[j] = std::exp(xr[j] - m);
      s += yr[j];
    }
    const double inv = 1.0 / s;
    for (int64_t j = 0; j < n; ++j) yr[j] *= inv;
  }
  return out;
}

constexpr double kLayerNormEps = 1e-5;

Tensor layer_norm_fwd(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  const int64_t n = x.shape().back();
  const int64_t rows = x.size() / n;
  Tensor out(x.shape());
  const double* X = x.data();
  const double* G = gain.data();
  const double* B = bias.data();
  double* Y = out.data();
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = X + r * n;
    double* yr = Y + r * n;
    double mean = 0.0;
    for (int64_t j = 0; j < n; ++j) mean += xr[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (int64_t j = 0; j < n; ++j) {
      const double d = xr[j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    for (int64_t j = 0; j < n; ++j) yr[j] = (xr[j] - mean) * inv * G[j] + B[j];
  }
  return out;
}

Tensor conv2d_fwd(const Tensor& x, const Tensor& k, int stride) {
  const int64_t h = x.dim(0), w = x.dim(1), ci = x.dim(2);
  const int64_t kh = k.dim(0), kw = k.dim(1), co = k.dim(3);
  const int64_t ph = (kh - 1) / 2, pw = (kw - 1) / 2;
  const int64_t oh = (h + 2 * ph - kh) / stride + 1;
  const int64_t ow = (w + 2 * pw - kw) / stride + 1;
  Tensor out({oh, ow, co});
  for (int64_t oy = 0; oy < oh; ++oy)
    for (int64_t ox = 0; ox < ow; ++ox) {
      double* orow = out.data() + (oy * ow + ox) * co;
      for (int64_t ky = 0; ky < kh; ++ky) {
        const int64_t iy = oy * stride - ph + ky;
        if (iy < 0 || iy >= h) continue;
        for (int64_t kx = 0; kx < kw; ++kx) {
          const int64_t ix = ox * stride - pw + kx;
          if (ix < 0 || ix >= w) continue;
          const double* xrow = x.data() + (iy * w + ix) * ci;
          const double* krow = k.data() + (ky * kw + kx) * ci * co;
          for (int64_t c = 0; c < ci; ++c) {
            const double xv = xrow[c];
            const double* kc = krow + c * co;
            for (int64_t o = 0; o < co; ++o) orow[o] += xv * kc[o];
          }
        }
      }
    }
  return out;
}

Tensor transpose_conv1d_fwd(const Tensor& x, int ratio, const Tensor& w) {
  const int64_t n = x.dim(0), ci = x.dim(1), co = w.dim(2);
  Tensor out({n * ratio, co});
  for (int64_t i = 0; i < n; ++i) {
    const double* xr = x.data() + i * ci;
    for (int64_t j = 0; j < ratio; ++j) {
      double* yr = out.data() + (i * ratio + j) * co;
      for (int64_t c = 0; c < ci; ++c) {
        const double xv = xr[c];
        const double* wr = w.data() + (c * ratio + j) * co;
        for (int64_t o = 0; o < co; ++o) yr[o] += xv * wr[o];
      }
    }
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// primitives
// ---------------------------------------------------------------------------

Var matmul(Var a, Var b) {
  Tape* t = tape_of("matmul", {a, b});
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0))
    shape_error("matmul: inner dimensions disagree: " + av.shape_str() + " vs " + bv.shape_str());
  Tensor out = matmul_fwd(av, bv);
  return t->record(
      "matmul", {a, b}, std::move(out),
      [](const std::vector<const Tensor*>& in) { return matmul_fwd(*in[0], *in[1]); },
      [](const std::vector<const Tensor*>& in, const Tensor&, const Tensor& g,
         const std::vector<Tensor*>& gin) {
        const Tensor& A = *in[0];
        const Tensor& B = *in[1];
        const int64_t m = A.dim(0), kk = A.dim(1), n = B.dim(1);
        double* dA = gin[0]->data();
        double* dB = gin[1]->data();
        const double* G = g.data();
        // dA = g . B^T
        for (int64_t i = 0; i < m; ++i)
          for (int64_t k = 0; k < kk; ++k) {
            double s = 0.0;
            const double* Grow = G + i * n;
            const double* Brow = B.data() + k * n;
            for (int64_t j = 0; j < n; ++j) s += Grow[j] * Brow[j];
            dA[i * kk + k] += s;
          }
        // dB = A^T . g
        for (int64_t i = 0; i < m; ++i) {
          const double* Arow = A.data() + i * kk;
          const double* Grow = G + i * n;
          for (int64_t k = 0; k < kk; ++k) {
            const double aik = Arow[k];
            double* dBrow = dB + k * n;
            for (int64_t j = 0; j < n; ++j) dBrow[j] += aik * Grow[j];
          }
        }
      });
}

Var transpose2d(Var x) {
  Tape* t = tape_of("transpose2d", {x});
  const Tensor& xv = x.value();
  if (xv.rank() != 2) shape_error("transpose2d: expects a matrix, got " + xv.shape_str());
  auto fwd = [](const std::vector<const Tensor*>& in) {
    const Tensor& v = *in[0];
    Tensor out({v.dim(1), v.dim(0)});
    for (int64_t i = 0; i < v.dim(0); ++i)
      for (int64_t j = 0; j < v.dim(1); ++j) out.at(j, i) = v.at(i, j);
    return out;
  };
  Tensor out = fwd({&xv});
  return t->record("transpose2d", {x}, std::move(out), fwd,
                   [](const std::vector<const Tensor*>& in, const Tensor&, const Tensor& g,
                      const std::vector<Tensor*>& gin) {
                     const int64_t m = in[0]->dim(0), n = in[0]->dim(1);
                     for (int64_t i = 0; i < m; ++i)
                       for (int64_t j = 0; j < n; ++j) gin[0]->at(i, j) += g.at(j, i);
                   });
}

static Var linear_impl(const char* op, Var x, Var w, Var* b) {
  Tape* t = b ? tape_of(op, {x, w, *b}) : tape_of(op, {x, w});
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  if (wv.rank() != 2 || xv.shape().back() != wv.dim(0))
    shape_error(std::string(op) + ": input " + xv.shape_str() + " incompatible with weights " +
                wv.shape_str());
  if (b && (b->value().rank() != 1 || b->value().dim(0) != wv.dim(1)))
    shape_error(std::string(op) + ": bias " + b->value().shape_str() +
                " incompatible with weights " + wv.shape_str());
  const bool with_bias = b != nullptr;
  auto fwd = [with_bias](const std::vector<const Tensor*>& in) {
    return linear_fwd(*in[0], *in[1], with_bias ? in[2] : nullptr);
  };
  std::vector<Var> ins = {x, w};
  if (b) ins.push_back(*b);
  std::vector<const Tensor*> vals = {&xv, &wv};
  if (b) vals.push_back(&b->value());
  Tensor out = fwd(vals);
  return t->record(op, std::move(ins), std::move(out), fwd,
                   [with_bias](const std::vector<const Tensor*>& in, const Tensor&,
                               const Tensor& g, const std::vector<Tensor*>& gin) {
                     const Tensor& X = *in[0];
                     const Tensor& W = *in[1];
                     const int64_t cin = W.dim(0), cout = W.dim(1);
                     const int64_t rows = X.size() / cin;
                     double* dX = gin[0]->data();
                     double* dW = gin[1]->data();
                     const double* G = g.data();
                     for (int64_t r = 0; r < rows; ++r) {
                       const double* gr = G + r * cout;
                       const double* xr = X.data() + r * cin;
                       double* dxr = dX + r * cin;
                       for (int64_t k = 0; k < cin; ++k) {
                         const double* wrow = W.data() + k * cout;
                         double* dwrow = dW + k * cout;
                         double s = 0.0;
                         const double xk = xr[k];
                         for (int64_t j = 0; j < cout; ++j) {
                           s += gr[j] * wrow[j];
                           dwrow[j] += xk * gr[j];
                         }
                         dxr[k] += s;
                       }
                     }
                     if (with_bias) {
                       double* dB = gin[2]->data();
                       for (int64_t r = 0; r < rows; ++r) {
                         const double* gr = G + r * cout;
                         for (int64_t j = 0; j < cout; ++j) dB[j] += gr[j];
                       }
                     }
                   });
}

Var linear(Var x, Var w, Var b) { return linear_impl("linear", x, w, &b); }
Var linear_nobias(Var x, Var w) { return linear_impl("linear_nobias", x, w, nullptr); }

Var relu(Var x) {
  Tape* t = tape_of("relu", {x});
  auto fwd = [](const std::vector<const Tensor*>& in) {
    Tensor out(in[0]->shape());
    for (int64_t i = 0; i < in[0]->size(); ++i) out[i] = (*in[0])[i] > 0.0 ? (*in[0])[i] : 0.0;
    return out;
  };
  Tensor out = fwd({&x.value()});
  return t->record("relu", {x}, std::move(out), fwd,
                   [](const std::vector<const Tensor*>& in, const Tensor&, const Tensor& g,
                      const std::vector<Tensor*>& gin) {
                     for (int64_t i = 0; i < g.size(); ++i)
                       if ((*in[0])[i] > 0.0) (*gin[0])[i] += g[i];
                   });
}

Var tanh(Var x) {
  Tape* t = tape_of("tanh", {x});
  auto fwd = [](const std::vector<const Tensor*>& in) {
    Tensor out(in[0]->shape());
    for (int64_t i = 0; i < in[0]->size(); ++i) out[i] = std::tanh((*in[0])[i]);
    return out;
  };
  Tensor out = fwd({&x.value()});
  return t->record("tanh", {x}, std::move(out), fwd,
                   [](const std::vector<const Tensor*>&, const Tensor& y, const Tensor& g,
                      const std::vector<Tensor*>& gin) {
                     for (int64_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i] * (1.0 - y[i] * y[i]);
                   });
}

Var softmax_last(Var x) {
  Tape* t = tape_of("softmax_last", {x});
  const Tensor& xv = x.value();
  if (xv.rank() < 1 || xv.shape().back() < 1)
    shape_error("softmax_last: needs a non-empty last axis, got " + xv.shape_str());
  auto fwd = [](const std::vector<const Tensor*>& in) { return softmax_fwd(*in[0]); };
  Tensor out = fwd({&xv});
  return t->record("softmax_last", {x}, std::move(out), fwd,
                   [](const std::vector<const Tensor*>&, const Tensor& y, const Tensor& g,
                      const std::vector<Tensor*>& gin) {
                     const int64_t n = y.shape().back();
                     const int64_t rows = y.size() / n;
                     for (int64_t r = 0; r < rows; ++r) {
                       const double* yr = y.data() + r * n;
                       const double* gr = g.data() + r * n;
                       double dot = 0.0;
                       for (int64_t j = 0; j < n; ++j) dot += yr[j] * gr[j];
                       double* dx = gin[0]->data() + r * n;
                       for (int64_t j = 0; j < n; ++j) dx[j] += yr[j] * (gr[j] - dot);
                     }
                   });
}

Var layer_norm(Var x, Var gain, Var bias) {
  Tape* t = tape_of("layer_norm", {x, gain, bias});
  const Tensor& xv = x.value();
  const int64_t n = xv.shape().back();
  if (gain.value().size() != n || bias.value().size() != n)
    shape_error("layer_norm: gain/bias length must match last axis " + std::to_string(n));
  auto fwd = [](const std::vector<const Tensor*>& in) {
    return layer_norm_fwd(*in[0], *in[1], *in[2]);
  };
  Tensor out = fwd({&xv, &gain.value(), &bias.value()});
  return t->record(
      "layer_norm", {x, gain, bias}, std::move(out), fwd,
      [](const std::vector<const Tensor*>& in, const Tensor&, const Tensor& g,
         const std::vector<Tensor*>& gin) {
        const Tensor& X = *in[0];
        const Tensor& G = *in[1];
        const int64_t n = X.shape().back();
        const int64_t rows = X.size() / n;
        for (int64_t r = 0; r < rows; ++r) {
          const double* xr = X.data() + r * n;
          const double* gr = g.data() + r * n;
          double mean = 0.0;
          for (int64_t j = 0; j < n; ++j) mean += xr[j];
          mean /= static_cast<double>(n);
          double var = 0.0;
          for (int64_t j = 0; j < n; ++j) {
            const double d = xr[j] - mean;
            var += d * d;
          }
          var /= static_cast<double>(n);
          const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
          // ghat = g * gain; dx = (ghat - mean(ghat) - xhat * mean(ghat*xhat)) / s
          double mg = 0.0, mgx = 0.0;
          for (int64_t j = 0; j < n; ++j) {
            const double gh = gr[j] * G[j];
            const double xh = (xr[j] - mean) * inv;
            mg += gh;
            mgx += gh * xh;
          }
          mg /= static_cast<double>(n);
          mgx /= static_cast<double>(n);
          double* dx = gin[0]->data() + r * n;
          double* dgain = gin[1]->data();
          double* dbias = gin[2]->data();
          for (int64_t j = 0; j < n; ++j) {
            const double xh = (xr[j] - mean) * inv;
            const double gh = gr[j] * G[j];
            dx[j] += (gh - mg - xh * mgx) * inv;
            dgain[j] += gr[j] * xh;
            dbias[j] += gr[j];
          }
        }
      });
}

Var concat(const std::vector<Var>& xs, int axis) {
  if (xs.empty()) shape_error("concat: needs at least one input");
  Tape* t = xs[0].tape;
  for (const Var& v : xs)
    if (v.tape != t) shape_error("concat: inputs from different tapes");
  const int rank = xs[0].value().rank();
  std::vector<int64_t> out_shape = xs[0].value().shape();
  for (size_t i = 1; i < xs.size(); ++i) {
    const auto& s = xs[i].value().shape();
    if (static_cast<int>(s.size()) != rank)
      shape_error("concat: rank mismatch " + xs[i].value().shape_str() + " vs " +
                  xs[0].value().shape_str());
    for (int d = 0; d < rank; ++d) {
      if (d == axis) continue;
      if (s[static_cast<size_t>(d)] != out_shape[static_cast<size_t>(d)])
        shape_error("concat: shapes disagree off the concat axis: " +
                    xs[0].value().shape_str() + " vs " + xs[i].value().shape_str());
    }
    out_shape[static_cast<size_t>(axis)] += s[static_cast<size_t>(axis)];
  }
  split_axis(out_shape, axis, "concat");  // validates axis range

  const int ax = axis;
  auto fwd = [ax, out_shape](const std::vector<const Tensor*>& in) {
    Tensor out(out_shape);
    const AxisSplit os = split_axis(out_shape, ax, "concat");
    int64_t offset = 0;
    for (const Tensor* src : in) {
      const AxisSplit ss = split_axis(src->shape(), ax, "concat");
      for (int64_t o = 0; o < ss.outer; ++o) {
        const double* s = src->data() + o * ss.n * ss.inner;
        double* d = out.data() + (o * os.n + offset) * os.inner;
        for (int64_t j = 0; j < ss.n * ss.inner; ++j) d[j] = s[j];
      }
      offset += ss.n;
    }
    return out;
  };

  std::vector<const Tensor*> vals;
  for (const Var& v : xs) vals.push_back(&v.value());
  Tensor out = fwd(vals);
  return t->record("concat", xs, std::move(out), fwd,
                   [ax](const std::vector<const Tensor*>& in, const Tensor& y, const Tensor& g,
                        const std::vector<Tensor*>& gin) {
                     const AxisSplit os = split_axis(y.shape(), ax, "concat");
                     int64_t offset = 0;
                     for (size_t i = 0; i < in.size(); ++i) {
                       const AxisSplit ss = split_axis(in[i]->shape(), ax, "concat");
                       for (int64_t o = 0; o < ss.outer; ++o) {
                         const double* gs = g.data() + (o * os.n + offset) * os.inner;
                         double* d = gin[i]->data() + o * ss.n * ss.inner;
                         for (int64_t j = 0; j < ss.n * ss.inner; ++j) d[j] += gs[j];
                       }
                       offset += ss.n;
                     }
                   });
}

Var slice_last(Var x, int64_t start, int64_t len) {
  Tape* t = tape_of("slice_last", {x});
  const Tensor& xv = x.value();
  const int64_t n = xv.shape().back();
  if (start < 0 || len < 1 || start + len > n)
    shape_error("slice_last: range [" + std::to_string(start) + ", " +
                std::to_string(start + len) + ") out of bounds for last axis " + std::to_string(n));
  auto fwd = [start, len](const std::vector<const Tensor*>& in) {
    const Tensor& v = *in[0];
    const int64_t n = v.shape().back();
    const int64_t rows = v.size() / n;
    std::vector<int64_t> shape = v.shape();
    shape.back() = len;
    Tensor out(std::move(shape));
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t j = 0; j < len; ++j) out[r * len + j] = v[r * n + start + j];
    return out;
  };
  Tensor out = fwd({&xv});
  return t->record("slice_last", {x}, std::move(out), fwd,
                   [start, len](const std::vector<const Tensor*>& in, const Tensor&,
                                const Tensor& g, const std::vector<Tensor*>& gin) {
                     const int64_t n = in[0]->shape().back();
                     const int64_t rows = in[0]->size() / n;
                     for (int64_t r = 0; r < rows; ++r)
                       for (int64_t j = 0; j < len; ++j)
                         (*gin[0])[r * n + start + j] += g[r * len + j];
                   });
}

std::pair<Var, IndexArray> max_over_axis(Var x, int axis) {
  Tape* t = tape_of("max_over_axis", {x});
  const Tensor& xv = x.value();
  const AxisSplit s = split_axis(xv.shape(), axis, "max_over_axis");
  if (s.n < 1) shape_error("max_over_axis: empty axis");

  std::vector<int64_t> out_shape;
  for (int d = 0; d < xv.rank(); ++d)
    if (d != axis) out_shape.push_back(xv.dim(d));
  if (out_shape.empty()) out_shape.push_back(1);

  IndexArray argmax(out_shape);
  Tensor out(out_shape);
  for (int64_t o = 0; o < s.outer; ++o)
    for (int64_t in = 0; in < s.inner; ++in) {
      int64_t best = 0;
      double bv = xv[o * s.n * s.inner + in];
      for (int64_t j = 1; j < s.n; ++j) {
        const double v = xv[(o * s.n + j) * s.inner + in];
        if (v > bv) {
          bv = v;
          best = j;
        }
      }
      out[o * s.inner + in] = bv;
      argmax[o * s.inner + in] = best;
    }

  const int ax = axis;
  auto fwd = [ax](const std::vector<const Tensor*>& in) {
    const Tensor& v = *in[0];
    const AxisSplit s = split_axis(v.shape(), ax, "max_over_axis");
    std::vector<int64_t> out_shape;
    for (int d = 0; d < v.rank(); ++d)
      if (d != ax) out_shape.push_back(v.dim(d));
    if (out_shape.empty()) out_shape.push_back(1);
    Tensor out(out_shape);
    for (int64_t o = 0; o < s.outer; ++o)
      for (int64_t in_i = 0; in_i < s.inner; ++in_i) {
        double bv = v[o * s.n * s.inner + in_i];
        for (int64_t j = 1; j < s.n; ++j) {
          const double x = v[(o * s.n + j) * s.inner + in_i];
          if (x > bv) bv = x;
        }
        out[o * s.inner + in_i] = bv;
      }
    return out;
  };

  IndexArray saved = argmax;
  Var res = t->record("max_over_axis", {x}, std::move(out), fwd,
                      [ax, saved](const std::vector<const Tensor*>& in, const Tensor&,
                                  const Tensor& g, const std::vector<Tensor*>& gin) {
                        const AxisSplit s = split_axis(in[0]->shape(), ax, "max_over_axis");
                        for (int64_t o = 0; o < s.outer; ++o)
                          for (int64_t in_i = 0; in_i < s.inner; ++in_i) {
                            const int64_t j = saved[o * s.inner + in_i];
                            (*gin[0])[(o * s.n + j) * s.inner + in_i] += g[o * s.inner + in_i];
                          }
                      });
  return {res, std::move(argmax)};
}

Var mean_over_axis(Var x, int axis) {
  Tape* t = tape_of("mean_over_axis", {x});
  const Tensor& xv = x.value();
  const AxisSplit sp = split_axis(xv.shape(), axis, "mean_over_axis");
  const int ax = axis;
  auto fwd = [ax](const std::vector<const Tensor*>& in) {
    const Tensor& v = *in[0];
    const AxisSplit s = split_axis(v.shape(), ax, "mean_over_axis");
    std::vector<int64_t> out_shape;
    for (int d = 0; d < v.rank(); ++d)
      if (d != ax) out_shape.push_back(v.dim(d));
    if (out_shape.empty()) out_shape.push_back(1);
    Tensor out(out_shape);
    const double inv = 1.0 / static_cast<double>(s.n);
    for (int64_t o = 0; o < s.outer; ++o)
      for (int64_t in_i = 0; in_i < s.inner; ++in_i) {
        double acc = 0.0;
        for (int64_t j = 0; j < s.n; ++j) acc += v[(o * s.n + j) * s.inner + in_i];
        out[o * s.inner + in_i] = acc * inv;
      }
    return out;
  };
  (void)sp;
  Tensor out = fwd({&xv});
  return t->record("mean_over_axis", {x}, std::move(out), fwd,
                   [ax](const std::vector<const Tensor*>& in, const Tensor&, const Tensor& g,
                        const std::vector<Tensor*>& gin) {
                     const AxisSplit s = split_axis(in[0]->shape(), ax, "mean_over_axis");
                     const double inv = 1.0 / static_cast<double>(s.n);
                     for (int64_t o = 0; o < s.outer; ++o)
                       for (int64_t in_i = 0; in_i < s.inner; ++in_i) {
                         const double gv = g[o * s.inner + in_i] * inv;
                         for (int64_t j = 0; j < s.n; ++j)
                           (*gin[0])[(o * s.n + j) * s.inner + in_i] += gv;
                       }
                   });
}

Var sum_all(Var x) {
  Tape* t = tape_of("sum_all", {x});
  auto fwd = [](const std::vector<const Tensor*>& in) {
    double acc = 0.0;
    for (int64_t i = 0; i < in[0]->size(); ++i) acc += (*in[0])[i];
    return Tensor::scalar(acc);
  };
  Tensor out = fwd({&x.value()});
  return t->record("sum_all", {x}, std::move(out), fwd,
                   [](const std::vector<const Tensor*>&, const Tensor&, const Tensor& g,
                      const std::vector<Tensor*>& gin) {
                     for (int64_t i = 0; i < gin[0]->size(); ++i) (*gin[0])[i] += g[0];
                   });
}

namespace {
Var elementwise_binary(const char* op, Var a, Var b, double (*f)(double, double),
                       void (*df)(double, double, double, double&, double&)) {
  Tape* t = tape_of(op, {a, b});
  if (!a.value().same_shape(b.value()))
    shape_error(std::string(op) + ": shape mismatch " + a.value().shape_str() + " vs " +
                b.value().shape_str());
  auto fwd = [f](const std::vector<const Tensor*>& in) {
    Tensor out(in[0]->shape());
    for (int64_t i = 0; i < out.size(); ++i) out[i] = f((*in[0])[i], (*in[1])[i]);
    return out;
  };
  Tensor out = fwd({&a.value(), &b.value()});
  return t->record(op, {a, b}, std::move(out), fwd,
                   [df](const std::vector<const Tensor*>& in, const Tensor&, const Tensor& g,
                        const std::vector<Tensor*>& gin) {
                     for (int64_t i = 0; i < g.size(); ++i) {
                       double da = 0.0, db = 0.0;
                       df((*in[0])[i], (*in[1])[i], g[i], da, db);
                       (*gin[0])[i] += da;
                       (*gin[1])[i] += db;
                     }
                   });
}
}  // namespace

Var add(Var a, Var b) {
  return elementwise_binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double g, double& da, double& db) {
        da = g;
        db = g;
      });
}

Var sub(Var a, Var b) {
  return elementwise_binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double g, double& da, double& db) {
        da = g;
        db = -g;
      });
}

Var mul(Var a, Var b) {
  return elementwise_binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double x, double y, double g, double& da, double& db) {
        da = g * y;
        db = g * x;
      });
}

Var row_scale(Var x, Var s) {
  Tape* t = tape_of("row_scale", {x, s});
  const Tensor& xv = x.value();
  const Tensor& sv = s.value();
  if (xv.rank() != 2 || sv.rank() != 2 || sv.dim(1) != 1 || sv.dim(0) != xv.dim(0))
    shape_error("row_scale: expects x [n x c] and s [n x 1], got " + xv.shape_str() + " and " +
                sv.shape_str());
  auto fwd = [](const std::vector<const Tensor*>& in) {
    const Tensor& X = *in[0];
    const Tensor& S = *in[1];
    Tensor out(X.shape());
    const int64_t n = X.dim(0), c = X.dim(1);
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < c; ++j) out.at(i, j) = X.at(i, j) * S[i];
    return out;
  };
  Tensor out = fwd({&xv, &sv});
  return t->record("row_scale", {x, s}, std::move(out), fwd,
                   [](const std::vector<const Tensor*>& in, const Tensor&, const Tensor& g,
                      const std::vector<Tensor*>& gin) {
                     const Tensor& X = *in[0];
                     const Tensor& S = *in[1];
                     const int64_t n = X.dim(0), c = X.dim(1);
                     for (int64_t i = 0; i < n; ++i) {
                       double ds = 0.0;
                       for (int64_t j = 0; j < c; ++j) {
                         gin[0]->at(i, j) += g.at(i, j) * S[i];
                         ds += g.at(i, j) * X.at(i, j);
                       }
                       (*gin[1])[i] += ds;
                     }
                   });
}

Var scalar_mul(Var x, double c) {
  Tape* t = tape_of("scalar_mul", {x});
  auto fwd = [c](const std::vector<const Tensor*>& in) {
    Tensor out(in[0]->shape());
    for (int64_t i = 0; i < out.size(); ++i) out[i] = (*in[0])[i] * c;
    return out;
  };
  Tensor out = fwd({&x.value()});
  return t->record("scalar_mul", {x}, std::move(out), fwd,
                   [c](const std::vector<const Tensor*>&, const Tensor&, const Tensor& g,
                       const std::vector<Tensor*>& gin) {
                     for (int64_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i] * c;
                   });
}

Var reshape(Var x, std::vector<int64_t> shape) {
  Tape* t = tape_of("reshape", {x});
  if (shape_product(shape) != x.value().size())
    shape_error("reshape: size mismatch " + x.value().shape_str() + " -> " +
                shape_to_string(shape));
  auto fwd = [shape](const std::vector<const Tensor*>& in) { return Tensor(shape, in[0]->vec()); };
  Tensor out = fwd({&x.value()});
  return t->record("reshape", {x}, std::move(out), fwd,
                   [](const std::vector<const Tensor*>&, const Tensor&, const Tensor& g,
                      const std::vector<Tensor*>& gin) {
                     for (int64_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i];
                   });
}

Var gather_rows(Var values, const IndexArray& idx) {
  Tape* t = tape_of("gather_rows", {values});
  const Tensor& v = values.value();
  if (v.rank() != 2) shape_error("gather_rows: values must be [n x c], got " + v.shape_str());
  const int64_t n = v.dim(0);
  for (int64_t i = 0; i < idx.size(); ++i)
    if (idx[i] < 0 || idx[i] >= n)
      shape_error("gather_rows: index " + std::to_string(idx[i]) + " out of range [0, " +
                  std::to_string(n) + ")");
  IndexArray saved = idx;
  auto fwd = [saved](const std::vector<const Tensor*>& in) {
    const Tensor& src = *in[0];
    const int64_t c = src.dim(1);
    std::vector<int64_t> out_shape = saved.shape();
    out_shape.push_back(c);
    Tensor out(std::move(out_shape));
    for (int64_t i = 0; i < saved.size(); ++i) {
      const double* s = src.data() + saved[i] * c;
      double* d = out.data() + i * c;
      for (int64_t j = 0; j < c; ++j) d[j] = s[j];
    }
    return out;
  };
  Tensor out = fwd({&v});
  return t->record("gather_rows", {values}, std::move(out), fwd,
                   [saved](const std::vector<const Tensor*>& in, const Tensor&, const Tensor& g,
                           const std::vector<Tensor*>& gin) {
                     const int64_t c = in[0]->dim(1);
                     for (int64_t i = 0; i < saved.size(); ++i) {
                       const double* gs = g.data() + i * c;
                       double* d = gin[0]->data() + saved[i] * c;
                       for (int64_t j = 0; j < c; ++j) d[j] += gs[j];
                     }
                   });
}

Var conv2d(Var x, Var kernels, int stride) {
  Tape* t = tape_of("conv2d", {x, kernels});
  const Tensor& xv = x.value();
  const Tensor& kv = kernels.value();
  if (xv.rank() != 3 || kv.rank() != 4 || xv.dim(2) != kv.dim(2))
    shape_error("conv2d: input " + xv.shape_str() + " incompatible with kernels " +
                kv.shape_str());
  if (stride < 1) shape_error("conv2d: stride must be >= 1");
  if (xv.dim(0) < kv.dim(0) || xv.dim(1) < kv.dim(1))
    shape_error("conv2d: spatial dims " + xv.shape_str() + " smaller than kernel " +
                kv.shape_str());
  auto fwd = [stride](const std::vector<const Tensor*>& in) {
    return conv2d_fwd(*in[0], *in[1], stride);
  };
  Tensor out = fwd({&xv, &kv});
  return t->record(
      "conv2d", {x, kernels}, std::move(out), fwd,
      [stride](const std::vector<const Tensor*>& in, const Tensor& y, const Tensor& g,
               const std::vector<Tensor*>& gin) {
        const Tensor& X = *in[0];
        const Tensor& K = *in[1];
        const int64_t h = X.dim(0), w = X.dim(1), ci = X.dim(2);
        const int64_t kh = K.dim(0), kw = K.dim(1), co = K.dim(3);
        const int64_t ph = (kh - 1) / 2, pw = (kw - 1) / 2;
        const int64_t oh = y.dim(0), ow = y.dim(1);
        for (int64_t oy = 0; oy < oh; ++oy)
          for (int64_t ox = 0; ox < ow; ++ox) {
            const double* grow = g.data() + (oy * ow + ox) * co;
            for (int64_t ky = 0; ky < kh; ++ky) {
              const int64_t iy = oy * stride - ph + ky;
              if (iy < 0 || iy >= h) continue;
              for (int64_t kx = 0; kx < kw; ++kx) {
                const int64_t ix = ox * stride - pw + kx;
                if (ix < 0 || ix >= w) continue;
                const double* xrow = X.data() + (iy * w + ix) * ci;
                double* dxrow = gin[0]->data() + (iy * w + ix) * ci;
                const double* krow = K.data() + (ky * kw + kx) * ci * co;
                double* dkrow = gin[1]->data() + (ky * kw + kx) * ci * co;
                for (int64_t c = 0; c < ci; ++c) {
                  const double xv = xrow[c];
                  const double* kc = krow + c * co;
                  double* dkc = dkrow + c * co;
                  double s = 0.0;
                  for (int64_t o = 0; o < co; ++o) {
                    s += grow[o] * kc[o];
                    dkc[o] += xv * grow[o];
                  }
                  dxrow[c] += s;
                }
              }
            }
          }
      });
}

Var transpose_conv1d(Var x, int ratio, Var w) {
  Tape* t = tape_of("transpose_conv1d", {x, w});
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  if (ratio < 1) shape_error("transpose_conv1d: ratio must be >= 1");
  if (xv.rank() != 2 || wv.rank() != 3 || wv.dim(0) != xv.dim(1) || wv.dim(1) != ratio)
    shape_error("transpose_conv1d: input " + xv.shape_str() + " incompatible with weights " +
                wv.shape_str() + " at ratio " + std::to_string(ratio));
  auto fwd = [ratio](const std::vector<const Tensor*>& in) {
    return transpose_conv1d_fwd(*in[0], ratio, *in[1]);
  };
  Tensor out = fwd({&xv, &wv});
  return t->record(
      "transpose_conv1d", {x, w}, std::move(out), fwd,
      [ratio](const std::vector<const Tensor*>& in, const Tensor&, const Tensor& g,
              const std::vector<Tensor*>& gin) {
        const Tensor& X = *in[0];
        const Tensor& W = *in[1];
        const int64_t n = X.dim(0), ci = X.dim(1), co = W.dim(2);
        for (int64_t i = 0; i < n; ++i) {
          const double* xr = X.data() + i * ci;
          double* dxr = gin[0]->data() + i * ci;
          for (int64_t j = 0; j < ratio; ++j) {
            const double* gr = g.data() + (i * ratio + j) * co;
            for (int64_t c = 0; c < ci; ++c) {
              const double* wr = W.data() + (c * ratio + j) * co;
              double* dwr = gin[1]->data() + (c * ratio + j) * co;
              double s = 0.0;
              const double xvv = xr[c];
              for (int64_t o = 0; o < co; ++o) {
                s += gr[o] * wr[o];
                dwr[o] += xvv * gr[o];
              }
              dxr[c] += s;
            }
          }
        }
      });
}

Var multi_head_attention(Var q, Var k, Var v, int heads, Var wq, Var wk, Var wv, Var wo) {
  const int64_t d_model = wq.value().dim(1);
  if (heads < 1 || d_model % heads != 0)
    shape_error("multi_head_attention: model width " + std::to_string(d_model) +
                " not divisible by " + std::to_string(heads) + " heads");
  if (wk.value().dim(1) != d_model || wv.value().dim(1) != d_model ||
      wo.value().dim(0) != d_model)
    shape_error("multi_head_attention: projection widths disagree");
  Var qp = matmul(q, wq);
  Var kp = matmul(k, wk);
  Var vp = matmul(v, wv);
  const int64_t dh = d_model / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> head_outs;
  head_outs.reserve(static_cast<size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    Var qh = slice_last(qp, h * dh, dh);
    Var kh = slice_last(kp, h * dh, dh);
    Var vh = slice_last(vp, h * dh, dh);
    Var att = softmax_last(scalar_mul(matmul(qh, transpose2d(kh)), scale));
    head_outs.push_back(matmul(att, vh));
  }
  Var cat = heads == 1 ? head_outs[0] : concat(head_outs, 1);
  return matmul(cat, wo);
}

IndexArray replicate_index(int64_t n) { return IndexArray({n}); }

IndexArray interleave_index(int64_t n, int64_t ratio) {
  IndexArray idx({n * ratio});
  for (int64_t i = 0; i < n * ratio; ++i) idx[i] = i / ratio;
  return idx;
}

IndexArray self_rows_index(int64_t n, int64_t k) {
  IndexArray idx({n, k});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < k; ++j) idx.at(i, j) = i;
  return idx;
}

}  // namespace dmfnet
