#include "dpn/graph.hpp"

#include <array>
#include <cmath>

#include "dpn/error.hpp"

namespace dpn::nn {

Parameter& ParameterSet::add(std::string name, Tensor value) {
  if (contains(name)) throw Error(ErrorCode::kInvalidConfig, "duplicate parameter " + name);
  Tensor grad(value.shape);
  params_.push_back({std::move(name), std::move(value), std::move(grad)});
  return params_.back();
}

Parameter& ParameterSet::get(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return p;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown parameter " + name);
}

const Parameter& ParameterSet::get(const std::string& name) const {
  return const_cast<ParameterSet*>(this)->get(name);
}

bool ParameterSet::contains(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return true;
  }
  return false;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) std::fill(p.grad.data.begin(), p.grad.data.end(), 0.0);
}

const Tensor& Var::value() const { return graph->value(id); }

const Tensor& Graph::value(int id) const {
  const auto& n = nodes_[id];
  return n.view ? *n.view : n.own;
}

Var Graph::constant(Tensor value) {
  Node n;
  n.kind = "constant";
  n.own = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::param(Parameter& p) {
  Node n;
  n.kind = "param:" + p.name;
  n.view = &p.value;
  n.param = &p;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::frozen(const Parameter& p) {
  Node n;
  n.kind = "frozen:" + p.name;
  n.view = &p.value;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::record(const char* kind, Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  const int id = static_cast<int>(nodes_.size());
  if (!value.all_finite()) {
    throw Error(ErrorCode::kNonFinite, "node " + std::to_string(id) + " (" + kind + ") produced NaN/Inf");
  }
  Node n;
  n.kind = kind;
  n.own = std::move(value);
  for (const Var& v : inputs) {
    n.inputs.push_back(v.id);
    n.requires_grad = n.requires_grad || nodes_[v.id].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, id};
}

void Graph::backward(Var loss) {
  if (value(loss.id).size() != 1) {
    throw Error(ErrorCode::kInvalidLoss, "loss must be scalar, got " + shape_string(value(loss.id).shape));
  }
  std::vector<Tensor> grads(nodes_.size());
  grads[loss.id] = Tensor(value(loss.id).shape, 1.0);
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || grads[id].data.empty() || !n.backward) continue;
    std::vector<Tensor*> slots;
    slots.reserve(n.inputs.size());
    for (int in : n.inputs) {
      if (!nodes_[in].requires_grad) {
        slots.push_back(nullptr);
        continue;
      }
      if (grads[in].data.empty()) grads[in] = Tensor(value(in).shape);
      slots.push_back(&grads[in]);
    }
    n.backward(grads[id], slots);
  }
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    Node& n = nodes_[id];
    if (!n.param || grads[id].data.empty()) continue;
    auto& g = n.param->grad.data;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += grads[id].data[i];
  }
}

namespace {

[[noreturn]] void mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw Error(ErrorCode::kShapeMismatch,
              std::string(op) + ": " + shape_string(a.shape) + " vs " + shape_string(b.shape));
}

void accumulate(Tensor* slot, const Tensor& g, double factor = 1.0) {
  if (!slot) return;
  for (std::size_t i = 0; i < g.size(); ++i) slot->data[i] += factor * g.data[i];
}

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.rank() != 2 || B.rank() != 2 || A.dim(1) != B.dim(0)) mismatch("matmul", A, B);
  Tensor out({A.dim(0), B.dim(1)});
  out.matrix().noalias() = A.matrix() * B.matrix();
  return a.graph->record("matmul", std::move(out), {a, b},
                         [&A, &B](const Tensor& g, std::vector<Tensor*>& in) {
                           if (in[0]) in[0]->matrix().noalias() += g.matrix() * B.matrix().transpose();
                           if (in[1]) in[1]->matrix().noalias() += A.matrix().transpose() * g.matrix();
                         });
}

Var add(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (!A.same_shape(B)) mismatch("add", A, B);
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += B[i];
  return a.graph->record("add", std::move(out), {a, b}, [](const Tensor& g, std::vector<Tensor*>& in) {
    accumulate(in[0], g);
    accumulate(in[1], g);
  });
}

Var sub(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (!A.same_shape(B)) mismatch("sub", A, B);
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= B[i];
  return a.graph->record("sub", std::move(out), {a, b}, [](const Tensor& g, std::vector<Tensor*>& in) {
    accumulate(in[0], g);
    accumulate(in[1], g, -1.0);
  });
}

Var add_bias(Var x, Var bias) {
  const Tensor& X = x.value();
  const Tensor& b = bias.value();
  if (b.rank() != 1 || X.cols() != b.size()) mismatch("add_bias", X, b);
  Tensor out = X;
  const std::size_t n = b.size();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i % n];
  return x.graph->record("add_bias", std::move(out), {x, bias},
                         [n](const Tensor& g, std::vector<Tensor*>& in) {
                           accumulate(in[0], g);
                           if (in[1]) {
                             for (std::size_t i = 0; i < g.size(); ++i) in[1]->data[i % n] += g[i];
                           }
                         });
}

Var concat(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.rank() != B.rank() || A.rows() != B.rows()) mismatch("concat", A, B);
  for (std::size_t i = 0; i + 1 < A.rank(); ++i) {
    if (A.dim(i) != B.dim(i)) mismatch("concat", A, B);
  }
  const std::size_t p = A.cols(), q = B.cols(), rows = A.rows();
  auto shape = A.shape;
  shape.back() = p + q;
  Tensor out(shape);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(A.data.begin() + r * p, p, out.data.begin() + r * (p + q));
    std::copy_n(B.data.begin() + r * q, q, out.data.begin() + r * (p + q) + p);
  }
  return a.graph->record("concat", std::move(out), {a, b},
                         [p, q, rows](const Tensor& g, std::vector<Tensor*>& in) {
                           for (std::size_t r = 0; r < rows; ++r) {
                             if (in[0]) {
                               for (std::size_t j = 0; j < p; ++j) in[0]->data[r * p + j] += g[r * (p + q) + j];
                             }
                             if (in[1]) {
                               for (std::size_t j = 0; j < q; ++j) in[1]->data[r * q + j] += g[r * (p + q) + p + j];
                             }
                           }
                         });
}

Var relu(Var x) {
  const Tensor& X = x.value();
  Tensor out = X;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return x.graph->record("relu", std::move(out), {x}, [&X](const Tensor& g, std::vector<Tensor*>& in) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (X[i] > 0.0) in[0]->data[i] += g[i];
    }
  });
}

Var reshape(Var x, std::vector<std::size_t> shape) {
  Tensor out(std::move(shape), x.value().data);
  return x.graph->record("reshape", std::move(out), {x},
                         [](const Tensor& g, std::vector<Tensor*>& in) { accumulate(in[0], g); });
}

Var flatten(Var x) { return reshape(x, {x.value().size()}); }

Var elementwise_max3(Var a, Var b, Var c) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const Tensor& C = c.value();
  if (!A.same_shape(B)) mismatch("elementwise_max3", A, B);
  if (!A.same_shape(C)) mismatch("elementwise_max3", A, C);
  Tensor out(A.shape);
  std::vector<unsigned char> arg(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) {
    unsigned char k = 0;
    double m = A[i];
    if (B[i] > m) m = B[i], k = 1;
    if (C[i] > m) m = C[i], k = 2;
    out[i] = m;
    arg[i] = k;
  }
  return a.graph->record("elementwise_max3", std::move(out), {a, b, c},
                         [arg = std::move(arg)](const Tensor& g, std::vector<Tensor*>& in) {
                           for (std::size_t i = 0; i < g.size(); ++i) {
                             if (in[arg[i]]) in[arg[i]]->data[i] += g[i];
                           }
                         });
}

Var l2_norm(Var x) {
  const Tensor& X = x.value();
  double acc = 0.0;
  for (double v : X.data) acc += v * v;
  const double n = std::sqrt(acc);
  return x.graph->record("l2_norm", Tensor::scalar(n), {x},
                         [&X, n](const Tensor& g, std::vector<Tensor*>& in) {
                           if (n == 0.0) return;
                           for (std::size_t i = 0; i < X.size(); ++i) in[0]->data[i] += g[0] * X[i] / n;
                         });
}

Var row_norms(Var x) {
  const Tensor& X = x.value();
  const std::size_t rows = X.rows(), cols = X.cols();
  Tensor out({rows});
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) acc += X[r * cols + j] * X[r * cols + j];
    out[r] = std::sqrt(acc);
  }
  Tensor norms = out;
  return x.graph->record("row_norms", std::move(out), {x},
                         [&X, rows, cols, norms = std::move(norms)](const Tensor& g, std::vector<Tensor*>& in) {
                           for (std::size_t r = 0; r < rows; ++r) {
                             if (norms[r] == 0.0) continue;
                             const double f = g[r] / norms[r];
                             for (std::size_t j = 0; j < cols; ++j) in[0]->data[r * cols + j] += f * X[r * cols + j];
                           }
                         });
}

Var scale(Var x, double factor) {
  Tensor out = x.value();
  for (double& v : out.data) v *= factor;
  return x.graph->record("scale", std::move(out), {x},
                         [factor](const Tensor& g, std::vector<Tensor*>& in) { accumulate(in[0], g, factor); });
}

Var add_scalar(Var x, double offset) {
  Tensor out = x.value();
  for (double& v : out.data) v += offset;
  return x.graph->record("add_scalar", std::move(out), {x},
                         [](const Tensor& g, std::vector<Tensor*>& in) { accumulate(in[0], g); });
}

Var sum(Var x) {
  double acc = 0.0;
  for (double v : x.value().data) acc += v;
  return x.graph->record("sum", Tensor::scalar(acc), {x}, [](const Tensor& g, std::vector<Tensor*>& in) {
    for (double& v : in[0]->data) v += g[0];
  });
}

Var mean(Var x) {
  const double n = static_cast<double>(x.value().size());
  return scale(sum(x), 1.0 / n);
}

Var quat_canonical(Var raw) {
  const Tensor& r = raw.value();
  if (r.size() != 4) throw Error(ErrorCode::kShapeMismatch, "quat_canonical needs 4 values");
  const double n = std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2] + r[3] * r[3]);
  if (!(n > 1e-12)) throw Error(ErrorCode::kDegenerateInput, "zero-norm raw quaternion");
  const double sign = hemisphere_sign({r[0], r[1], r[2], r[3]});
  Tensor out({4});
  for (int i = 0; i < 4; ++i) out[i] = sign * r[i] / n;
  Tensor u = out;
  return raw.graph->record("quat_canonical", std::move(out), {raw},
                           [u = std::move(u), n, sign](const Tensor& g, std::vector<Tensor*>& in) {
                             // d(sign·r/‖r‖) = sign (I - u uᵀ)/‖r‖, since u uᵀ = û ûᵀ for û = r/‖r‖.
                             double ug = 0.0;
                             for (int i = 0; i < 4; ++i) ug += u[i] * g[i];
                             for (int i = 0; i < 4; ++i) in[0]->data[i] += sign * (g[i] - u[i] * ug) / n;
                           });
}

Var quat_to_rot(Var q) {
  const Tensor& Q = q.value();
  if (Q.size() != 4) throw Error(ErrorCode::kShapeMismatch, "quat_to_rot needs 4 values");
  const double w = Q[0], x = Q[1], y = Q[2], z = Q[3];
  Tensor out({3, 3}, {1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
                      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
                      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)});
  return q.graph->record("quat_to_rot", std::move(out), {q},
                         [w, x, y, z](const Tensor& G, std::vector<Tensor*>& in) {
                           const double dw[9] = {0, -2 * z, 2 * y, 2 * z, 0, -2 * x, -2 * y, 2 * x, 0};
                           const double dx[9] = {0, 2 * y, 2 * z, 2 * y, -4 * x, -2 * w, 2 * z, 2 * w, -4 * x};
                           const double dy[9] = {-4 * y, 2 * x, 2 * w, 2 * x, 0, 2 * z, -2 * w, 2 * z, -4 * y};
                           const double dz[9] = {-4 * z, -2 * w, 2 * x, 2 * w, -4 * z, 2 * y, 2 * x, 2 * y, 0};
                           for (int k = 0; k < 9; ++k) {
                             in[0]->data[0] += G[k] * dw[k];
                             in[0]->data[1] += G[k] * dx[k];
                             in[0]->data[2] += G[k] * dy[k];
                             in[0]->data[3] += G[k] * dz[k];
                           }
                         });
}

Var canonical_transform(Var points, Var R, Var t, Var s) {
  const Tensor& P = points.value();
  const Tensor& Rm = R.value();
  const Tensor& T = t.value();
  const Tensor& S = s.value();
  if (P.rank() != 2 || P.dim(1) != 3) mismatch("canonical_transform", P, Rm);
  if (Rm.size() != 9 || T.size() != 3 || S.size() != 3) mismatch("canonical_transform", Rm, T);
  const double sn = std::sqrt(S[0] * S[0] + S[1] * S[1] + S[2] * S[2]);
  if (!(sn > 1e-9)) throw Error(ErrorCode::kDegenerateScale, "canonical_transform: ‖s‖ near zero");
  const std::size_t N = P.dim(0);
  Tensor D = P;  // p - t
  for (std::size_t i = 0; i < N; ++i) {
    for (int j = 0; j < 3; ++j) D[i * 3 + j] -= T[j];
  }
  const Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>> Rmat(Rm.data.data());
  Tensor out({N, 3});
  out.matrix() = D.matrix() * Rmat / sn;
  Tensor Q = out;
  return points.graph->record(
      "canonical_transform", std::move(out), {points, R, t, s},
      [&Rm, &S, D = std::move(D), Q = std::move(Q), sn, N](const Tensor& G, std::vector<Tensor*>& in) {
        const Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>> Rmat(Rm.data.data());
        const RowMatrix GRt = G.matrix() * Rmat.transpose() / sn;
        if (in[0]) in[0]->matrix() += GRt;
        if (in[1]) {
          Eigen::Map<Eigen::Matrix<double, 3, 3, Eigen::RowMajor>> dR(in[1]->data.data());
          dR += D.matrix().transpose() * G.matrix() / sn;
        }
        if (in[2]) {
          for (std::size_t i = 0; i < N; ++i) {
            for (int j = 0; j < 3; ++j) in[2]->data[j] -= GRt(i, j);
          }
        }
        if (in[3]) {
          double dn = 0.0;
          for (std::size_t i = 0; i < Q.size(); ++i) dn -= Q[i] * G[i];
          dn /= sn;
          for (int j = 0; j < 3; ++j) in[3]->data[j] += dn * S[j] / sn;
        }
      });
}

Var zonal_conv(Var x, Var taps, std::shared_ptr<const SphericalBasis> basis) {
  const Tensor& X = x.value();
  const Tensor& T = taps.value();
  const int cells = basis->grid().cells();
  const int B = basis->bandwidth();
  const int K = basis->size();
  if (X.rank() != 2 || static_cast<int>(X.dim(0)) != cells) mismatch("zonal_conv", X, T);
  if (T.rank() != 3 || T.dim(0) != X.dim(1) || static_cast<int>(T.dim(2)) != B) mismatch("zonal_conv", X, T);
  const int cin = static_cast<int>(T.dim(0)), cout = static_cast<int>(T.dim(1));
  auto tap = [&T, cout, B](int i, int o, int l) { return T[(static_cast<std::size_t>(i) * cout + o) * B + l]; };

  RowMatrix coeff_in = basis->analysis() * X.matrix();  // K × cin
  RowMatrix coeff_out = RowMatrix::Zero(K, cout);
  for (int k = 0; k < K; ++k) {
    const int l = basis->degree_of(k);
    for (int i = 0; i < cin; ++i) {
      const double c = coeff_in(k, i);
      for (int o = 0; o < cout; ++o) coeff_out(k, o) += tap(i, o, l) * c;
    }
  }
  Tensor out({static_cast<std::size_t>(cells), static_cast<std::size_t>(cout)});
  out.matrix().noalias() = basis->synthesis() * coeff_out;
  return x.graph->record(
      "zonal_conv", std::move(out), {x, taps},
      [basis, &T, coeff_in = std::move(coeff_in), cin, cout, B, K](const Tensor& G, std::vector<Tensor*>& in) {
        const RowMatrix g_out = basis->synthesis().transpose() * G.matrix();  // K × cout
        if (in[1]) {
          auto& dT = in[1]->data;
          for (int k = 0; k < K; ++k) {
            const int l = basis->degree_of(k);
            for (int i = 0; i < cin; ++i) {
              for (int o = 0; o < cout; ++o) {
                dT[(static_cast<std::size_t>(i) * cout + o) * B + l] += coeff_in(k, i) * g_out(k, o);
              }
            }
          }
        }
        if (in[0]) {
          RowMatrix g_in = RowMatrix::Zero(K, cin);
          for (int k = 0; k < K; ++k) {
            const int l = basis->degree_of(k);
            for (int i = 0; i < cin; ++i) {
              double acc = 0.0;
              for (int o = 0; o < cout; ++o) acc += T[(static_cast<std::size_t>(i) * cout + o) * B + l] * g_out(k, o);
              g_in(k, i) = acc;
            }
          }
          in[0]->matrix().noalias() += basis->analysis().transpose() * g_in;
        }
      });
}

Var avg_pool(Var x, const SphericalGrid& grid) {
  const Tensor& X = x.value();
  if (X.rank() != 2 || static_cast<int>(X.dim(0)) != grid.cells() || grid.W % 2 || grid.H % 2) {
    throw Error(ErrorCode::kShapeMismatch, "avg_pool: input " + shape_string(X.shape) + " on grid " +
                                               std::to_string(grid.W) + "x" + std::to_string(grid.H));
  }
  const std::size_t c = X.dim(1);
  const int Wo = grid.W / 2, Ho = grid.H / 2;
  // Each coarse cell gathers four fine cells with weights w_h / Σ.
  std::vector<std::array<std::pair<int, double>, 4>> taps(static_cast<std::size_t>(Wo) * Ho);
  for (int ho = 0; ho < Ho; ++ho) {
    const double w0 = grid.quad_weights[2 * ho], w1 = grid.quad_weights[2 * ho + 1];
    const double norm = 2.0 * (w0 + w1);
    for (int wo = 0; wo < Wo; ++wo) {
      taps[ho * Wo + wo] = {{{grid.index(2 * wo, 2 * ho), w0 / norm},
                             {grid.index(2 * wo + 1, 2 * ho), w0 / norm},
                             {grid.index(2 * wo, 2 * ho + 1), w1 / norm},
                             {grid.index(2 * wo + 1, 2 * ho + 1), w1 / norm}}};
    }
  }
  Tensor out({taps.size(), c});
  for (std::size_t o = 0; o < taps.size(); ++o) {
    for (const auto& [cell, wt] : taps[o]) {
      for (std::size_t j = 0; j < c; ++j) out[o * c + j] += wt * X[cell * c + j];
    }
  }
  return x.graph->record("avg_pool", std::move(out), {x},
                         [taps = std::move(taps), c](const Tensor& G, std::vector<Tensor*>& in) {
                           for (std::size_t o = 0; o < taps.size(); ++o) {
                             for (const auto& [cell, wt] : taps[o]) {
                               for (std::size_t j = 0; j < c; ++j) in[0]->data[cell * c + j] += wt * G[o * c + j];
                             }
                           }
                         });
}

}  // namespace dpn::nn
