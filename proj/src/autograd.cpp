#include "unit/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace unit::ag {

const Mat& Var::value() const { return tape->value(id); }

Var Tape::constant(Mat value) {
  nodes_.push_back({std::move(value), {}, {}, nullptr, false});
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::parameter(Parameter& p) {
  nodes_.push_back({p.value, {}, {}, record_ ? &p : nullptr, record_});
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::push(Mat value, std::initializer_list<Var> inputs, Backward backward) {
  bool needs = false;
  if (record_) {
    for (const Var& in : inputs) needs = needs || nodes_[static_cast<std::size_t>(in.id)].needs_grad;
  }
  nodes_.push_back({std::move(value), {}, needs ? std::move(backward) : Backward{}, nullptr, needs});
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Mat& Tape::grad(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var root) {
  if (!record_) throw Error("backward on a non-recording tape");
  if (root.rows() != 1 || root.cols() != 1) throw Error("backward root must be a scalar");
  grad(root.id)(0, 0) += 1.0;
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.param != nullptr) {
      n.param->grad += n.grad;
    } else if (n.backward) {
      n.backward(*this, i);
    }
  }
}

Var matmul(Var a, Var b) {
  Tape& t = *a.tape;
  if (a.cols() != b.rows()) throw Error("matmul shape mismatch");
  Mat out = a.value() * b.value();
  return t.push(std::move(out), {a, b}, [a, b](Tape& tp, int self) {
    const Mat& g = tp.grad(self);
    if (tp.needs_grad(a.id)) tp.grad(a.id).noalias() += g * tp.value(b.id).transpose();
    if (tp.needs_grad(b.id)) tp.grad(b.id).noalias() += tp.value(a.id).transpose() * g;
  });
}

Var add(Var a, Var b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error("add shape mismatch");
  return a.tape->push(a.value() + b.value(), {a, b}, [a, b](Tape& tp, int self) {
    const Mat& g = tp.grad(self);
    if (tp.needs_grad(a.id)) tp.grad(a.id) += g;
    if (tp.needs_grad(b.id)) tp.grad(b.id) += g;
  });
}

Var sub(Var a, Var b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error("sub shape mismatch");
  return a.tape->push(a.value() - b.value(), {a, b}, [a, b](Tape& tp, int self) {
    const Mat& g = tp.grad(self);
    if (tp.needs_grad(a.id)) tp.grad(a.id) += g;
    if (tp.needs_grad(b.id)) tp.grad(b.id) -= g;
  });
}

Var scale(Var a, double s) {
  return a.tape->push(a.value() * s, {a}, [a, s](Tape& tp, int self) { tp.grad(a.id) += s * tp.grad(self); });
}

Var add_row(Var x, Var bias) {
  if (bias.rows() != 1 || bias.cols() != x.cols()) throw Error("add_row shape mismatch");
  Mat out = x.value().rowwise() + bias.value().row(0);
  return x.tape->push(std::move(out), {x, bias}, [x, bias](Tape& tp, int self) {
    const Mat& g = tp.grad(self);
    if (tp.needs_grad(x.id)) tp.grad(x.id) += g;
    if (tp.needs_grad(bias.id)) tp.grad(bias.id) += g.colwise().sum();
  });
}

Var relu(Var x) {
  Mat out = x.value().cwiseMax(0.0);
  return x.tape->push(std::move(out), {x}, [x](Tape& tp, int self) {
    const Mat& g = tp.grad(self);
    tp.grad(x.id) += (tp.value(x.id).array() > 0.0).select(g, 0.0);
  });
}

Var mul_const(Var x, const Mat& m) {
  if (m.rows() != x.rows() || m.cols() != x.cols()) throw Error("mul_const shape mismatch");
  Mat out = x.value().cwiseProduct(m);
  return x.tape->push(std::move(out), {x}, [x, m](Tape& tp, int self) { tp.grad(x.id) += tp.grad(self).cwiseProduct(m); });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  const Mat& xv = x.value();
  const Eigen::Index n = xv.rows();
  const Eigen::Index d = xv.cols();
  if (gain.cols() != d || bias.cols() != d) throw Error("layer_norm shape mismatch");
  Mat xhat(n, d);
  Vec inv_std(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mean = xv.row(r).mean();
    const double var = (xv.row(r).array() - mean).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (xv.row(r).array() - mean) * inv_std(r);
  }
  Mat out = (xhat.array().rowwise() * gain.value().row(0).array()).matrix();
  out.rowwise() += bias.value().row(0);
  return x.tape->push(std::move(out), {x, gain, bias}, [x, gain, bias, xhat, inv_std](Tape& tp, int self) {
    const Mat& g = tp.grad(self);
    if (tp.needs_grad(gain.id)) tp.grad(gain.id) += (g.cwiseProduct(xhat)).colwise().sum();
    if (tp.needs_grad(bias.id)) tp.grad(bias.id) += g.colwise().sum();
    if (tp.needs_grad(x.id)) {
      const Mat gx = (g.array().rowwise() * tp.value(gain.id).row(0).array()).matrix();
      const double inv_d = 1.0 / static_cast<double>(gx.cols());
      Mat& dx = tp.grad(x.id);
      for (Eigen::Index r = 0; r < gx.rows(); ++r) {
        const double m1 = gx.row(r).sum() * inv_d;
        const double m2 = gx.row(r).dot(xhat.row(r)) * inv_d;
        dx.row(r).array() += inv_std(r) * (gx.row(r).array() - m1 - xhat.row(r).array() * m2);
      }
    }
  });
}

Var gather_rows(Var table, std::span<const int> rows) {
  const Mat& tv = table.value();
  Mat out = Mat::Zero(static_cast<Eigen::Index>(rows.size()), tv.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= 0) {
      if (rows[i] >= tv.rows()) throw Error("gather_rows index out of range");
      out.row(static_cast<Eigen::Index>(i)) = tv.row(rows[i]);
    }
  }
  std::vector<int> idx(rows.begin(), rows.end());
  return table.tape->push(std::move(out), {table}, [table, idx = std::move(idx)](Tape& tp, int self) {
    const Mat& g = tp.grad(self);
    Mat& dt = tp.grad(table.id);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] >= 0) dt.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
    }
  });
}

Var replace_rows(Var x, Var row, std::span<const std::uint8_t> where) {
  if (static_cast<Eigen::Index>(where.size()) != x.rows() || row.rows() != 1 || row.cols() != x.cols()) {
    throw Error("replace_rows shape mismatch");
  }
  Mat out = x.value();
  for (std::size_t i = 0; i < where.size(); ++i) {
    if (where[i] != 0) out.row(static_cast<Eigen::Index>(i)) = row.value().row(0);
  }
  std::vector<std::uint8_t> w(where.begin(), where.end());
  return x.tape->push(std::move(out), {x, row}, [x, row, w = std::move(w)](Tape& tp, int self) {
    const Mat& g = tp.grad(self);
    const bool gx = tp.needs_grad(x.id);
    const bool gr = tp.needs_grad(row.id);
    for (std::size_t i = 0; i < w.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      if (w[i] != 0) {
        if (gr) tp.grad(row.id).row(0) += g.row(r);
      } else if (gx) {
        tp.grad(x.id).row(r) += g.row(r);
      }
    }
  });
}

Var rows_dot(Var a, Var b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error("rows_dot shape mismatch");
  Mat out = a.value().cwiseProduct(b.value()).rowwise().sum();
  return a.tape->push(std::move(out), {a, b}, [a, b](Tape& tp, int self) {
    const Mat& g = tp.grad(self);
    if (tp.needs_grad(a.id)) tp.grad(a.id) += (tp.value(b.id).array().colwise() * g.col(0).array()).matrix();
    if (tp.needs_grad(b.id)) tp.grad(b.id) += (tp.value(a.id).array().colwise() * g.col(0).array()).matrix();
  });
}

Var sum(Var x) {
  Mat out(1, 1);
  out(0, 0) = x.value().sum();
  return x.tape->push(std::move(out), {x}, [x](Tape& tp, int self) { tp.grad(x.id).array() += tp.grad(self)(0, 0); });
}

Var attention(Var q, Var k, Var v, const AttentionLayout& layout) {
  const Mat& Q = q.value();
  const Mat& K = k.value();
  const Mat& V = v.value();
  const int B = layout.batch;
  const int L = layout.length;
  const int H = layout.heads;
  const auto d = Q.cols();
  if (Q.rows() != B * L || K.rows() != Q.rows() || V.rows() != Q.rows() || K.cols() != d || V.cols() != d) {
    throw Error("attention shape mismatch");
  }
  if (d % H != 0) throw Error("attention width not divisible by head count");
  if (static_cast<int>(layout.valid.size()) != B * L) throw Error("attention validity mask size mismatch");
  const auto dh = d / H;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const bool causal = layout.causal;
  std::vector<std::uint8_t> valid(layout.valid.begin(), layout.valid.end());

  // probs[(b*H + h)] is L x L; rows for pad queries stay zero.
  std::vector<Mat> probs(static_cast<std::size_t>(B * H));
  Mat out = Mat::Zero(Q.rows(), d);
  for (int b = 0; b < B; ++b) {
    const auto base = static_cast<Eigen::Index>(b) * L;
    for (int h = 0; h < H; ++h) {
      const auto c0 = static_cast<Eigen::Index>(h) * dh;
      Mat S = Q.block(base, c0, L, dh) * K.block(base, c0, L, dh).transpose() * inv_sqrt;
      Mat& P = probs[static_cast<std::size_t>(b * H + h)];
      P = Mat::Zero(L, L);
      for (int i = 0; i < L; ++i) {
        if (valid[static_cast<std::size_t>(base + i)] == 0) continue;
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < L; ++j) {
          if (valid[static_cast<std::size_t>(base + j)] == 0 || (causal && j > i)) continue;
          mx = std::max(mx, S(i, j));
        }
        double total = 0.0;
        for (int j = 0; j < L; ++j) {
          if (valid[static_cast<std::size_t>(base + j)] == 0 || (causal && j > i)) continue;
          P(i, j) = std::exp(S(i, j) - mx);
          total += P(i, j);
        }
        P.row(i) /= total;
      }
      out.block(base, c0, L, dh).noalias() = P * V.block(base, c0, L, dh);
    }
  }
  return q.tape->push(std::move(out), {q, k, v},
                      [q, k, v, B, L, H, dh, inv_sqrt, probs = std::move(probs)](Tape& tp, int self) {
                        const Mat& G = tp.grad(self);
                        const Mat& Qv = tp.value(q.id);
                        const Mat& Kv = tp.value(k.id);
                        const Mat& Vv = tp.value(v.id);
                        const bool gq = tp.needs_grad(q.id);
                        const bool gk = tp.needs_grad(k.id);
                        const bool gv = tp.needs_grad(v.id);
                        for (int b = 0; b < B; ++b) {
                          const auto base = static_cast<Eigen::Index>(b) * L;
                          for (int h = 0; h < H; ++h) {
                            const auto c0 = static_cast<Eigen::Index>(h) * dh;
                            const Mat& P = probs[static_cast<std::size_t>(b * H + h)];
                            const auto dO = G.block(base, c0, L, dh);
                            if (gv) tp.grad(v.id).block(base, c0, L, dh).noalias() += P.transpose() * dO;
                            if (!gq && !gk) continue;
                            Mat dP = dO * Vv.block(base, c0, L, dh).transpose();
                            const Vec row_dot = dP.cwiseProduct(P).rowwise().sum();
                            Mat dS = (P.array() * (dP.colwise() - row_dot).array()).matrix() * inv_sqrt;
                            if (gq) tp.grad(q.id).block(base, c0, L, dh).noalias() += dS * Kv.block(base, c0, L, dh);
                            if (gk) tp.grad(k.id).block(base, c0, L, dh).noalias() += dS.transpose() * Qv.block(base, c0, L, dh);
                          }
                        }
                      });
}

Var scalar_from(Var input, double value, Mat grad_wrt_input) {
  if (grad_wrt_input.rows() != input.rows() || grad_wrt_input.cols() != input.cols()) {
    throw Error("scalar_from gradient shape mismatch");
  }
  Mat out(1, 1);
  out(0, 0) = value;
  return input.tape->push(std::move(out), {input}, [input, g = std::move(grad_wrt_input)](Tape& tp, int self) {
    tp.grad(input.id) += tp.grad(self)(0, 0) * g;
  });
}

}  // namespace unit::ag
