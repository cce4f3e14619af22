#pragma once

// Minimal reverse-mode differentiation over dense row-major matrices.
//
// A Tape records every operation applied in a forward pass. Values are kept
// on the tape, so a Var is only an index. Parameters are leaves bound to a
// `Parameter`; backward() accumulates into Parameter::grad. A tape created
// with record=false evaluates values only (inference).

#include "unit/common.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace unit::ag {

struct Parameter {
  std::string name;
  Mat value;
  Mat grad;

  Parameter() = default;
  Parameter(std::string n, Mat v) : name(std::move(n)), value(std::move(v)), grad(Mat::Zero(value.rows(), value.cols())) {}
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

struct Var {
  Tape* tape = nullptr;
  int id = -1;

  [[nodiscard]] const Mat& value() const;
  [[nodiscard]] Eigen::Index rows() const { return value().rows(); }
  [[nodiscard]] Eigen::Index cols() const { return value().cols(); }
  [[nodiscard]] double scalar() const { return value()(0, 0); }
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  [[nodiscard]] bool recording() const { return record_; }

  Var constant(Mat value);
  Var parameter(Parameter& p);

  // Adds a node; `backward` reads grad(self) and accumulates into input grads.
  Var push(Mat value, std::initializer_list<Var> inputs, Backward backward);

  [[nodiscard]] const Mat& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  [[nodiscard]] bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  // Gradient buffer, lazily zero-initialized to the node's shape.
  Mat& grad(int id);

  // Seeds d(root)/d(root) = 1 for a 1x1 root and propagates in reverse order.
  void backward(Var root);

  [[nodiscard]] std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    Backward backward;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };

  bool record_;
  std::vector<Node> nodes_;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double s);
// x (n x c) + bias (1 x c) broadcast over rows.
Var add_row(Var x, Var bias);
Var relu(Var x);
// Elementwise product with a fixed matrix (dropout masks, validity masks).
Var mul_const(Var x, const Mat& m);
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-8);

// Rows of `table` by index; index -1 yields a zero row.
Var gather_rows(Var table, std::span<const int> rows);
// Replaces the rows flagged in `where` by the single row vector `row`.
Var replace_rows(Var x, Var row, std::span<const std::uint8_t> where);

// Row-wise dot product of equally shaped a and b -> n x 1.
Var rows_dot(Var a, Var b);
Var sum(Var x);

struct AttentionLayout {
  int batch = 0;
  int length = 0;
  int heads = 1;
  bool causal = false;
  std::span<const std::uint8_t> valid;  // batch*length; 0 = pad
};

// Multi-head scaled dot-product attention over (batch*length) x d inputs.
// Keys at pad positions are masked; causal masking hides keys after the query.
// Rows at pad query positions are zero.
Var attention(Var q, Var k, Var v, const AttentionLayout& layout);

// Scalar node with externally computed value and gradient w.r.t. `input`.
Var scalar_from(Var input, double value, Mat grad_wrt_input);

}  // namespace unit::ag
