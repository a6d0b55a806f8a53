// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Minimal reverse-mode differentiation over row-major double matrices. A Tape
// records every op; backward() walks it in reverse. Leaves are constants or
// parameters; a frozen parameter never receives a gradient.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mvaug/types.hpp"

namespace mvaug::ag {

struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  std::size_t size() const { return data.size(); }
  bool operator==(const Mat&) const = default;
};

struct Parameter {
  std::string name;
  Mat value;
  Mat grad;
  Mat adam_m;
  Mat adam_v;
  bool trainable = false;
};

class Tape;

/// Handle to a tape node.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Mat& value() const;
  int rows() const { return value().rows; }
  int cols() const { return value().cols; }
};

class Tape {
 public:
  Var constant(Mat m);
  /// Leaf bound to `p`; backward() adds into p.grad only when p is trainable.
  Var param(Parameter& p);

  Var matmul(Var a, Var b);     // A B
  Var matmul_nt(Var a, Var b);  // A B^T
  Var add(Var a, Var b);
  Var add_row(Var a, Var row);  // broadcasts a 1 x m row over A's rows
  Var scale(Var a, double s);
  Var rms_norm(Var a, double eps = 1e-6);
  Var gelu(Var a);  // tanh approximation
  Var softmax_rows(Var a);
  Var slice_rows(Var a, int start, int count);
  Var slice_cols(Var a, int start, int count);
  Var concat_rows(const std::vector<Var>& parts);
  Var concat_cols(const std::vector<Var>& parts);
  Var gather_rows(Var table, const std::vector<int>& ids);
  Var mean_rows(Var a);
  /// Mean squared error against a constant target; returns a 1 x 1 node.
  Var mse(Var a, const Mat& target);

  const Mat& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  /// Seeds d(out)/d(out) = 1 for a 1 x 1 node and propagates.
  void backward(Var out);
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    std::function<void(Tape&, Node&)> backward;
  };

  Var push(Mat value, bool requires_grad, std::function<void(Tape&, Node&)> fn);
  Mat& grad_of(int id);
  bool needs(int id) const { return nodes_[id].requires_grad; }

  std::vector<Node> nodes_;
};

}  // namespace mvaug::ag
