// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#include "mvaug/autograd.hpp"

#include <algorithm>
#include <cmath>

#include "mvaug/kernels.hpp"

namespace mvaug::ag {

namespace {

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

void require(bool ok, const char* what) {
  if (!ok) throw PreconditionError(what);
}

}  // namespace

const Mat& Var::value() const { return tape->value(*this); }

Var Tape::push(Mat value, bool requires_grad, std::function<void(Tape&, Node&)> fn) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Mat& Tape::grad_of(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() != n.value.size()) n.grad = Mat(n.value.rows, n.value.cols);
  return n.grad;
}

Var Tape::constant(Mat m) { return push(std::move(m), false, nullptr); }

Var Tape::param(Parameter& p) {
  Var v = push(p.value, p.trainable, [](Tape&, Node&) {});
  nodes_.back().param = &p;
  return v;
}

Var Tape::matmul(Var a, Var b) {
  const Mat& A = value(a);
  const Mat& B = value(b);
  require(A.cols == B.rows, "matmul: inner dimensions differ");
  Mat C(A.rows, B.cols);
  kernels::gemm_acc(A.data, B.data, C.data, A.rows, A.cols, B.cols);
  const int ia = a.id, ib = b.id;
  return push(std::move(C), needs(ia) || needs(ib), [ia, ib](Tape& t, Node& self) {
    const Mat& A = t.nodes_[ia].value;
    const Mat& B = t.nodes_[ib].value;
    if (t.needs(ia)) kernels::gemm_nt_acc(self.grad.data, B.data, t.grad_of(ia).data, A.rows, B.cols, A.cols);
    if (t.needs(ib)) kernels::gemm_tn_acc(A.data, self.grad.data, t.grad_of(ib).data, A.cols, A.rows, B.cols);
  });
}

Var Tape::matmul_nt(Var a, Var b) {
  const Mat& A = value(a);
  const Mat& B = value(b);
  require(A.cols == B.cols, "matmul_nt: inner dimensions differ");
  Mat C(A.rows, B.rows);
  kernels::gemm_nt_acc(A.data, B.data, C.data, A.rows, A.cols, B.rows);
  const int ia = a.id, ib = b.id;
  return push(std::move(C), needs(ia) || needs(ib), [ia, ib](Tape& t, Node& self) {
    const Mat& A = t.nodes_[ia].value;
    const Mat& B = t.nodes_[ib].value;
    // dA = dC B, dB = dC^T A
    if (t.needs(ia)) kernels::gemm_acc(self.grad.data, B.data, t.grad_of(ia).data, A.rows, B.rows, A.cols);
    if (t.needs(ib)) kernels::gemm_tn_acc(self.grad.data, A.data, t.grad_of(ib).data, B.rows, A.rows, A.cols);
  });
}

Var Tape::add(Var a, Var b) {
  const Mat& A = value(a);
  const Mat& B = value(b);
  require(A.rows == B.rows && A.cols == B.cols, "add: shapes differ");
  Mat C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C.data[i] += B.data[i];
  const int ia = a.id, ib = b.id;
  return push(std::move(C), needs(ia) || needs(ib), [ia, ib](Tape& t, Node& self) {
    for (int id : {ia, ib}) {
      if (!t.needs(id)) continue;
      Mat& g = t.grad_of(id);
      for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += self.grad.data[i];
    }
  });
}

Var Tape::add_row(Var a, Var row) {
  const Mat& A = value(a);
  const Mat& R = value(row);
  require(R.rows == 1 && R.cols == A.cols, "add_row: row shape mismatch");
  Mat C = A;
  for (int r = 0; r < C.rows; ++r)
    for (int c = 0; c < C.cols; ++c) C(r, c) += R.data[c];
  const int ia = a.id, ir = row.id;
  return push(std::move(C), needs(ia) || needs(ir), [ia, ir](Tape& t, Node& self) {
    if (t.needs(ia)) {
      Mat& g = t.grad_of(ia);
      for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += self.grad.data[i];
    }
    if (t.needs(ir)) {
      Mat& g = t.grad_of(ir);
      for (int r = 0; r < self.grad.rows; ++r)
        for (int c = 0; c < self.grad.cols; ++c) g.data[c] += self.grad(r, c);
    }
  });
}

Var Tape::scale(Var a, double s) {
  Mat C = value(a);
  for (double& x : C.data) x *= s;
  const int ia = a.id;
  return push(std::move(C), needs(ia), [ia, s](Tape& t, Node& self) {
    Mat& g = t.grad_of(ia);
    for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += s * self.grad.data[i];
  });
}

Var Tape::rms_norm(Var a, double eps) {
  const Mat& A = value(a);
  Mat Y(A.rows, A.cols);
  std::vector<double> inv(A.rows);
  for (int r = 0; r < A.rows; ++r) {
    double ss = 0.0;
    for (int c = 0; c < A.cols; ++c) ss += A(r, c) * A(r, c);
    inv[r] = 1.0 / std::sqrt(ss / A.cols + eps);
    for (int c = 0; c < A.cols; ++c) Y(r, c) = A(r, c) * inv[r];
  }
  const int ia = a.id;
  return push(std::move(Y), needs(ia), [ia, inv = std::move(inv)](Tape& t, Node& self) {
    Mat& g = t.grad_of(ia);
    const Mat& y = self.value;
    for (int r = 0; r < y.rows; ++r) {
      double dot = 0.0;
      for (int c = 0; c < y.cols; ++c) dot += self.grad(r, c) * y(r, c);
      dot /= y.cols;
      for (int c = 0; c < y.cols; ++c) g(r, c) += inv[r] * (self.grad(r, c) - y(r, c) * dot);
    }
  });
}

Var Tape::gelu(Var a) {
  const Mat& A = value(a);
  Mat Y(A.rows, A.cols);
  for (std::size_t i = 0; i < A.size(); ++i) {
    const double x = A.data[i];
    Y.data[i] = 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
  }
  const int ia = a.id;
  return push(std::move(Y), needs(ia), [ia](Tape& t, Node& self) {
    const Mat& A = t.nodes_[ia].value;
    Mat& g = t.grad_of(ia);
    for (std::size_t i = 0; i < A.size(); ++i) {
      const double x = A.data[i];
      const double th = std::tanh(kGeluC * (x + kGeluA * x * x * x));
      const double d = 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
      g.data[i] += d * self.grad.data[i];
    }
  });
}

Var Tape::softmax_rows(Var a) {
  const Mat& A = value(a);
  Mat Y(A.rows, A.cols);
  for (int r = 0; r < A.rows; ++r) {
    double mx = A(r, 0);
    for (int c = 1; c < A.cols; ++c) mx = std::max(mx, A(r, c));
    double sum = 0.0;
    for (int c = 0; c < A.cols; ++c) sum += Y(r, c) = std::exp(A(r, c) - mx);
    for (int c = 0; c < A.cols; ++c) Y(r, c) /= sum;
  }
  const int ia = a.id;
  return push(std::move(Y), needs(ia), [ia](Tape& t, Node& self) {
    Mat& g = t.grad_of(ia);
    const Mat& y = self.value;
    for (int r = 0; r < y.rows; ++r) {
      double dot = 0.0;
      for (int c = 0; c < y.cols; ++c) dot += self.grad(r, c) * y(r, c);
      for (int c = 0; c < y.cols; ++c) g(r, c) += y(r, c) * (self.grad(r, c) - dot);
    }
  });
}

Var Tape::slice_rows(Var a, int start, int count) {
  const Mat& A = value(a);
  require(start >= 0 && count >= 0 && start + count <= A.rows, "slice_rows: out of range");
  Mat Y(count, A.cols);
  std::copy_n(A.data.begin() + static_cast<std::ptrdiff_t>(start) * A.cols, Y.size(), Y.data.begin());
  const int ia = a.id;
  return push(std::move(Y), needs(ia), [ia, start](Tape& t, Node& self) {
    Mat& g = t.grad_of(ia);
    double* dst = g.data.data() + static_cast<std::size_t>(start) * g.cols;
    for (std::size_t i = 0; i < self.grad.size(); ++i) dst[i] += self.grad.data[i];
  });
}

Var Tape::slice_cols(Var a, int start, int count) {
  const Mat& A = value(a);
  require(start >= 0 && count >= 0 && start + count <= A.cols, "slice_cols: out of range");
  Mat Y(A.rows, count);
  for (int r = 0; r < A.rows; ++r)
    for (int c = 0; c < count; ++c) Y(r, c) = A(r, start + c);
  const int ia = a.id;
  return push(std::move(Y), needs(ia), [ia, start](Tape& t, Node& self) {
    Mat& g = t.grad_of(ia);
    for (int r = 0; r < self.grad.rows; ++r)
      for (int c = 0; c < self.grad.cols; ++c) g(r, start + c) += self.grad(r, c);
  });
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows: nothing to concatenate");
  const int cols = value(parts.front()).cols;
  int rows = 0;
  bool rg = false;
  for (Var p : parts) {
    require(value(p).cols == cols, "concat_rows: column counts differ");
    rows += value(p).rows;
    rg = rg || needs(p.id);
  }
  Mat Y(rows, cols);
  std::size_t off = 0;
  std::vector<int> ids;
  for (Var p : parts) {
    const Mat& P = value(p);
    std::copy(P.data.begin(), P.data.end(), Y.data.begin() + static_cast<std::ptrdiff_t>(off));
    off += P.size();
    ids.push_back(p.id);
  }
  return push(std::move(Y), rg, [ids = std::move(ids)](Tape& t, Node& self) {
    std::size_t off = 0;
    for (int id : ids) {
      const std::size_t n = t.nodes_[id].value.size();
      if (t.needs(id)) {
        Mat& g = t.grad_of(id);
        for (std::size_t i = 0; i < n; ++i) g.data[i] += self.grad.data[off + i];
      }
      off += n;
    }
  });
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols: nothing to concatenate");
  const int rows = value(parts.front()).rows;
  int cols = 0;
  bool rg = false;
  for (Var p : parts) {
    require(value(p).rows == rows, "concat_cols: row counts differ");
    cols += value(p).cols;
    rg = rg || needs(p.id);
  }
  Mat Y(rows, cols);
  int c0 = 0;
  std::vector<int> ids;
  for (Var p : parts) {
    const Mat& P = value(p);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < P.cols; ++c) Y(r, c0 + c) = P(r, c);
    c0 += P.cols;
    ids.push_back(p.id);
  }
  return push(std::move(Y), rg, [ids = std::move(ids)](Tape& t, Node& self) {
    int c0 = 0;
    for (int id : ids) {
      const int pc = t.nodes_[id].value.cols;
      if (t.needs(id)) {
        Mat& g = t.grad_of(id);
        for (int r = 0; r < g.rows; ++r)
          for (int c = 0; c < pc; ++c) g(r, c) += self.grad(r, c0 + c);
      }
      c0 += pc;
    }
  });
}

Var Tape::gather_rows(Var table, const std::vector<int>& ids) {
  const Mat& T = value(table);
  Mat Y(static_cast<int>(ids.size()), T.cols);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] >= 0 && ids[i] < T.rows, "gather_rows: index out of range");
    for (int c = 0; c < T.cols; ++c) Y(static_cast<int>(i), c) = T(ids[i], c);
  }
  const int it = table.id;
  return push(std::move(Y), needs(it), [it, ids](Tape& t, Node& self) {
    Mat& g = t.grad_of(it);
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (int c = 0; c < g.cols; ++c) g(ids[i], c) += self.grad(static_cast<int>(i), c);
  });
}

Var Tape::mean_rows(Var a) {
  const Mat& A = value(a);
  require(A.rows > 0, "mean_rows: empty input");
  Mat Y(1, A.cols);
  for (int r = 0; r < A.rows; ++r)
    for (int c = 0; c < A.cols; ++c) Y.data[c] += A(r, c);
  for (double& y : Y.data) y /= A.rows;
  const int ia = a.id;
  return push(std::move(Y), needs(ia), [ia](Tape& t, Node& self) {
    Mat& g = t.grad_of(ia);
    for (int r = 0; r < g.rows; ++r)
      for (int c = 0; c < g.cols; ++c) g(r, c) += self.grad.data[c] / g.rows;
  });
}

Var Tape::mse(Var a, const Mat& target) {
  const Mat& A = value(a);
  require(A.rows == target.rows && A.cols == target.cols, "mse: shapes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) {
    const double d = A.data[i] - target.data[i];
    s += d * d;
  }
  Mat Y(1, 1);
  Y.data[0] = s / static_cast<double>(A.size());
  const int ia = a.id;
  return push(std::move(Y), needs(ia), [ia, target](Tape& t, Node& self) {
    const Mat& A = t.nodes_[ia].value;
    Mat& g = t.grad_of(ia);
    const double k = 2.0 * self.grad.data[0] / static_cast<double>(A.size());
    for (std::size_t i = 0; i < A.size(); ++i) g.data[i] += k * (A.data[i] - target.data[i]);
  });
}

void Tape::backward(Var out) {
  Node& root = nodes_.at(out.id);
  require(root.value.size() == 1, "backward: output must be a scalar");
  if (!root.requires_grad) return;
  grad_of(out.id).data[0] = 1.0;
  for (int i = out.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.param != nullptr) {
      Mat& pg = n.param->grad;
      if (pg.size() != n.grad.size()) pg = Mat(n.grad.rows, n.grad.cols);
      for (std::size_t k = 0; k < pg.size(); ++k) pg.data[k] += n.grad.data[k];
    } else if (n.backward) {
      n.backward(*this, n);
    }
  }
}

}  // namespace mvaug::ag
