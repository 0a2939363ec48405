#include "eqt/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace eqt {

namespace {

using Mat = Eigen::MatrixXd;

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(std::string("tape: ") + msg);
}

// Quadlinear path contraction. Argument roles per mode:
//   Out:   a = x, b = y, c = w      -> N x dim3
//   GradX: a = g, b = y, c = w      -> N x dim1
//   GradY: a = g, b = x, c = w      -> N x dim2
//   GradW: a = g, b = x, c = y      -> w_rows x n_weights
Mat dtp_eval(const DtpKernel& k, DtpMode mode, const Mat& a, const Mat& b, const Mat& c,
             int w_rows_out) {
  const long n = a.rows();
  Mat out;
  switch (mode) {
    case DtpMode::Out: out = Mat::Zero(n, k.dim3); break;
    case DtpMode::GradX: out = Mat::Zero(n, k.dim1); break;
    case DtpMode::GradY: out = Mat::Zero(n, k.dim2); break;
    case DtpMode::GradW: out = Mat::Zero(w_rows_out, k.n_weights); break;
  }
  for (const auto& p : k.paths) {
    const auto& cg = *p.cg;
    for (long r = 0; r < n; ++r) {
      switch (mode) {
        case DtpMode::Out: {
          const double wv = c(c.rows() == 1 ? 0 : r, p.w);
          for (const auto& e : cg)
            out(r, p.off3 + e.i3) += wv * e.v * a(r, p.off1 + e.i1) * b(r, p.off2 + e.i2);
          break;
        }
        case DtpMode::GradX: {
          const double wv = c(c.rows() == 1 ? 0 : r, p.w);
          for (const auto& e : cg)
            out(r, p.off1 + e.i1) += wv * e.v * a(r, p.off3 + e.i3) * b(r, p.off2 + e.i2);
          break;
        }
        case DtpMode::GradY: {
          const double wv = c(c.rows() == 1 ? 0 : r, p.w);
          for (const auto& e : cg)
            out(r, p.off2 + e.i2) += wv * e.v * a(r, p.off3 + e.i3) * b(r, p.off1 + e.i1);
          break;
        }
        case DtpMode::GradW: {
          double acc = 0.0;
          for (const auto& e : cg)
            acc += e.v * a(r, p.off3 + e.i3) * b(r, p.off1 + e.i1) * c(r, p.off2 + e.i2);
          out(w_rows_out == 1 ? 0 : r, p.w) += acc;
          break;
        }
      }
    }
  }
  return out;
}

}  // namespace

Slot Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<Slot>(nodes_.size() - 1);
}

void Tape::check(Slot s) const {
  if (s < 0 || static_cast<std::size_t>(s) >= nodes_.size())
    throw std::invalid_argument("tape: slot out of range");
}

Slot Tape::emit(Op op, std::vector<Slot> in) {
  Node n;
  n.op = op;
  for (Slot s : in) {
    check(s);
    n.requires_grad = n.requires_grad || nodes_[s].requires_grad;
  }
  n.in = std::move(in);
  return push(std::move(n));
}

Slot Tape::leaf(Mat value, bool requires_grad) {
  Node n;
  n.op = Op::Leaf;
  n.val = std::move(value);
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

Slot Tape::constant(Mat value) {
  Node n;
  n.op = Op::Constant;
  n.val = std::move(value);
  return push(std::move(n));
}

Slot Tape::add(Slot a, Slot b) {
  Slot s = emit(Op::Add, {a, b});
  require(val(a).rows() == val(b).rows() && val(a).cols() == val(b).cols(), "add: shape mismatch");
  nodes_[s].val = val(a) + val(b);
  return s;
}

Slot Tape::sub(Slot a, Slot b) {
  Slot s = emit(Op::Sub, {a, b});
  require(val(a).rows() == val(b).rows() && val(a).cols() == val(b).cols(), "sub: shape mismatch");
  nodes_[s].val = val(a) - val(b);
  return s;
}

Slot Tape::neg(Slot a) {
  Slot s = emit(Op::Neg, {a});
  nodes_[s].val = -val(a);
  return s;
}

Slot Tape::mul(Slot a, Slot b) {
  Slot s = emit(Op::Mul, {a, b});
  require(val(a).rows() == val(b).rows() && val(a).cols() == val(b).cols(), "mul: shape mismatch");
  nodes_[s].val = val(a).cwiseProduct(val(b));
  return s;
}

Slot Tape::scale(Slot a, double f) {
  Slot s = emit(Op::Scale, {a});
  nodes_[s].attr = f;
  nodes_[s].val = f * val(a);
  return s;
}

Slot Tape::add_const(Slot a, double c) {
  Slot s = emit(Op::AddConst, {a});
  nodes_[s].attr = c;
  nodes_[s].val = val(a).array() + c;
  return s;
}

Slot Tape::mul_bcast(Slot a, Slot col) {
  Slot s = emit(Op::MulBcast, {a, col});
  require(val(col).cols() == 1 && val(col).rows() == val(a).rows(), "mul_bcast: need N x 1 scale");
  nodes_[s].val = val(a).array().colwise() * val(col).col(0).array();
  return s;
}

Slot Tape::mul_row_bcast(Slot a, Slot row) {
  Slot s = emit(Op::MulRowBcast, {a, row});
  require(val(row).rows() == 1 && val(row).cols() == val(a).cols(), "mul_row_bcast: need 1 x C scale");
  nodes_[s].val = val(a).array().rowwise() * val(row).row(0).array();
  return s;
}

Slot Tape::recip(Slot a) {
  Slot s = emit(Op::Recip, {a});
  nodes_[s].val = val(a).cwiseInverse();
  return s;
}

Slot Tape::sqrt(Slot a) {
  Slot s = emit(Op::Sqrt, {a});
  nodes_[s].val = val(a).cwiseSqrt();
  return s;
}

Slot Tape::exp(Slot a) {
  Slot s = emit(Op::Exp, {a});
  nodes_[s].val = val(a).array().exp();
  return s;
}

Slot Tape::sin(Slot a) {
  Slot s = emit(Op::Sin, {a});
  nodes_[s].val = val(a).array().sin();
  return s;
}

Slot Tape::cos(Slot a) {
  Slot s = emit(Op::Cos, {a});
  nodes_[s].val = val(a).array().cos();
  return s;
}

Slot Tape::sigmoid(Slot a) {
  Slot s = emit(Op::Sigmoid, {a});
  nodes_[s].val = ((-val(a).array()).exp() + 1.0).inverse();
  return s;
}

Slot Tape::leaky_relu(Slot a, double slope) {
  Slot s = emit(Op::LeakyRelu, {a});
  nodes_[s].attr = slope;
  nodes_[s].val = val(a).array().max(0.0) + slope * val(a).array().min(0.0);
  return s;
}

Slot Tape::abs(Slot a) {
  Slot s = emit(Op::Abs, {a});
  nodes_[s].val = val(a).cwiseAbs();
  return s;
}

Slot Tape::max_const(Slot a, double c) {
  Slot s = emit(Op::MaxConst, {a});
  nodes_[s].attr = c;
  nodes_[s].val = val(a).array().max(c);
  return s;
}

Slot Tape::row_sum(Slot a) {
  Slot s = emit(Op::RowSum, {a});
  nodes_[s].val = val(a).rowwise().sum();
  return s;
}

Slot Tape::col_sum(Slot a) {
  Slot s = emit(Op::ColSum, {a});
  nodes_[s].val = val(a).colwise().sum();
  return s;
}

Slot Tape::sum_all(Slot a) {
  Slot s = emit(Op::SumAll, {a});
  nodes_[s].val = Mat::Constant(1, 1, val(a).sum());
  return s;
}

Slot Tape::fold_sum(Slot a, int r) {
  Slot s = emit(Op::FoldSum, {a});
  require(r > 0 && val(a).cols() % r == 0, "fold_sum: column count not divisible by group size");
  nodes_[s].ia = r;
  const long k = val(a).cols() / r;
  Mat out = Mat::Zero(val(a).rows(), k);
  for (long j = 0; j < k; ++j)
    for (int t = 0; t < r; ++t) out.col(j) += val(a).col(j * r + t);
  nodes_[s].val = std::move(out);
  return s;
}

Slot Tape::repeat_cols(Slot a, int r) {
  Slot s = emit(Op::RepeatCols, {a});
  require(r > 0, "repeat_cols: group size must be positive");
  nodes_[s].ia = r;
  Mat out(val(a).rows(), val(a).cols() * r);
  for (long j = 0; j < val(a).cols(); ++j)
    for (int t = 0; t < r; ++t) out.col(j * r + t) = val(a).col(j);
  nodes_[s].val = std::move(out);
  return s;
}

Slot Tape::row_repeat(Slot a, int n) {
  Slot s = emit(Op::RowRepeat, {a});
  require(val(a).rows() == 1, "row_repeat: input must have one row");
  nodes_[s].ia = n;
  nodes_[s].val = val(a).replicate(n, 1);
  return s;
}

Slot Tape::matmul(Slot a, Slot b) {
  Slot s = emit(Op::Matmul, {a, b});
  require(val(a).cols() == val(b).rows(), "matmul: inner dimension mismatch");
  nodes_[s].val = val(a) * val(b);
  return s;
}

Slot Tape::transpose(Slot a) {
  Slot s = emit(Op::Transpose, {a});
  nodes_[s].val = val(a).transpose();
  return s;
}

Slot Tape::rep_matmul(Slot x, Slot w, int rep_dim) {
  Slot s = emit(Op::RepMatmul, {x, w});
  const long ci = val(w).rows(), co = val(w).cols();
  require(val(x).cols() == ci * rep_dim, "rep_matmul: input width mismatch");
  nodes_[s].ia = rep_dim;
  const long n = val(x).rows();
  Mat out(n, co * rep_dim);
  Mat xm(n, ci);
  for (int m = 0; m < rep_dim; ++m) {
    for (long c = 0; c < ci; ++c) xm.col(c) = val(x).col(c * rep_dim + m);
    Mat om = xm * val(w);
    for (long c = 0; c < co; ++c) out.col(c * rep_dim + m) = om.col(c);
  }
  nodes_[s].val = std::move(out);
  return s;
}

Slot Tape::rep_outer(Slot a, Slot b, int rep_dim) {
  Slot s = emit(Op::RepOuter, {a, b});
  require(val(a).rows() == val(b).rows(), "rep_outer: row count mismatch");
  require(val(a).cols() % rep_dim == 0 && val(b).cols() % rep_dim == 0,
          "rep_outer: width not divisible by rep dimension");
  nodes_[s].ia = rep_dim;
  const long ci = val(a).cols() / rep_dim, co = val(b).cols() / rep_dim;
  const long n = val(a).rows();
  Mat am(n, ci), bm(n, co);
  Mat out = Mat::Zero(ci, co);
  for (int m = 0; m < rep_dim; ++m) {
    for (long c = 0; c < ci; ++c) am.col(c) = val(a).col(c * rep_dim + m);
    for (long c = 0; c < co; ++c) bm.col(c) = val(b).col(c * rep_dim + m);
    out.noalias() += am.transpose() * bm;
  }
  nodes_[s].val = std::move(out);
  return s;
}

Slot Tape::slice_cols(Slot a, int off, int len) {
  Slot s = emit(Op::SliceCols, {a});
  require(off >= 0 && len >= 0 && off + len <= val(a).cols(), "slice_cols: out of range");
  nodes_[s].ia = off;
  nodes_[s].ib = len;
  nodes_[s].val = val(a).middleCols(off, len);
  return s;
}

Slot Tape::pad_cols(Slot a, int off, int total) {
  Slot s = emit(Op::PadCols, {a});
  require(off >= 0 && off + val(a).cols() <= total, "pad_cols: out of range");
  nodes_[s].ia = off;
  nodes_[s].ib = total;
  Mat out = Mat::Zero(val(a).rows(), total);
  out.middleCols(off, val(a).cols()) = val(a);
  nodes_[s].val = std::move(out);
  return s;
}

Slot Tape::concat_cols(const std::vector<Slot>& parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  Slot s = emit(Op::ConcatCols, parts);
  long cols = 0;
  const long rows = val(parts[0]).rows();
  for (Slot p : parts) {
    require(val(p).rows() == rows, "concat_cols: row count mismatch");
    cols += val(p).cols();
  }
  Mat out(rows, cols);
  long off = 0;
  for (Slot p : parts) {
    out.middleCols(off, val(p).cols()) = val(p);
    off += val(p).cols();
  }
  nodes_[s].val = std::move(out);
  return s;
}

Slot Tape::permute_cols(Slot a, std::shared_ptr<const std::vector<int>> perm) {
  Slot s = emit(Op::PermuteCols, {a});
  Mat out(val(a).rows(), static_cast<long>(perm->size()));
  for (std::size_t j = 0; j < perm->size(); ++j) {
    require((*perm)[j] >= 0 && (*perm)[j] < val(a).cols(), "permute_cols: index out of range");
    out.col(static_cast<long>(j)) = val(a).col((*perm)[j]);
  }
  nodes_[s].idx = std::move(perm);
  nodes_[s].val = std::move(out);
  return s;
}

Slot Tape::gather_rows(Slot a, std::shared_ptr<const std::vector<int>> idx) {
  Slot s = emit(Op::GatherRows, {a});
  Mat out(static_cast<long>(idx->size()), val(a).cols());
  for (std::size_t e = 0; e < idx->size(); ++e) {
    require((*idx)[e] >= 0 && (*idx)[e] < val(a).rows(), "gather_rows: index out of range");
    out.row(static_cast<long>(e)) = val(a).row((*idx)[e]);
  }
  nodes_[s].idx = std::move(idx);
  nodes_[s].val = std::move(out);
  return s;
}

Slot Tape::scatter_rows(Slot a, std::shared_ptr<const std::vector<int>> idx, int n_out) {
  Slot s = emit(Op::ScatterRows, {a});
  require(static_cast<long>(idx->size()) == val(a).rows(), "scatter_rows: index count mismatch");
  Mat out = Mat::Zero(n_out, val(a).cols());
  for (std::size_t e = 0; e < idx->size(); ++e) {
    require((*idx)[e] >= 0 && (*idx)[e] < n_out, "scatter_rows: index out of range");
    out.row((*idx)[e]) += val(a).row(static_cast<long>(e));
  }
  nodes_[s].ia = n_out;
  nodes_[s].idx = std::move(idx);
  nodes_[s].val = std::move(out);
  return s;
}

Slot Tape::dtp(DtpMode mode, std::shared_ptr<const DtpKernel> kernel, Slot a, Slot b, Slot c,
               int w_rows) {
  Slot s = emit(Op::Dtp, {a, b, c});
  const DtpKernel& k = *kernel;
  if (mode == DtpMode::GradW)
    require(w_rows == 1 || w_rows == val(a).rows(), "dtp grad-w: bad weight row count");
  switch (mode) {
    case DtpMode::Out:
      require(val(a).cols() == k.dim1 && val(b).cols() == k.dim2 && val(c).cols() == k.n_weights,
              "dtp: operand width mismatch");
      break;
    case DtpMode::GradX:
      require(val(a).cols() == k.dim3 && val(b).cols() == k.dim2 && val(c).cols() == k.n_weights,
              "dtp grad-x: operand width mismatch");
      break;
    case DtpMode::GradY:
      require(val(a).cols() == k.dim3 && val(b).cols() == k.dim1 && val(c).cols() == k.n_weights,
              "dtp grad-y: operand width mismatch");
      break;
    case DtpMode::GradW:
      require(val(a).cols() == k.dim3 && val(b).cols() == k.dim1 && val(c).cols() == k.dim2,
              "dtp grad-w: operand width mismatch");
      break;
  }
  nodes_[s].ia = static_cast<int>(mode);
  nodes_[s].ib = w_rows;
  nodes_[s].dtp = kernel;
  nodes_[s].val = dtp_eval(k, mode, val(a), val(b), val(c), w_rows);
  return s;
}

std::vector<Slot> Tape::backward(Slot output, const std::vector<Slot>& wrt) {
  check(output);
  if (val(output).rows() != 1 || val(output).cols() != 1)
    throw std::invalid_argument("tape: backward requires a scalar output");
  const std::size_t frontier = nodes_.size();
  std::vector<Slot> grad_of(frontier, -1);
  grad_of[output] = constant(Mat::Ones(1, 1));
  for (Slot s = output; s >= 0; --s) {
    if (grad_of[s] < 0 || !nodes_[s].requires_grad || nodes_[s].in.empty()) continue;
    std::vector<std::pair<Slot, Slot>> contrib;
    vjp(s, grad_of[s], contrib);
    for (const auto& [input, g] : contrib) {
      if (!nodes_[input].requires_grad) continue;
      grad_of[input] = grad_of[input] < 0 ? g : add(grad_of[input], g);
    }
  }
  std::vector<Slot> out;
  out.reserve(wrt.size());
  for (Slot w : wrt) {
    check(w);
    if (static_cast<std::size_t>(w) < frontier && grad_of[w] >= 0)
      out.push_back(grad_of[w]);
    else
      out.push_back(constant(Mat::Zero(val(w).rows(), val(w).cols())));
  }
  return out;
}

void Tape::vjp(Slot s, Slot g, std::vector<std::pair<Slot, Slot>>& contrib) {
  // Copy node fields up front: emitting rule nodes reallocates the node list.
  struct {
    Op op;
    std::vector<Slot> in;
    double attr;
    int ia;
    std::shared_ptr<const std::vector<int>> idx;
    std::shared_ptr<const DtpKernel> dtp;
  } n{nodes_[s].op, nodes_[s].in, nodes_[s].attr, nodes_[s].ia, nodes_[s].idx, nodes_[s].dtp};
  const std::vector<Slot>& in = n.in;
  switch (n.op) {
    case Op::Leaf:
    case Op::Constant:
      break;
    case Op::Add:
      contrib.emplace_back(in[0], g);
      contrib.emplace_back(in[1], g);
      break;
    case Op::Sub:
      contrib.emplace_back(in[0], g);
      contrib.emplace_back(in[1], neg(g));
      break;
    case Op::Neg:
      contrib.emplace_back(in[0], neg(g));
      break;
    case Op::Mul:
      contrib.emplace_back(in[0], mul(g, in[1]));
      contrib.emplace_back(in[1], mul(g, in[0]));
      break;
    case Op::Scale:
      contrib.emplace_back(in[0], scale(g, n.attr));
      break;
    case Op::AddConst:
      contrib.emplace_back(in[0], g);
      break;
    case Op::MulBcast:
      contrib.emplace_back(in[0], mul_bcast(g, in[1]));
      contrib.emplace_back(in[1], row_sum(mul(g, in[0])));
      break;
    case Op::MulRowBcast:
      contrib.emplace_back(in[0], mul_row_bcast(g, in[1]));
      contrib.emplace_back(in[1], col_sum(mul(g, in[0])));
      break;
    case Op::Recip:
      contrib.emplace_back(in[0], neg(mul(g, mul(s, s))));
      break;
    case Op::Sqrt:
      contrib.emplace_back(in[0], mul(g, scale(recip(s), 0.5)));
      break;
    case Op::Exp:
      contrib.emplace_back(in[0], mul(g, s));
      break;
    case Op::Sin:
      contrib.emplace_back(in[0], mul(g, cos(in[0])));
      break;
    case Op::Cos:
      contrib.emplace_back(in[0], neg(mul(g, sin(in[0]))));
      break;
    case Op::Sigmoid:
      contrib.emplace_back(in[0], mul(g, mul(s, add_const(neg(s), 1.0))));
      break;
    case Op::LeakyRelu: {
      Mat mask = (val(in[0]).array() >= 0.0).cast<double>() * (1.0 - n.attr) + n.attr;
      contrib.emplace_back(in[0], mul(g, constant(std::move(mask))));
      break;
    }
    case Op::Abs: {
      Mat mask = (val(in[0]).array() > 0.0).cast<double>() - (val(in[0]).array() < 0.0).cast<double>();
      contrib.emplace_back(in[0], mul(g, constant(std::move(mask))));
      break;
    }
    case Op::MaxConst: {
      Mat mask = (val(in[0]).array() > n.attr).cast<double>();
      contrib.emplace_back(in[0], mul(g, constant(std::move(mask))));
      break;
    }
    case Op::RowSum:
      contrib.emplace_back(in[0], repeat_cols(g, static_cast<int>(val(in[0]).cols())));
      break;
    case Op::ColSum:
      contrib.emplace_back(in[0], row_repeat(g, static_cast<int>(val(in[0]).rows())));
      break;
    case Op::SumAll:
      contrib.emplace_back(
          in[0], row_repeat(repeat_cols(g, static_cast<int>(val(in[0]).cols())),
                            static_cast<int>(val(in[0]).rows())));
      break;
    case Op::FoldSum:
      contrib.emplace_back(in[0], repeat_cols(g, n.ia));
      break;
    case Op::RepeatCols:
      contrib.emplace_back(in[0], fold_sum(g, n.ia));
      break;
    case Op::RowRepeat:
      contrib.emplace_back(in[0], col_sum(g));
      break;
    case Op::Matmul:
      contrib.emplace_back(in[0], matmul(g, transpose(in[1])));
      contrib.emplace_back(in[1], matmul(transpose(in[0]), g));
      break;
    case Op::Transpose:
      contrib.emplace_back(in[0], transpose(g));
      break;
    case Op::RepMatmul:
      contrib.emplace_back(in[0], rep_matmul(g, transpose(in[1]), n.ia));
      contrib.emplace_back(in[1], rep_outer(in[0], g, n.ia));
      break;
    case Op::RepOuter:
      contrib.emplace_back(in[0], rep_matmul(in[1], transpose(g), n.ia));
      contrib.emplace_back(in[1], rep_matmul(in[0], g, n.ia));
      break;
    case Op::SliceCols:
      contrib.emplace_back(in[0], pad_cols(g, n.ia, static_cast<int>(val(in[0]).cols())));
      break;
    case Op::PadCols:
      contrib.emplace_back(in[0], slice_cols(g, n.ia, static_cast<int>(val(in[0]).cols())));
      break;
    case Op::ConcatCols: {
      int off = 0;
      for (Slot p : in) {
        contrib.emplace_back(p, slice_cols(g, off, static_cast<int>(val(p).cols())));
        off += static_cast<int>(val(p).cols());
      }
      break;
    }
    case Op::PermuteCols: {
      auto inverse = std::make_shared<std::vector<int>>(val(in[0]).cols(), 0);
      for (std::size_t j = 0; j < n.idx->size(); ++j) (*inverse)[(*n.idx)[j]] = static_cast<int>(j);
      contrib.emplace_back(in[0], permute_cols(g, std::move(inverse)));
      break;
    }
    case Op::GatherRows:
      contrib.emplace_back(in[0], scatter_rows(g, n.idx, static_cast<int>(val(in[0]).rows())));
      break;
    case Op::ScatterRows:
      contrib.emplace_back(in[0], gather_rows(g, n.idx));
      break;
    case Op::Dtp: {
      const auto kernel = n.dtp;
      const DtpMode mode = static_cast<DtpMode>(n.ia);
      // Quadlinear closure: the partial of any contraction mode with respect
      // to any operand is again a contraction mode with operands permuted.
      switch (mode) {
        case DtpMode::Out:
          contrib.emplace_back(in[0], dtp(DtpMode::GradX, kernel, g, in[1], in[2]));
          contrib.emplace_back(in[1], dtp(DtpMode::GradY, kernel, g, in[0], in[2]));
          contrib.emplace_back(in[2], dtp(DtpMode::GradW, kernel, g, in[0], in[1],
                                          static_cast<int>(val(in[2]).rows())));
          break;
        case DtpMode::GradX:
          contrib.emplace_back(in[0], dtp(DtpMode::Out, kernel, g, in[1], in[2]));
          contrib.emplace_back(in[1], dtp(DtpMode::GradY, kernel, in[0], g, in[2]));
          contrib.emplace_back(in[2], dtp(DtpMode::GradW, kernel, in[0], g, in[1],
                                          static_cast<int>(val(in[2]).rows())));
          break;
        case DtpMode::GradY:
          contrib.emplace_back(in[0], dtp(DtpMode::Out, kernel, in[1], g, in[2]));
          contrib.emplace_back(in[1], dtp(DtpMode::GradX, kernel, in[0], g, in[2]));
          contrib.emplace_back(in[2], dtp(DtpMode::GradW, kernel, in[0], in[1], g,
                                          static_cast<int>(val(in[2]).rows())));
          break;
        case DtpMode::GradW:
          contrib.emplace_back(in[0], dtp(DtpMode::Out, kernel, in[1], in[2], g));
          contrib.emplace_back(in[1], dtp(DtpMode::GradX, kernel, in[0], in[2], g));
          contrib.emplace_back(in[2], dtp(DtpMode::GradY, kernel, in[0], in[1], g));
          break;
      }
      break;
    }
  }
}

}  // namespace eqt
