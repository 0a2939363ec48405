#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace eqt {

using Slot = std::int32_t;

/// Primitive operation vocabulary of the tape. Every op has a backward rule
/// expressed in terms of other ops from this vocabulary, so backward passes
/// can themselves be recorded and differentiated again (needed when training
/// through forces).
enum class Op : std::uint8_t {
  Leaf,
  Constant,
  Add,
  Sub,
  Neg,
  Mul,          // elementwise, same shape
  Scale,       // x * attr
  AddConst,    // x + attr
  MulBcast,    // (N x C, N x 1): scale each row
  MulRowBcast, // (N x C, 1 x C): scale each column
  Recip,
  Sqrt,
  Exp,
  Sin,
  Cos,
  Sigmoid,
  LeakyRelu,   // slope in attr
  Abs,
  MaxConst,    // max(x, attr)
  RowSum,      // N x C -> N x 1
  ColSum,      // N x C -> 1 x C
  SumAll,      // N x C -> 1 x 1
  FoldSum,     // N x (k*r) -> N x k, sums consecutive groups of r = ia
  RepeatCols,  // N x k -> N x (k*r), repeats each column r = ia times
  RowRepeat,   // 1 x C -> N x C, N = ia
  Matmul,      // (N x K, K x M)
  Transpose,
  RepMatmul,   // (N x (Ci*r), Ci x Co) -> N x (Co*r), r = ia
  RepOuter,    // (N x (Ci*r), N x (Co*r)) -> Ci x Co, r = ia
  SliceCols,   // cols [ia, ia+ib)
  PadCols,     // embed at col ia of ib total columns
  ConcatCols,  // n-ary
  PermuteCols, // out col j = in col idx[j]
  GatherRows,  // out row e = in row idx[e]
  ScatterRows, // out row idx[e] += in row e; ia = output row count
  Dtp,         // path contraction; mode in ia (see DtpMode), ib = weight rows
};

/// Which tensor of the quadlinear path contraction sum_p w*C*x*y*cotangent
/// the Dtp node produces. Backward rules permute these roles.
enum class DtpMode : int { Out = 0, GradX = 1, GradY = 2, GradW = 3 };

/// One nonzero coupling coefficient C(i1,i2,i3) = v.
struct CgEntry {
  int i1, i2, i3;
  double v;
};

/// Compiled depth-wise tensor product: per path, the column ranges of the
/// participating channels plus the sparse coupling coefficients.
struct DtpKernel {
  struct Path {
    int off1 = 0, off2 = 0, off3 = 0;  // column offsets of the three channels
    int l1 = 0, l2 = 0, l3 = 0;
    int w = 0;  // weight slot index
    std::shared_ptr<const std::vector<CgEntry>> cg;
  };
  int dim1 = 0, dim2 = 0, dim3 = 0, n_weights = 0;
  std::vector<Path> paths;
};

struct Node {
  Op op = Op::Constant;
  std::vector<Slot> in;
  Eigen::MatrixXd val;
  bool requires_grad = false;
  double attr = 0.0;
  int ia = 0, ib = 0;
  std::shared_ptr<const std::vector<int>> idx;
  std::shared_ptr<const DtpKernel> dtp;
};

/// Append-only record of a computation over dense double matrices. Values
/// are computed eagerly on emission; backward() appends the gradient
/// computation to the same tape, which makes gradients differentiable in
/// turn. One tape per evaluation; not thread-safe.
class Tape {
 public:
  Slot leaf(Eigen::MatrixXd value, bool requires_grad = true);
  Slot constant(Eigen::MatrixXd value);
  Slot constant_scalar(double v) { return constant(Eigen::MatrixXd::Constant(1, 1, v)); }

  Slot add(Slot a, Slot b);
  Slot sub(Slot a, Slot b);
  Slot neg(Slot a);
  Slot mul(Slot a, Slot b);
  Slot scale(Slot a, double s);
  Slot add_const(Slot a, double c);
  Slot mul_bcast(Slot a, Slot col);
  Slot mul_row_bcast(Slot a, Slot row);
  Slot recip(Slot a);
  Slot sqrt(Slot a);
  Slot exp(Slot a);
  Slot sin(Slot a);
  Slot cos(Slot a);
  Slot sigmoid(Slot a);
  Slot silu(Slot a) { return mul(a, sigmoid(a)); }
  Slot leaky_relu(Slot a, double slope);
  Slot abs(Slot a);
  Slot max_const(Slot a, double c);
  Slot row_sum(Slot a);
  Slot col_sum(Slot a);
  Slot sum_all(Slot a);
  Slot fold_sum(Slot a, int r);
  Slot repeat_cols(Slot a, int r);
  Slot row_repeat(Slot a, int n);
  Slot matmul(Slot a, Slot b);
  Slot transpose(Slot a);
  Slot rep_matmul(Slot x, Slot w, int rep_dim);
  Slot rep_outer(Slot a, Slot b, int rep_dim);
  Slot slice_cols(Slot a, int off, int len);
  Slot pad_cols(Slot a, int off, int total);
  Slot concat_cols(const std::vector<Slot>& parts);
  Slot permute_cols(Slot a, std::shared_ptr<const std::vector<int>> perm);
  Slot gather_rows(Slot a, std::shared_ptr<const std::vector<int>> idx);
  Slot scatter_rows(Slot a, std::shared_ptr<const std::vector<int>> idx, int n_out);
  /// Path contraction. For GradW mode, w_rows gives the target weight row
  /// count (1 when the differentiated weights were shared across rows).
  Slot dtp(DtpMode mode, std::shared_ptr<const DtpKernel> kernel, Slot a, Slot b, Slot c,
           int w_rows = 0);

  const Eigen::MatrixXd& val(Slot s) const { return nodes_[s].val; }
  const Node& node(Slot s) const { return nodes_[s]; }
  std::size_t size() const { return nodes_.size(); }

  /// Reverse-mode sweep from a scalar output. Returns one gradient slot per
  /// requested input slot (zero-valued where the output does not depend on
  /// it). Gradient nodes are appended to this tape, so they may be reduced
  /// further or differentiated again.
  std::vector<Slot> backward(Slot output, const std::vector<Slot>& wrt);

 private:
  std::vector<Node> nodes_;

  Slot push(Node n);
  Slot emit(Op op, std::vector<Slot> in);
  void check(Slot s) const;
  void vjp(Slot node, Slot grad, std::vector<std::pair<Slot, Slot>>& contrib);
};

/// Gradients keyed by leaf name; absent key means zero gradient.
using GradientSet = std::map<std::string, Eigen::MatrixXd>;

}  // namespace eqt
