#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "eqt/so3.hpp"

namespace eqt {

/// One block of an irreps layout: `mul` channels of degree-`l` vectors,
/// optionally tagged with a parity (E(3) mode). Occupies mul*(2l+1) columns.
struct IrrepBlock {
  int mul = 0;
  int l = 0;
  std::optional<Parity> p;

  int rep_dim() const { return 2 * l + 1; }
  int dim() const { return mul * rep_dim(); }
  bool same_kind(const IrrepBlock& o) const { return l == o.l && p == o.p; }
};

/// Ordered list of irrep blocks describing a feature layout. Parses from and
/// prints to bracket notation: "[(128,0),(64,1),(32,2)]" or, with parities,
/// "[(128,0,e),(32,0,o)]". Either every block carries a parity or none does.
class Irreps {
 public:
  Irreps() = default;
  explicit Irreps(std::vector<IrrepBlock> blocks);

  static Irreps parse(const std::string& text);
  std::string str() const;

  int dim() const { return dim_; }
  int block_count() const { return static_cast<int>(blocks_.size()); }
  const IrrepBlock& block(int i) const { return blocks_[i]; }
  const std::vector<IrrepBlock>& blocks() const { return blocks_; }
  /// Column offset of block i in the flat layout.
  int offset(int i) const { return offsets_[i]; }
  bool has_parity() const;
  int max_degree() const;

  /// Index of the block with the given kind, or -1.
  int find(int l, std::optional<Parity> p) const;
  /// Multiplicity of the given kind (0 if absent).
  int multiplicity(int l, std::optional<Parity> p) const;
  /// Total number of channels across all blocks.
  int channel_count() const;

  /// True when block kinds are unique and sorted by (l, parity); the layout
  /// convention used throughout model code.
  bool is_canonical() const;
  /// Blocks merged and sorted by (l, parity); zero-mul blocks dropped.
  Irreps canonical() const;

  bool operator==(const Irreps& o) const;

  /// Column index of order m (0-based index into 2l+1) of channel c of
  /// block b.
  int col(int b, int c, int m_index) const { return offsets_[b] + c * blocks_[b].rep_dim() + m_index; }

 private:
  std::vector<IrrepBlock> blocks_;
  std::vector<int> offsets_;
  int dim_ = 0;
};

/// A rows x dim(irreps) value array laid out according to an Irreps
/// descriptor (rows are nodes or edges). Layout within a block is
/// channel-major: column = offset(block) + channel * (2l+1) + m.
struct IrrepsFeature {
  Irreps irreps;
  Eigen::MatrixXd data;

  IrrepsFeature() = default;
  IrrepsFeature(Irreps ir, Eigen::MatrixXd d);

  long rows() const { return data.rows(); }
  double at(long row, int block, int channel, int m_index) const {
    return data(row, irreps.col(block, channel, m_index));
  }
};

/// Block-diagonal transformation matrix for a whole irreps layout under a
/// rotation (and optional inversion), acting on feature rows from the right
/// as data * D^T or on column vectors as D * x.
Eigen::MatrixXd irreps_rep(const Irreps& irreps, const Eigen::Quaterniond& q,
                           bool invert = false);

}  // namespace eqt
