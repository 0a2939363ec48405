#include "eqt/irreps.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace eqt {

namespace {

int kind_rank(const IrrepBlock& b) {
  // parity order within a degree: even before odd
  return b.l * 4 + (b.p ? (*b.p == Parity::Even ? 1 : 2) : 0);
}

}  // namespace

Irreps::Irreps(std::vector<IrrepBlock> blocks) : blocks_(std::move(blocks)) {
  bool any_parity = false, any_bare = false;
  offsets_.reserve(blocks_.size());
  for (const auto& b : blocks_) {
    if (b.mul < 0 || b.l < 0) throw std::invalid_argument("irreps: negative mul or degree");
    (b.p ? any_parity : any_bare) = true;
    offsets_.push_back(dim_);
    dim_ += b.dim();
  }
  if (any_parity && any_bare)
    throw std::invalid_argument("irreps: mixed parity and parity-free blocks");
}

Irreps Irreps::parse(const std::string& text) {
  std::vector<IrrepBlock> blocks;
  size_t i = 0;
  auto skip_ws = [&] { while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i; };
  auto expect = [&](char c) {
    skip_ws();
    if (i >= text.size() || text[i] != c)
      throw std::invalid_argument("irreps parse error: expected '" + std::string(1, c) +
                                  "' at position " + std::to_string(i) + " in \"" + text + "\"");
    ++i;
  };
  auto read_int = [&]() -> int {
    skip_ws();
    size_t start = i;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
    if (i == start)
      throw std::invalid_argument("irreps parse error: expected integer at position " +
                                  std::to_string(i) + " in \"" + text + "\"");
    return std::stoi(text.substr(start, i - start));
  };
  expect('[');
  skip_ws();
  if (i < text.size() && text[i] == ']') {
    ++i;
    return Irreps(blocks);
  }
  while (true) {
    expect('(');
    IrrepBlock b;
    b.mul = read_int();
    expect(',');
    b.l = read_int();
    skip_ws();
    if (i < text.size() && text[i] == ',') {
      ++i;
      skip_ws();
      if (i >= text.size()) throw std::invalid_argument("irreps parse error: truncated parity");
      b.p = parity_from_char(text[i]);
      ++i;
    }
    expect(')');
    blocks.push_back(b);
    skip_ws();
    if (i < text.size() && text[i] == ',') {
      ++i;
      continue;
    }
    break;
  }
  expect(']');
  skip_ws();
  if (i != text.size()) throw std::invalid_argument("irreps parse error: trailing characters");
  return Irreps(blocks);
}

std::string Irreps::str() const {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < blocks_.size(); ++i) {
    if (i) os << ',';
    os << '(' << blocks_[i].mul << ',' << blocks_[i].l;
    if (blocks_[i].p) os << ',' << parity_char(*blocks_[i].p);
    os << ')';
  }
  os << ']';
  return os.str();
}

bool Irreps::has_parity() const {
  for (const auto& b : blocks_)
    if (b.p) return true;
  return false;
}

int Irreps::max_degree() const {
  int m = 0;
  for (const auto& b : blocks_) m = std::max(m, b.l);
  return m;
}

int Irreps::find(int l, std::optional<Parity> p) const {
  for (size_t i = 0; i < blocks_.size(); ++i)
    if (blocks_[i].l == l && blocks_[i].p == p) return static_cast<int>(i);
  return -1;
}

int Irreps::multiplicity(int l, std::optional<Parity> p) const {
  int mul = 0;
  for (const auto& b : blocks_)
    if (b.l == l && b.p == p) mul += b.mul;
  return mul;
}

int Irreps::channel_count() const {
  int n = 0;
  for (const auto& b : blocks_) n += b.mul;
  return n;
}

bool Irreps::is_canonical() const {
  for (size_t i = 0; i + 1 < blocks_.size(); ++i)
    if (kind_rank(blocks_[i]) >= kind_rank(blocks_[i + 1])) return false;
  for (const auto& b : blocks_)
    if (b.mul == 0) return false;
  return true;
}

Irreps Irreps::canonical() const {
  std::vector<IrrepBlock> sorted = blocks_;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const IrrepBlock& a, const IrrepBlock& b) { return kind_rank(a) < kind_rank(b); });
  std::vector<IrrepBlock> merged;
  for (const auto& b : sorted) {
    if (b.mul == 0) continue;
    if (!merged.empty() && merged.back().same_kind(b))
      merged.back().mul += b.mul;
    else
      merged.push_back(b);
  }
  return Irreps(merged);
}

bool Irreps::operator==(const Irreps& o) const {
  if (blocks_.size() != o.blocks_.size()) return false;
  for (size_t i = 0; i < blocks_.size(); ++i) {
    if (blocks_[i].mul != o.blocks_[i].mul || !blocks_[i].same_kind(o.blocks_[i])) return false;
  }
  return true;
}

IrrepsFeature::IrrepsFeature(Irreps ir, Eigen::MatrixXd d) : irreps(std::move(ir)), data(std::move(d)) {
  if (data.cols() != irreps.dim())
    throw std::invalid_argument("irreps feature: data width " + std::to_string(data.cols()) +
                                " does not match layout dimension " + std::to_string(irreps.dim()));
}

Eigen::MatrixXd irreps_rep(const Irreps& irreps, const Eigen::Quaterniond& q, bool invert) {
  const So3Tables& tables = so3_tables(std::max(irreps.max_degree(), 1));
  Eigen::MatrixXd rep = Eigen::MatrixXd::Zero(irreps.dim(), irreps.dim());
  for (int i = 0; i < irreps.block_count(); ++i) {
    const IrrepBlock& b = irreps.block(i);
    Eigen::MatrixXd d = tables.wigner(b.l, q);
    if (invert) {
      const Parity p = b.p ? *b.p : sh_parity(b.l);
      if (p == Parity::Odd) d = -d;
    }
    for (int c = 0; c < b.mul; ++c) {
      const int off = irreps.offset(i) + c * b.rep_dim();
      rep.block(off, off, b.rep_dim(), b.rep_dim()) = d;
    }
  }
  return rep;
}

}  // namespace eqt
