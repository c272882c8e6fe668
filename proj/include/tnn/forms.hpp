#pragma once

// Separable integrands. A Term is coef * prod_i F_i(x_i) where each factor is
// a basis column channel (value, first or second derivative), a data vector,
// or their product. Integrals of products of two term sums expand into pairs,
// and every pair integral is a product of one-dimensional weighted dot
// products. Those dots are kept per dimension as compensated Gram blocks and
// shared by all pairs, by assembly, and by the error metrics.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "tnn/autodiff.hpp"
#include "tnn/expr.hpp"
#include "tnn/matrix.hpp"
#include "tnn/quadrature.hpp"
#include "tnn/tnn.hpp"

namespace tnn {

#if defined(__SIZEOF_FLOAT128__) && !defined(__aarch64__)
using Extended = __float128;
#else
using Extended = long double;
#endif

enum class Measure : std::uint8_t { Interior, Low, High };

struct Factor {
  std::int8_t channel = -1;  // -1: no basis factor
  std::uint32_t vec = 0;     // data multiplier, 0 is the constant 1
};

struct Term {
  double coef = 1.0;
  int set = -1;    // basis set, -1 for a pure data term
  int index = 0;   // basis column within the set
  std::vector<Factor> f;
};

struct Integral {
  std::vector<Measure> measure;
  std::vector<std::uint32_t> weight;  // extra weight vector per dimension
  double scale = 1.0;

  static Integral interior(int d);
  /// Face x_dim = a_dim (high = false) or b_dim.
  static Integral face(int d, int dim, bool high);
};

struct PairSum {
  Extended value = 0;
  Var var;  // recorded on the tape when one was given
};

class Forms {
 public:
  Forms() = default;
  Forms(std::span<const QuadGrid> grids, std::span<const DimDomain> domain);

  int dim() const noexcept { return static_cast<int>(grids_.size()); }
  std::size_t interior_rows(int i) const { return grids_[i].size(); }
  const std::vector<double>& rows(int i) const { return x_[i]; }

  /// Data vector of an expression sampled at the rows of dimension i; shared by key.
  std::uint32_t vec(int i, const Expr1D& e);
  std::uint32_t vec(int i, const std::string& key, std::vector<double> values);
  const std::vector<double>& vec_values(int i, std::uint32_t id) const { return vecs_[i][id]; }

  /// Registers the tables of a basis set. Gram blocks involving the set are
  /// dropped whenever the set is (re)bound.
  void bind(int set, const EvalTables* tables, bool trainable);
  bool trainable(int set) const { return sets_.at(set).trainable; }
  int columns(int set) const;

  /// All leaves created from now on live on this tape; clears previous leaves.
  void begin_tape(Tape* tape);

  /// integral of (sum_a)(sum_b) under the given measure.
  PairSum pair_sum(std::span<const Term> a, std::span<const Term> b, const Integral& in,
                   Tape* tape = nullptr);

  /// Compensated Gram value (hi + lo rounded to double) of one dimension.
  /// Left and right are (set, channel, vec); set -1 means a data column.
  Matrix gram(int i, Measure m, std::uint32_t w, int set_l, int ch_l, std::uint32_t vec_l,
              int set_r, int ch_r, std::uint32_t vec_r);

  /// Adds d(loss)/d(table) for every trainable set, using the tape adjoints.
  /// bar[set] holds one TableAdjoint per dimension.
  void scatter_adjoints(std::span<const double> adjoints,
                        std::map<int, std::vector<TableAdjoint>>& bar) const;

  std::size_t block_count() const noexcept { return blocks_.size(); }

 private:
  struct Operand {
    int set = -1;
    int channel = -1;
    std::uint32_t vec = 0;
    auto tie() const { return std::tie(set, channel, vec); }
    friend bool operator<(const Operand& a, const Operand& b) { return a.tie() < b.tie(); }
    friend bool operator==(const Operand& a, const Operand& b) { return a.tie() == b.tie(); }
  };
  struct Key {
    int dim;
    Measure measure;
    std::uint32_t weight;
    Operand l, r;
    auto tie() const { return std::tie(dim, measure, weight, l, r); }
    friend bool operator<(const Key& a, const Key& b) { return a.tie() < b.tie(); }
  };
  struct Block {
    std::size_t cols_l = 0, cols_r = 0;
    std::vector<double> hi, lo;
    std::vector<Var> leaves;  // empty unless a trainable operand is involved
    bool trainable = false;
  };
  struct SetInfo {
    const EvalTables* tables = nullptr;
    bool trainable = false;
  };

  std::size_t width(const Operand& op) const;
  void operand_rows(int i, Measure m, const Operand& op, Matrix& out) const;
  void measure_weights(int i, Measure m, std::uint32_t w, std::vector<double>& out) const;
  /// Canonical block for (l, r); transposed tells whether (l, r) is stored as (r, l).
  Block& block(int i, Measure m, std::uint32_t w, const Operand& l, const Operand& r,
               bool& transposed);
  void ensure_leaves(Block& b);

  std::vector<QuadGrid> grids_;
  std::vector<DimDomain> domain_;
  std::vector<std::vector<double>> x_;
  std::vector<std::vector<std::vector<double>>> vecs_;
  std::vector<std::map<std::string, std::uint32_t>> vec_ids_;
  std::map<int, SetInfo> sets_;
  std::map<Key, Block> blocks_;
  Tape* tape_ = nullptr;
};

inline double to_double(Extended v) { return static_cast<double>(v); }

}  // namespace tnn
