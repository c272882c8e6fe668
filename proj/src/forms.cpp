#include "tnn/forms.hpp"

#include <algorithm>

#include "tnn/error.hpp"
#include "tnn/kernels.hpp"

namespace tnn {

Integral Integral::interior(int d) {
  Integral in;
  in.measure.assign(d, Measure::Interior);
  in.weight.assign(d, 0);
  return in;
}

Integral Integral::face(int d, int dim, bool high) {
  Integral in = interior(d);
  in.measure[dim] = high ? Measure::High : Measure::Low;
  return in;
}

Forms::Forms(std::span<const QuadGrid> grids, std::span<const DimDomain> domain)
    : grids_(grids.begin(), grids.end()), domain_(domain.begin(), domain.end()) {
  if (grids_.size() != domain_.size())
    fail(ErrorKind::InvalidArgument, "Forms: grid and domain counts differ");
  const std::size_t d = grids_.size();
  x_.resize(d);
  vecs_.resize(d);
  vec_ids_.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    x_[i] = grids_[i].nodes;
    if (domain_[i].bounded()) {
      x_[i].push_back(domain_[i].a);
      x_[i].push_back(domain_[i].b);
    }
    vecs_[i].push_back(std::vector<double>(x_[i].size(), 1.0));
    vec_ids_[i]["1"] = 0;
  }
}

std::uint32_t Forms::vec(int i, const Expr1D& e) {
  const std::string key = e.str();
  auto it = vec_ids_[i].find(key);
  if (it != vec_ids_[i].end()) return it->second;
  return vec(i, key, eval_batch(e, x_[i]));
}

std::uint32_t Forms::vec(int i, const std::string& key, std::vector<double> values) {
  auto it = vec_ids_[i].find(key);
  if (it != vec_ids_[i].end()) return it->second;
  if (values.size() != x_[i].size())
    fail(ErrorKind::InvalidArgument, "Forms::vec: value count does not match the rows");
  const auto id = static_cast<std::uint32_t>(vecs_[i].size());
  vecs_[i].push_back(std::move(values));
  vec_ids_[i][key] = id;
  return id;
}

void Forms::bind(int set, const EvalTables* tables, bool trainable) {
  sets_[set] = SetInfo{tables, trainable};
  for (auto it = blocks_.begin(); it != blocks_.end();) {
    if (it->first.l.set == set || it->first.r.set == set)
      it = blocks_.erase(it);
    else
      ++it;
  }
}

int Forms::columns(int set) const {
  return static_cast<int>(sets_.at(set).tables->dims.at(0).val.cols());
}

void Forms::begin_tape(Tape* tape) {
  tape_ = tape;
  for (auto& [key, b] : blocks_) b.leaves.clear();
}

std::size_t Forms::width(const Operand& op) const {
  if (op.set < 0) return 1;
  return sets_.at(op.set).tables->dims.at(0).val.cols();
}

namespace {

std::size_t first_row(const DimTable& t, Measure m) {
  return m == Measure::Interior ? 0 : m == Measure::Low ? t.n : t.n + 1;
}

}  // namespace

void Forms::operand_rows(int i, Measure m, const Operand& op, Matrix& out) const {
  const std::size_t n = grids_[i].size();
  if (m != Measure::Interior && !domain_[i].bounded())
    fail(ErrorKind::InvalidArgument, "face integral on an unbounded dimension");
  const std::size_t begin = m == Measure::Interior ? 0 : m == Measure::Low ? n : n + 1;
  const std::size_t count = m == Measure::Interior ? n : 1;
  const std::vector<double>& v = vecs_[i][op.vec];
  if (op.set < 0) {
    out.resize(count, 1);
    for (std::size_t r = 0; r < count; ++r) out(r, 0) = v[begin + r];
    return;
  }
  const DimTable& t = sets_.at(op.set).tables->dims.at(i);
  const Matrix& ch = t.channel(op.channel);
  const std::size_t p = ch.cols();
  out.resize(count, p);
  for (std::size_t r = 0; r < count; ++r) {
    const double* src = ch.data() + (begin + r) * p;
    double* dst = out.data() + r * p;
    if (op.vec == 0)
      std::copy(src, src + p, dst);
    else
      for (std::size_t j = 0; j < p; ++j) dst[j] = src[j] * v[begin + r];
  }
}

void Forms::measure_weights(int i, Measure m, std::uint32_t w, std::vector<double>& out) const {
  const std::size_t n = grids_[i].size();
  const std::vector<double>& wv = vecs_[i][w];
  if (m == Measure::Interior) {
    out.resize(n);
    for (std::size_t r = 0; r < n; ++r)
      out[r] = w == 0 ? grids_[i].weights[r] : grids_[i].weights[r] * wv[r];
  } else {
    out.assign(1, wv[m == Measure::Low ? n : n + 1]);
  }
}

Forms::Block& Forms::block(int i, Measure m, std::uint32_t w, const Operand& l, const Operand& r,
                           bool& transposed) {
  transposed = r < l;
  Key key{i, m, w, transposed ? r : l, transposed ? l : r};
  auto it = blocks_.find(key);
  if (it != blocks_.end()) return it->second;
  Block b;
  Matrix L, R;
  std::vector<double> W;
  operand_rows(i, m, key.l, L);
  operand_rows(i, m, key.r, R);
  measure_weights(i, m, w, W);
  b.cols_l = L.cols();
  b.cols_r = R.cols();
  b.hi.resize(b.cols_l * b.cols_r);
  b.lo.resize(b.cols_l * b.cols_r);
  kernels::gram2(W.size(), L.data(), L.cols(), L.cols(), R.data(), R.cols(), R.cols(), W.data(),
                 b.hi.data(), b.lo.data(), b.cols_r);
  b.trainable = (key.l.set >= 0 && sets_.at(key.l.set).trainable) ||
                (key.r.set >= 0 && sets_.at(key.r.set).trainable);
  return blocks_.emplace(key, std::move(b)).first->second;
}

void Forms::ensure_leaves(Block& b) {
  if (!b.leaves.empty()) return;
  b.leaves.reserve(b.hi.size());
  for (double v : b.hi) b.leaves.push_back(tape_->variable(v));
}

Matrix Forms::gram(int i, Measure m, std::uint32_t w, int set_l, int ch_l, std::uint32_t vec_l,
                   int set_r, int ch_r, std::uint32_t vec_r) {
  const Operand l{set_l, set_l < 0 ? -1 : ch_l, vec_l};
  const Operand r{set_r, set_r < 0 ? -1 : ch_r, vec_r};
  bool tr = false;
  const Block& b = block(i, m, w, l, r, tr);
  const std::size_t rows = tr ? b.cols_r : b.cols_l;
  const std::size_t cols = tr ? b.cols_l : b.cols_r;
  Matrix g(rows, cols);
  for (std::size_t j = 0; j < rows; ++j)
    for (std::size_t k = 0; k < cols; ++k) {
      const std::size_t e = tr ? k * b.cols_r + j : j * b.cols_r + k;
      g(j, k) = b.hi[e] + b.lo[e];
    }
  return g;
}

PairSum Forms::pair_sum(std::span<const Term> a, std::span<const Term> b, const Integral& in,
                        Tape* tape) {
  const int d = dim();
  if (tape && tape != tape_) begin_tape(tape);
  const bool sym = a.data() == b.data() && a.size() == b.size();

  // Distinct operands per dimension on each side.
  struct Side {
    std::vector<std::vector<Operand>> ops;   // [dim] -> operands
    std::vector<std::uint32_t> op;           // [term * d + dim]
    std::vector<std::uint32_t> col;          // [term * d + dim]
  };
  auto resolve = [d](std::span<const Term> terms) {
    Side s;
    s.ops.resize(d);
    s.op.resize(terms.size() * d);
    s.col.resize(terms.size() * d);
    for (std::size_t t = 0; t < terms.size(); ++t) {
      if (static_cast<int>(terms[t].f.size()) != d)
        fail(ErrorKind::InvalidArgument, "pair_sum: term has the wrong number of factors");
      for (int i = 0; i < d; ++i) {
        const Factor& f = terms[t].f[i];
        Operand o = f.channel >= 0 ? Operand{terms[t].set, f.channel, f.vec} : Operand{-1, -1, f.vec};
        auto& list = s.ops[i];
        auto it = std::find(list.begin(), list.end(), o);
        s.op[t * d + i] = static_cast<std::uint32_t>(it - list.begin());
        if (it == list.end()) list.push_back(o);
        s.col[t * d + i] = f.channel >= 0 ? static_cast<std::uint32_t>(terms[t].index) : 0u;
      }
    }
    return s;
  };
  const Side sa = resolve(a);
  const Side sb = sym ? sa : resolve(b);

  struct Ref {
    Block* blk = nullptr;
    bool tr = false;
  };
  std::vector<std::vector<Ref>> refs(d);
  for (int i = 0; i < d; ++i) refs[i].resize(sa.ops[i].size() * sb.ops[i].size());

  Extended total = 0;
  std::vector<Var> nodes;
  std::vector<double> ones;
  std::vector<Var> parents;
  std::vector<double> hv(d), pre(d + 1), suf(d + 1), partials;
  std::vector<int> leaf_dim;
  parents.reserve(d);
  partials.reserve(d);

  for (std::size_t ta = 0; ta < a.size(); ++ta) {
    if (a[ta].coef == 0.0) continue;
    for (std::size_t tb = sym ? ta : 0; tb < b.size(); ++tb) {
      if (b[tb].coef == 0.0) continue;
      const double coef = a[ta].coef * b[tb].coef * ((sym && tb != ta) ? 2.0 : 1.0);
      Extended prod = coef;
      parents.clear();
      leaf_dim.clear();
      for (int i = 0; i < d; ++i) {
        const std::uint32_t oa = sa.op[ta * d + i];
        const std::uint32_t ob = sb.op[tb * d + i];
        Ref& ref = refs[i][oa * sb.ops[i].size() + ob];
        if (!ref.blk) ref.blk = &block(i, in.measure[i], in.weight[i], sa.ops[i][oa], sb.ops[i][ob], ref.tr);
        const Block& blk = *ref.blk;
        const std::uint32_t ca = sa.col[ta * d + i];
        const std::uint32_t cb = sb.col[tb * d + i];
        const std::size_t e = ref.tr ? cb * blk.cols_r + ca : ca * blk.cols_r + cb;
        prod *= static_cast<Extended>(blk.hi[e]) + static_cast<Extended>(blk.lo[e]);
        hv[i] = blk.hi[e];
        if (tape && blk.trainable) {
          ensure_leaves(*ref.blk);
          parents.push_back(blk.leaves[e]);
          leaf_dim.push_back(i);
        }
      }
      total += prod;
      if (tape && !parents.empty()) {
        pre[0] = 1.0;
        for (int i = 0; i < d; ++i) pre[i + 1] = pre[i] * hv[i];
        suf[d] = 1.0;
        for (int i = d; i-- > 0;) suf[i] = suf[i + 1] * hv[i];
        partials.clear();
        for (int i : leaf_dim) partials.push_back(coef * pre[i] * suf[i + 1]);
        nodes.push_back(tape->push(coef * pre[d], parents, partials));
      }
    }
  }
  PairSum out;
  out.value = total * static_cast<Extended>(in.scale);
  if (tape && !nodes.empty()) {
    ones.assign(nodes.size(), in.scale);
    out.var = tape->push(to_double(out.value), nodes, ones);
  } else {
    out.var = Var(to_double(out.value));
  }
  return out;
}

void Forms::scatter_adjoints(std::span<const double> adjoints,
                             std::map<int, std::vector<TableAdjoint>>& bar) const {
  const int d = dim();
  for (const auto& [key, b] : blocks_) {
    if (b.leaves.empty()) continue;
    Matrix gbar(b.cols_l, b.cols_r);
    bool any = false;
    for (std::size_t e = 0; e < b.leaves.size(); ++e) {
      gbar.data()[e] = adjoints[b.leaves[e].index()];
      any = any || gbar.data()[e] != 0.0;
    }
    if (!any) continue;
    Matrix L, R;
    std::vector<double> W;
    operand_rows(key.dim, key.measure, key.l, L);
    operand_rows(key.dim, key.measure, key.r, R);
    measure_weights(key.dim, key.measure, key.weight, W);
    const std::size_t rows = W.size();

    auto push_side = [&](const Operand& op, const Matrix& other, const Matrix& g) {
      // op_bar(r, j) = W(r) sum_k other(r, k) g(j, k)
      if (op.set < 0 || !sets_.at(op.set).trainable) return;
      const EvalTables& tables = *sets_.at(op.set).tables;
      auto& per_dim = bar[op.set];
      if (per_dim.size() != static_cast<std::size_t>(d)) {
        per_dim.resize(d);
        for (int i = 0; i < d; ++i)
          per_dim[i].reset(tables.dims[i].rows, tables.dims[i].val.cols());
      }
      const Matrix gt = g.transposed();
      Matrix ob(rows, g.rows());
      kernels::gemm_nn(rows, g.rows(), other.cols(), other.data(), other.cols(), gt.data(), gt.cols(),
                       ob.data(), ob.cols(), false);
      const DimTable& t = tables.dims[key.dim];
      const std::size_t r0 = first_row(t, key.measure);
      const std::vector<double>& v = vecs_[key.dim][op.vec];
      Matrix& dst = per_dim[key.dim].channel(op.channel);
      for (std::size_t r = 0; r < rows; ++r) {
        const double s = W[r] * (op.vec == 0 ? 1.0 : v[r0 + r]);
        for (std::size_t j = 0; j < ob.cols(); ++j) dst(r0 + r, j) += s * ob(r, j);
      }
    };
    push_side(key.l, R, gbar);
    push_side(key.r, L, gbar.transposed());
  }
}

}  // namespace tnn
