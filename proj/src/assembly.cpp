#include "tnn/assembly.hpp"

#include "tnn/error.hpp"

namespace tnn {
namespace {

void hadamard(Matrix& acc, const Matrix& g) {
  for (std::size_t e = 0; e < acc.storage().size(); ++e) acc.data()[e] *= g.data()[e];
}

void axpy(Matrix& acc, double s, const Matrix& g) {
  for (std::size_t e = 0; e < acc.storage().size(); ++e) acc.data()[e] += s * g.data()[e];
}

// prod_i Gram_i(test channel ch_l[i], trial channel ch_r[i] with data vec[i])
Matrix product_gram(Forms& forms, const Integral& in, int test_set, const std::vector<int>& ch_l,
                    int trial_set, const std::vector<int>& ch_r, const std::vector<std::uint32_t>& vec_r) {
  Matrix acc;
  for (int i = 0; i < forms.dim(); ++i) {
    Matrix g = forms.gram(i, in.measure[i], in.weight[i], test_set, ch_l[i], 0, trial_set, ch_r[i],
                          vec_r[i]);
    if (i == 0)
      acc = std::move(g);
    else
      hadamard(acc, g);
  }
  return acc;
}

std::vector<double> column(const Matrix& m) {
  std::vector<double> v(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) v[r] = m(r, 0);
  return v;
}

std::vector<std::uint32_t> data_vecs(Forms& forms, const SeparableFn& f, int k) {
  std::vector<std::uint32_t> v(forms.dim());
  for (int i = 0; i < forms.dim(); ++i) v[i] = forms.vec(i, f.factor(k, i));
  return v;
}

void check_operator(const Forms& forms, const EllipticOperator& op) {
  const std::size_t d = forms.dim();
  if (op.A.rows() != d || op.A.cols() != d)
    fail(ErrorKind::InvalidArgument, "operator matrix must be d x d");
  if (!op.b.zero() && op.b.dim() != forms.dim())
    fail(ErrorKind::InvalidArgument, "reaction coefficient has the wrong dimension");
}

}  // namespace

Matrix assemble_cross_stiffness(Forms& forms, int test_set, int trial_set, const EllipticOperator& op) {
  check_operator(forms, op);
  const int d = forms.dim();
  const Integral in = Integral::interior(d);
  const std::vector<std::uint32_t> ones(d, 0);
  Matrix acc;
  auto add = [&](double s, const Matrix& g) {
    if (acc.empty()) acc.resize(g.rows(), g.cols());
    axpy(acc, s, g);
  };
  for (int s = 0; s < d; ++s)
    for (int t = 0; t < d; ++t) {
      const double a = op.A(s, t);
      if (a == 0.0) continue;
      // A_st * d_t trial * d_s test
      std::vector<int> cl(d, 0), cr(d, 0);
      cl[s] = 1;
      cr[t] = 1;
      if (s == t) cl[s] = cr[s] = 1;
      add(a, product_gram(forms, in, test_set, cl, trial_set, cr, ones));
    }
  for (int k = 0; k < op.b.rank(); ++k) {
    const std::vector<int> zero(d, 0);
    add(op.b.coef(k), product_gram(forms, in, test_set, zero, trial_set, zero, data_vecs(forms, op.b, k)));
  }
  if (acc.empty()) {
    const std::size_t p = forms.columns(test_set);
    acc.resize(p, forms.columns(trial_set));
  }
  return acc;
}

Matrix assemble_stiffness(Forms& forms, int set, const EllipticOperator& op) {
  Matrix a = assemble_cross_stiffness(forms, set, set, op);
  // exact symmetry: the two triangles come from transposed Gram blocks
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = r + 1; c < a.cols(); ++c) {
      const double m = 0.5 * (a(r, c) + a(c, r));
      a(r, c) = m;
      a(c, r) = m;
    }
  return a;
}

Matrix assemble_mass(Forms& forms, int set) {
  const int d = forms.dim();
  const std::vector<int> zero(d, 0);
  return product_gram(forms, Integral::interior(d), set, zero, set, zero,
                      std::vector<std::uint32_t>(d, 0));
}

std::vector<double> assemble_load(Forms& forms, int set, const SeparableFn& f) {
  const int d = forms.dim();
  std::vector<double> out(forms.columns(set), 0.0);
  const Integral in = Integral::interior(d);
  for (int k = 0; k < f.rank(); ++k) {
    const std::vector<int> zero(d, 0);
    const std::vector<double> col = column(product_gram(forms, in, set, zero, -1, zero, data_vecs(forms, f, k)));
    for (std::size_t m = 0; m < out.size(); ++m) out[m] += f.coef(k) * col[m];
  }
  return out;
}

std::vector<double> assemble_neumann_load(Forms& forms, int set, const std::vector<FaceData>& faces) {
  const int d = forms.dim();
  std::vector<double> out(forms.columns(set), 0.0);
  for (const FaceData& face : faces) {
    const Integral in = Integral::face(d, face.dim, face.high);
    for (int k = 0; k < face.g.rank(); ++k) {
      const std::vector<int> zero(d, 0);
      const std::vector<double> col =
          column(product_gram(forms, in, set, zero, -1, zero, data_vecs(forms, face.g, k)));
      for (std::size_t m = 0; m < out.size(); ++m) out[m] += face.g.coef(k) * col[m];
    }
  }
  return out;
}

Matrix assemble_boundary_mass(Forms& forms, int set, const std::vector<DimDomain>& domain) {
  const int d = forms.dim();
  const std::vector<int> zero(d, 0);
  const std::vector<std::uint32_t> ones(d, 0);
  Matrix acc;
  for (int i = 0; i < d; ++i) {
    if (!domain[i].bounded()) continue;
    for (bool high : {false, true}) {
      Matrix g = product_gram(forms, Integral::face(d, i, high), set, zero, set, zero, ones);
      if (acc.empty()) acc.resize(g.rows(), g.cols());
      axpy(acc, 1.0, g);
    }
  }
  return acc;
}

std::vector<double> assemble_boundary_load(Forms& forms, int set, const SeparableFn& g,
                                           const std::vector<DimDomain>& domain) {
  std::vector<FaceData> faces;
  for (int i = 0; i < forms.dim(); ++i) {
    if (!domain[i].bounded()) continue;
    faces.push_back({i, false, g});
    faces.push_back({i, true, g});
  }
  return assemble_neumann_load(forms, set, faces);
}

}  // namespace tnn
