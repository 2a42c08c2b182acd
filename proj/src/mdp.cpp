#include "gbetd/mdp.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

namespace gbetd {

Vector TabularMdp::expected_reward() const {
  Vector r(n_states, 0.0);
  for (int s = 0; s < n_states; ++s) {
    double acc = 0.0;
    for (int t = 0; t < n_states; ++t) acc += p_target(s, t) * reward(s, t);
    r[s] = acc;
  }
  return r;
}

double FeatureMap::max_feature_norm() const {
  double best = 0.0;
  for (int s = 0; s < phi.rows(); ++s) best = std::max(best, norm2(phi.row(s)));
  return best;
}

FeatureMap make_feature_map(Matrix phi) {
  FeatureMap f;
  f.n_features = phi.cols();
  f.column_rank = numeric_rank(jacobi_svd(phi));
  f.phi = std::move(phi);
  return f;
}

namespace {

constexpr double kRowSumTol = 1e-12;

Matrix discounted_target(const TabularMdp& mdp) {
  Matrix pg(mdp.n_states, mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int t = 0; t < mdp.n_states; ++t) pg(s, t) = mdp.p_target(s, t) * mdp.discount[t];
  return pg;
}

// Strong connectivity of the support graph: every node reachable from node 0
// in the graph and in its reverse.
bool strongly_connected(const Matrix& p) {
  const int n = p.rows();
  if (n == 0) return false;
  auto reaches_all = [&](bool forward) {
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < n; ++v) {
        const double w = forward ? p(u, v) : p(v, u);
        if (w > 0.0 && !seen[v]) {
          seen[v] = 1;
          ++count;
          stack.push_back(v);
        }
      }
    }
    return count == n;
  };
  return reaches_all(true) && reaches_all(false);
}

void check_dimensions(const TabularMdp& mdp) {
  const int n = mdp.n_states;
  if (n <= 0) throw std::invalid_argument("mdp: n_states must be positive");
  auto square = [n](const Matrix& m) { return m.rows() == n && m.cols() == n; };
  if (!square(mdp.p_target) || !square(mdp.p_behavior) || !square(mdp.reward))
    throw std::invalid_argument("mdp: matrix dimensions inconsistent with n_states");
  if (static_cast<int>(mdp.discount.size()) != n)
    throw std::invalid_argument("mdp: discount vector length mismatch");
}

}  // namespace

ValidationReport validate(const TabularMdp& mdp) {
  check_dimensions(mdp);
  ValidationReport rep;
  std::ostringstream detail;

  rep.rows_stochastic = true;
  for (const Matrix* m : {&mdp.p_target, &mdp.p_behavior}) {
    for (int s = 0; s < mdp.n_states; ++s) {
      double sum = 0.0;
      for (int t = 0; t < mdp.n_states; ++t) {
        sum += (*m)(s, t);
        if ((*m)(s, t) < 0.0) rep.rows_stochastic = false;
      }
      rep.max_row_sum_error = std::max(rep.max_row_sum_error, std::abs(sum - 1.0));
    }
  }
  if (rep.max_row_sum_error > kRowSumTol) rep.rows_stochastic = false;
  if (!rep.rows_stochastic) detail << "row sums off by " << rep.max_row_sum_error << "; ";

  rep.absolutely_continuous = true;
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int t = 0; t < mdp.n_states; ++t) {
      if (mdp.p_behavior(s, t) == 0.0 && mdp.p_target(s, t) > 0.0) {
        rep.absolutely_continuous = false;
        detail << "P(" << s << "," << t << ") > 0 with P°(" << s << "," << t << ") = 0; ";
      }
    }
  }

  bool discounts_in_range = true;
  for (double g : mdp.discount) {
    if (g < 0.0 || g > 1.0) {
      detail << "discount outside [0,1]; ";
      discounts_in_range = false;
    }
  }
  rep.sigma_p_gamma = spectral_radius_power(discounted_target(mdp));
  rep.discounted_spectral_ok = discounts_in_range && rep.sigma_p_gamma < 1.0;
  if (!rep.discounted_spectral_ok) detail << "sigma(P Gamma) = " << rep.sigma_p_gamma << "; ";

  rep.behavior_irreducible = strongly_connected(mdp.p_behavior);
  if (!rep.behavior_irreducible) detail << "behavior chain reducible; ";

  rep.detail = detail.str();
  return rep;
}

double importance_ratio(const TabularMdp& mdp, int s, int s_next) {
  const double p = mdp.p_target(s, s_next);
  const double po = mdp.p_behavior(s, s_next);
  if (po == 0.0) {
    if (p == 0.0) return 0.0;
    throw std::domain_error("importance_ratio: P > 0 on a transition with P° = 0");
  }
  return p / po;
}

Matrix importance_ratio_matrix(const TabularMdp& mdp) {
  Matrix rho(mdp.n_states, mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int t = 0; t < mdp.n_states; ++t) rho(s, t) = importance_ratio(mdp, s, t);
  return rho;
}

Vector value_function(const TabularMdp& mdp) {
  check_dimensions(mdp);
  const Matrix pg = discounted_target(mdp);
  Matrix a = Matrix::identity(mdp.n_states);
  a -= pg;
  const Vector r_pi = mdp.expected_reward();
  Vector v;
  try {
    v = solve_linear(a, r_pi);
  } catch (const SingularMatrixError&) {
    throw std::domain_error("value_function: I - P Gamma is singular");
  }
  Vector resid = v - (r_pi + pg * v);
  if (norm_inf(resid) >= 1e-10)
    throw std::domain_error("value_function: Bellman residual exceeds 1e-10");
  return v;
}

Vector behavior_stationary_dist(const TabularMdp& mdp) {
  check_dimensions(mdp);
  if (!strongly_connected(mdp.p_behavior))
    throw std::domain_error("behavior_stationary_dist: behavior chain is reducible");
  const int n = mdp.n_states;
  // Solve (P°^T - I) zeta = 0 with the last equation replaced by sum(zeta) = 1.
  Matrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = mdp.p_behavior(j, i) - (i == j ? 1.0 : 0.0);
  Vector b(n, 0.0);
  for (int j = 0; j < n; ++j) a(n - 1, j) = 1.0;
  b[n - 1] = 1.0;
  Vector zeta = solve_linear(a, b);
  for (double& z : zeta)
    if (std::abs(z) < 1e-15) z = 0.0;
  double sum = 0.0;
  for (double z : zeta) {
    if (z <= 0.0) throw std::domain_error("behavior_stationary_dist: nonpositive entry");
    sum += z;
  }
  for (double& z : zeta) z /= sum;
  return zeta;
}

namespace {

Matrix read_matrix(std::istream& in, int rows, int cols, const std::string& what) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      if (!(in >> m(i, j)))
        throw std::runtime_error("mdp file: truncated " + what + " section");
  return m;
}

std::string next_token(std::istream& in) {
  std::string tok;
  while (in >> tok) {
    if (tok[0] == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    return tok;
  }
  return {};
}

}  // namespace

MdpFile read_mdp(std::istream& in) {
  MdpFile out;
  int n = -1, k = -1;
  Matrix phi;
  bool have_pt = false, have_pb = false, have_r = false, have_g = false, have_phi = false;

  for (std::string key = next_token(in); !key.empty(); key = next_token(in)) {
    if (key == "n_states") {
      if (!(in >> n) || n <= 0) throw std::runtime_error("mdp file: bad n_states");
      out.mdp.n_states = n;
    } else if (key == "n_features") {
      if (!(in >> k) || k <= 0) throw std::runtime_error("mdp file: bad n_features");
    } else if (key == "p_target" || key == "p_behavior" || key == "reward" ||
               key == "discount" || key == "features") {
      if (n <= 0) throw std::runtime_error("mdp file: n_states must come first");
      if (key == "p_target") {
        out.mdp.p_target = read_matrix(in, n, n, key);
        have_pt = true;
      } else if (key == "p_behavior") {
        out.mdp.p_behavior = read_matrix(in, n, n, key);
        have_pb = true;
      } else if (key == "reward") {
        out.mdp.reward = read_matrix(in, n, n, key);
        have_r = true;
      } else if (key == "discount") {
        Matrix g = read_matrix(in, 1, n, key);
        out.mdp.discount = g.row(0);
        have_g = true;
      } else {
        if (k <= 0) throw std::runtime_error("mdp file: n_features must precede features");
        phi = read_matrix(in, n, k, key);
        have_phi = true;
      }
    } else {
      throw std::runtime_error("mdp file: unknown section '" + key + "'");
    }
  }
  if (!(have_pt && have_pb && have_r && have_g))
    throw std::runtime_error("mdp file: missing required section");
  if (!have_phi) phi = Matrix::identity(n);  // tabular features by default
  out.features = make_feature_map(std::move(phi));
  return out;
}

MdpFile load_mdp_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mdp file: " + path);
  return read_mdp(in);
}

namespace {
void write_matrix(std::ostream& out, const Matrix& m) {
  out.precision(17);
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) out << (j ? " " : "") << m(i, j);
    out << "\n";
  }
}
}  // namespace

void write_mdp(std::ostream& out, const TabularMdp& mdp, const FeatureMap& features) {
  out << "n_states " << mdp.n_states << "\n";
  out << "n_features " << features.n_features << "\n";
  out << "p_target\n";
  write_matrix(out, mdp.p_target);
  out << "p_behavior\n";
  write_matrix(out, mdp.p_behavior);
  out << "reward\n";
  write_matrix(out, mdp.reward);
  out << "discount\n";
  out.precision(17);
  for (int s = 0; s < mdp.n_states; ++s) out << (s ? " " : "") << mdp.discount[s];
  out << "\nfeatures\n";
  write_matrix(out, features.phi);
}

}  // namespace gbetd
