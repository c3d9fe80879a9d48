#include "simplex.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "probest/error.hpp"

namespace probest::detail {
namespace {

constexpr double kPivotTol = 1e-11;
constexpr double kCostTol = 1e-12;

// Dense tableau: rows 0..m-1 are constraints, row m is the reduced-cost row.
// The last column holds the right-hand side (and minus the objective value in
// the cost row).
class Tableau {
  using Dense = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

 public:
  Tableau(std::size_t rows, std::size_t vars)
      : m_(rows), n_(vars), t_(Dense::Zero(rows + 1, vars + 1)), basis_(rows) {}

  double& at(std::size_t r, std::size_t c) { return t_(r, c); }
  double& rhs(std::size_t r) { return t_(r, n_); }
  std::size_t basic(std::size_t row) const { return basis_[row]; }

  void pivot(std::size_t row, std::size_t col) {
    t_.row(row) /= t_(row, col);
    for (Eigen::Index r = 0; r < t_.rows(); ++r) {
      if (r == static_cast<Eigen::Index>(row)) continue;
      const double f = t_(r, col);
      if (f != 0.0) t_.row(r) -= f * t_.row(row);
    }
    basis_[row] = col;
  }

  // Minimizes the cost already loaded (and reduced) in row m. Uses the most
  // negative reduced cost and switches to Bland's rule after a long run of
  // degenerate pivots.
  void solve() {
    const std::size_t max_iter = 50 * (m_ + n_) + 1000;
    std::size_t degenerate_run = 0;
    bool bland = false;
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
      std::size_t enter = n_;
      double best = -kCostTol;
      for (std::size_t c = 0; c < n_; ++c) {
        const double rc = t_(m_, c);
        if (rc < best) {
          enter = c;
          if (bland) break;
          best = rc;
        }
      }
      if (enter == n_) return;

      std::size_t leave = m_;
      double ratio = std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < m_; ++r) {
        const double a = t_(r, enter);
        if (a <= kPivotTol) continue;
        const double q = t_(r, n_) / a;
        if (q < ratio - 1e-15 ||
            (q <= ratio + 1e-15 && leave < m_ && basis_[r] < basis_[leave])) {
          ratio = q;
          leave = r;
        }
      }
      if (leave == m_) throw FitError("separability LP is unbounded");
      degenerate_run = ratio <= 1e-15 ? degenerate_run + 1 : 0;
      if (degenerate_run > 2 * m_ + 50) bland = true;
      pivot(leave, enter);
    }
    throw FitError("separability LP did not converge");
  }

  double objective() const { return -t_(m_, n_); }

 private:
  std::size_t m_;
  std::size_t n_;
  Dense t_;
  std::vector<std::size_t> basis_;
};

}  // namespace

double max_box_margin(const Eigen::MatrixXd& signed_rows) {
  const auto n = static_cast<std::size_t>(signed_rows.rows());
  const auto p = static_cast<std::size_t>(signed_rows.cols());
  if (n == 0 || p == 0) throw InvalidArgument("separability check needs a non-empty matrix");

  // Variables: lambda_0..lambda_{n-1}, plus_0..plus_{p-1}, minus_0..minus_{p-1}.
  // Row j < p: sum_i lambda_i a_ij - plus_j + minus_j = 0.  Row p: sum lambda = 1.
  const std::size_t rows = p + 1;
  const std::size_t vars = n + 2 * p;
  const auto plus = [n](std::size_t j) { return n + j; };
  const auto minus = [n, p](std::size_t j) { return n + p + j; };

  Tableau tab(rows, vars);
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t i = 0; i < n; ++i) tab.at(j, i) = signed_rows(i, j);
    tab.at(j, plus(j)) = -1.0;
    tab.at(j, minus(j)) = 1.0;
  }
  for (std::size_t i = 0; i < n; ++i) tab.at(p, i) = 1.0;
  tab.rhs(p) = 1.0;

  // Feasible start: lambda_0 = 1 and, per coordinate, whichever of plus/minus
  // absorbs a_0j with a non-negative value.
  tab.pivot(p, 0);
  for (std::size_t j = 0; j < p; ++j) {
    if (tab.rhs(j) >= 0.0) {
      tab.pivot(j, minus(j));
    } else {
      tab.pivot(j, plus(j));
    }
  }

  // Cost row: objective sum(plus + minus), reduced against the basis.
  for (std::size_t j = 0; j < p; ++j) {
    tab.at(rows, plus(j)) += 1.0;
    tab.at(rows, minus(j)) += 1.0;
  }
  for (std::size_t j = 0; j < p; ++j) {
    const double cost = tab.at(rows, tab.basic(j));
    if (cost == 0.0) continue;
    for (std::size_t c = 0; c <= vars; ++c) tab.at(rows, c) -= cost * tab.at(j, c);
  }
  tab.solve();
  return std::max(0.0, tab.objective());
}

}  // namespace probest::detail
