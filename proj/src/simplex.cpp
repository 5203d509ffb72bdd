#include "hapfl/simplex.hpp"

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <utility>

namespace hapfl {
namespace {

constexpr double kEps = 1e-9;

// Tableau simplex over the dense matrix D with m slack rows and n structural
// columns. Column n holds the phase-1 artificial, column n+1 the rhs. Row m is
// the phase-1 objective, row m+1 the phase-2 objective.
class Tableau {
 public:
  Tableau(const std::vector<std::vector<double>>& a, const std::vector<double>& b,
          const std::vector<double>& c, bool parallel)
      : m_(static_cast<int>(b.size())),
        n_(static_cast<int>(c.size())),
        parallel_(parallel),
        nonbasic_(n_ + 1),
        basic_(m_),
        d_(m_ + 2, std::vector<double>(n_ + 2, 0.0)) {
    for (int i = 0; i < m_; ++i) {
      if (static_cast<int>(a[i].size()) != n_) throw std::invalid_argument("lp row width mismatch");
      for (int j = 0; j < n_; ++j) d_[i][j] = a[i][j];
      basic_[i] = n_ + i;
      d_[i][n_] = -1.0;
      d_[i][n_ + 1] = b[i];
    }
    for (int j = 0; j < n_; ++j) {
      nonbasic_[j] = j;
      d_[m_][j] = -c[j];
    }
    nonbasic_[n_] = -1;
    d_[m_ + 1][n_] = 1.0;
  }

  LpResult run() {
    LpResult out;
    int worst = 0;
    for (int i = 1; i < m_; ++i) {
      if (d_[i][n_ + 1] < d_[worst][n_ + 1]) worst = i;
    }
    if (m_ > 0 && d_[worst][n_ + 1] < -kEps) {
      pivot(worst, n_);
      if (!optimize(2) || d_[m_ + 1][n_ + 1] < -kEps) {
        out.status = LpStatus::Infeasible;
        return out;
      }
      for (int i = 0; i < m_; ++i) {
        if (basic_[i] != -1) continue;
        int col = 0;
        for (int j = 1; j <= n_; ++j) {
          if (better(i, j, col)) col = j;
        }
        pivot(i, col);
      }
    }
    if (!optimize(1)) {
      out.status = LpStatus::Unbounded;
      return out;
    }
    out.status = LpStatus::Optimal;
    out.value = d_[m_][n_ + 1];
    out.x.assign(n_, 0.0);
    for (int i = 0; i < m_; ++i) {
      if (basic_[i] < n_) out.x[basic_[i]] = d_[i][n_ + 1];
    }
    return out;
  }

 private:
  bool better(int row, int j, int best) const {
    const double lhs = d_[row][j];
    const double rhs = d_[row][best];
    if (lhs != rhs) return lhs < rhs;
    return nonbasic_[j] < nonbasic_[best];
  }

  void pivot(int row, int col) {
    std::vector<double>& pr = d_[row];
    const double inv = 1.0 / pr[col];
    const int rows = m_ + 2;
    const int cols = n_ + 2;
#pragma omp parallel for if (parallel_ && rows > 64) schedule(static)
    for (int i = 0; i < rows; ++i) {
      if (i == row || std::fabs(d_[i][col]) <= kEps) continue;
      std::vector<double>& ri = d_[i];
      const double factor = ri[col] * inv;
      for (int j = 0; j < cols; ++j) ri[j] -= pr[j] * factor;
      ri[col] = pr[col] * factor;
    }
    for (int j = 0; j < cols; ++j) {
      if (j != col) pr[j] *= inv;
    }
    for (int i = 0; i < rows; ++i) {
      if (i != row) d_[i][col] *= -inv;
    }
    pr[col] = inv;
    std::swap(basic_[row], nonbasic_[col]);
  }

  // phase 2 keeps the artificial column in play, phase 1 excludes it
  bool optimize(int phase) {
    const int obj = m_ + phase - 1;
    for (;;) {
      int col = -1;
      for (int j = 0; j <= n_; ++j) {
        if (nonbasic_[j] == -phase) continue;
        if (col == -1 || better(obj, j, col)) col = j;
      }
      if (col == -1 || d_[obj][col] >= -kEps) return true;
      int row = -1;
      for (int i = 0; i < m_; ++i) {
        if (d_[i][col] <= kEps) continue;
        if (row == -1) {
          row = i;
          continue;
        }
        const double ri = d_[i][n_ + 1] / d_[i][col];
        const double rr = d_[row][n_ + 1] / d_[row][col];
        if (ri < rr || (ri == rr && basic_[i] < basic_[row])) row = i;
      }
      if (row == -1) return false;
      pivot(row, col);
    }
  }

  int m_;
  int n_;
  bool parallel_;
  std::vector<int> nonbasic_;
  std::vector<int> basic_;
  std::vector<std::vector<double>> d_;
};

}  // namespace

LpResult solve_lp(const std::vector<std::vector<double>>& a, const std::vector<double>& b,
                  const std::vector<double>& c, Exec mode) {
  if (a.size() != b.size()) throw std::invalid_argument("lp row count mismatch");
  Tableau tab(a, b, c, mode == Exec::Parallel && parallel_available());
  return tab.run();
}

}  // namespace hapfl
