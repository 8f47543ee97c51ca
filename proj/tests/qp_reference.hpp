#pragma once

// Accelerated projected gradient on the dual of
//   min 0.5 |z|^2  s.t.  y_q <u_q, z> >= 1,
// i.e. min 0.5 a'Ka - 1'a over a >= 0 with K_qr = y_q y_r <u_q, u_r>.
// Kept deliberately separate from the library solver.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace signopt::test {

struct ReferenceQp {
  std::vector<double> alpha;
  std::vector<double> z;
  double objective = 0.0;  // 0.5 |z|^2
  double pg_norm = 0.0;    // projected-gradient infinity norm at exit
  std::size_t iterations = 0;
};

inline ReferenceQp reference_qp(const std::vector<std::vector<double>>& u, const std::vector<int>& y,
                                double tol = 1e-12, std::size_t max_iters = 2000000) {
  const std::size_t q = u.size();
  const std::size_t d = u.front().size();
  std::vector<double> k(q * q);
  for (std::size_t a = 0; a < q; ++a)
    for (std::size_t b = 0; b < q; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < d; ++i) s += u[a][i] * u[b][i];
      k[a * q + b] = y[a] * y[b] * s;
    }

  // Lipschitz constant by power iteration, padded.
  std::vector<double> v(q, 1.0), w(q);
  double lip = 0.0;
  for (int it = 0; it < 500; ++it) {
    for (std::size_t a = 0; a < q; ++a) {
      w[a] = 0.0;
      for (std::size_t b = 0; b < q; ++b) w[a] += k[a * q + b] * v[b];
    }
    double n = 0.0;
    for (double x : w) n += x * x;
    n = std::sqrt(n);
    if (n == 0.0) break;
    lip = n;
    for (std::size_t a = 0; a < q; ++a) v[a] = w[a] / n;
  }
  lip = 1.01 * lip + 1e-12;

  auto grad = [&](const std::vector<double>& x, std::vector<double>& g) {
    for (std::size_t a = 0; a < q; ++a) {
      g[a] = -1.0;
      for (std::size_t b = 0; b < q; ++b) g[a] += k[a * q + b] * x[b];
    }
  };
  auto dual = [&](const std::vector<double>& x) {
    double s = 0.0;
    for (std::size_t a = 0; a < q; ++a) {
      double kx = 0.0;
      for (std::size_t b = 0; b < q; ++b) kx += k[a * q + b] * x[b];
      s += 0.5 * x[a] * kx - x[a];
    }
    return s;
  };

  std::vector<double> x(q, 0.0), x_prev(q, 0.0), yk(q, 0.0), g(q);
  double t = 1.0;
  double f_prev = dual(x);
  ReferenceQp out;
  std::size_t it = 0;
  for (; it < max_iters; ++it) {
    grad(yk, g);
    x_prev = x;
    for (std::size_t a = 0; a < q; ++a) x[a] = std::max(0.0, yk[a] - g[a] / lip);
    const double f = dual(x);
    if (f > f_prev) {  // restart momentum on an increase
      t = 1.0;
      yk = x;
    } else {
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      for (std::size_t a = 0; a < q; ++a) yk[a] = x[a] + ((t - 1.0) / t_next) * (x[a] - x_prev[a]);
      t = t_next;
    }
    f_prev = f;
    if (it % 50 == 0) {
      grad(x, g);
      double pg = 0.0, scale = 1.0;
      for (std::size_t a = 0; a < q; ++a) {
        const double p = x[a] > 0.0 ? std::abs(g[a]) : std::max(0.0, -g[a]);
        pg = std::max(pg, p);
        scale = std::max(scale, x[a]);
      }
      out.pg_norm = pg;
      if (pg * scale <= tol) break;
    }
  }
  out.iterations = it;
  out.alpha = x;
  out.z.assign(d, 0.0);
  for (std::size_t a = 0; a < q; ++a)
    for (std::size_t i = 0; i < d; ++i) out.z[i] += x[a] * y[a] * u[a][i];
  double zz = 0.0;
  for (double c : out.z) zz += c * c;
  out.objective = 0.5 * zz;
  return out;
}

}  // namespace signopt::test
