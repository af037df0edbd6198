#pragma once

// Small dense vectors/matrices with inline storage. All state spaces in this
// project have dimension <= kMaxDim (torus dim + 1), so fixed capacity keeps
// the flight and sampling loops free of heap traffic.

#include <array>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace rb {

inline constexpr int kMaxDim = 8;

struct Vec {
  int n = 0;
  std::array<double, kMaxDim> a{};

  Vec() = default;
  explicit Vec(int dim) : n(dim) { assert(dim >= 0 && dim <= kMaxDim); }
  Vec(std::initializer_list<double> xs) : n(static_cast<int>(xs.size())) {
    assert(n <= kMaxDim);
    int i = 0;
    for (double x : xs) a[i++] = x;
  }
  static Vec zero(int dim) { return Vec(dim); }

  double operator[](int i) const { return a[static_cast<size_t>(i)]; }
  double& operator[](int i) { return a[static_cast<size_t>(i)]; }
  int size() const { return n; }
  double back() const { return a[static_cast<size_t>(n - 1)]; }
  double& back() { return a[static_cast<size_t>(n - 1)]; }

  std::vector<double> to_std() const { return std::vector<double>(a.begin(), a.begin() + n); }
  static Vec from_std(const std::vector<double>& v) {
    Vec r(static_cast<int>(v.size()));
    for (int i = 0; i < r.n; ++i) r[i] = v[static_cast<size_t>(i)];
    return r;
  }
};

inline Vec operator+(const Vec& x, const Vec& y) {
  assert(x.n == y.n);
  Vec r(x.n);
  for (int i = 0; i < x.n; ++i) r[i] = x[i] + y[i];
  return r;
}
inline Vec operator-(const Vec& x, const Vec& y) {
  assert(x.n == y.n);
  Vec r(x.n);
  for (int i = 0; i < x.n; ++i) r[i] = x[i] - y[i];
  return r;
}
inline Vec operator*(double s, const Vec& x) {
  Vec r(x.n);
  for (int i = 0; i < x.n; ++i) r[i] = s * x[i];
  return r;
}
inline Vec operator-(const Vec& x) { return -1.0 * x; }
inline Vec& operator+=(Vec& x, const Vec& y) {
  assert(x.n == y.n);
  for (int i = 0; i < x.n; ++i) x[i] += y[i];
  return x;
}

inline double dot(const Vec& x, const Vec& y) {
  assert(x.n == y.n);
  double s = 0;
  for (int i = 0; i < x.n; ++i) s += x[i] * y[i];
  return s;
}
inline double norm2(const Vec& x) { return dot(x, x); }
inline double norm(const Vec& x) { return std::sqrt(norm2(x)); }

inline Vec basis(int n, int i) {
  Vec e(n);
  e[i] = 1.0;
  return e;
}

// Concatenate (used to form xi = (w, v) from hidden and observable parts).
inline Vec concat(const Vec& x, const Vec& y) {
  Vec r(x.n + y.n);
  for (int i = 0; i < x.n; ++i) r[i] = x[i];
  for (int i = 0; i < y.n; ++i) r[x.n + i] = y[i];
  return r;
}
inline Vec head(const Vec& x, int k) {
  Vec r(k);
  for (int i = 0; i < k; ++i) r[i] = x[i];
  return r;
}
inline Vec tail(const Vec& x, int k) {
  Vec r(k);
  for (int i = 0; i < k; ++i) r[i] = x[x.n - k + i];
  return r;
}

struct Mat {
  int n = 0;  // rows == cols; all matrices here are square
  std::array<double, kMaxDim * kMaxDim> a{};

  Mat() = default;
  explicit Mat(int dim) : n(dim) { assert(dim >= 0 && dim <= kMaxDim); }
  static Mat zero(int dim) { return Mat(dim); }
  static Mat identity(int dim) {
    Mat m(dim);
    for (int i = 0; i < dim; ++i) m.at(i, i) = 1.0;
    return m;
  }
  static Mat diag(const Vec& d) {
    Mat m(d.n);
    for (int i = 0; i < d.n; ++i) m.at(i, i) = d[i];
    return m;
  }

  double at(int i, int j) const { return a[static_cast<size_t>(i * kMaxDim + j)]; }
  double& at(int i, int j) { return a[static_cast<size_t>(i * kMaxDim + j)]; }
  int size() const { return n; }
};

inline Vec operator*(const Mat& m, const Vec& x) {
  assert(m.n == x.n);
  Vec r(x.n);
  for (int i = 0; i < m.n; ++i) {
    double s = 0;
    for (int j = 0; j < m.n; ++j) s += m.at(i, j) * x[j];
    r[i] = s;
  }
  return r;
}
inline Mat operator*(const Mat& p, const Mat& q) {
  assert(p.n == q.n);
  Mat r(p.n);
  for (int i = 0; i < p.n; ++i)
    for (int k = 0; k < p.n; ++k) {
      double pik = p.at(i, k);
      if (pik == 0.0) continue;
      for (int j = 0; j < p.n; ++j) r.at(i, j) += pik * q.at(k, j);
    }
  return r;
}
inline Mat operator+(const Mat& p, const Mat& q) {
  assert(p.n == q.n);
  Mat r(p.n);
  for (int i = 0; i < p.n; ++i)
    for (int j = 0; j < p.n; ++j) r.at(i, j) = p.at(i, j) + q.at(i, j);
  return r;
}
inline Mat operator-(const Mat& p, const Mat& q) {
  assert(p.n == q.n);
  Mat r(p.n);
  for (int i = 0; i < p.n; ++i)
    for (int j = 0; j < p.n; ++j) r.at(i, j) = p.at(i, j) - q.at(i, j);
  return r;
}
inline Mat operator*(double s, const Mat& p) {
  Mat r(p.n);
  for (int i = 0; i < p.n; ++i)
    for (int j = 0; j < p.n; ++j) r.at(i, j) = s * p.at(i, j);
  return r;
}
inline Mat transpose(const Mat& p) {
  Mat r(p.n);
  for (int i = 0; i < p.n; ++i)
    for (int j = 0; j < p.n; ++j) r.at(i, j) = p.at(j, i);
  return r;
}
inline Mat outer(const Vec& x, const Vec& y) {
  assert(x.n == y.n);
  Mat r(x.n);
  for (int i = 0; i < x.n; ++i)
    for (int j = 0; j < x.n; ++j) r.at(i, j) = x[i] * y[j];
  return r;
}
inline double trace(const Mat& m) {
  double s = 0;
  for (int i = 0; i < m.n; ++i) s += m.at(i, i);
  return s;
}
inline double max_abs(const Mat& m) {
  double s = 0;
  for (int i = 0; i < m.n; ++i)
    for (int j = 0; j < m.n; ++j) s = std::max(s, std::abs(m.at(i, j)));
  return s;
}
inline double max_asymmetry(const Mat& m) {
  double s = 0;
  for (int i = 0; i < m.n; ++i)
    for (int j = i + 1; j < m.n; ++j) s = std::max(s, std::abs(m.at(i, j) - m.at(j, i)));
  return s;
}

struct EigenSym {
  Vec values;   // ascending
  Mat vectors;  // columns are eigenvectors
};

// Cyclic Jacobi for symmetric matrices. Dimensions here are tiny (<= 8), so
// convergence is a handful of sweeps.
inline EigenSym eig_sym(const Mat& s_in) {
  const int n = s_in.n;
  Mat s = s_in;
  Mat v = Mat::identity(n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += s.at(p, q) * s.at(p, q);
    if (off < 1e-30 * std::max(1.0, max_abs(s) * max_abs(s))) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double apq = s.at(p, q);
        if (std::abs(apq) < 1e-300) continue;
        double theta = (s.at(q, q) - s.at(p, p)) / (2 * apq);
        double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        double c = 1.0 / std::sqrt(t * t + 1), sn = t * c;
        for (int k = 0; k < n; ++k) {
          double skp = s.at(k, p), skq = s.at(k, q);
          s.at(k, p) = c * skp - sn * skq;
          s.at(k, q) = sn * skp + c * skq;
        }
        for (int k = 0; k < n; ++k) {
          double spk = s.at(p, k), sqk = s.at(q, k);
          s.at(p, k) = c * spk - sn * sqk;
          s.at(q, k) = sn * spk + c * sqk;
        }
        for (int k = 0; k < n; ++k) {
          double vkp = v.at(k, p), vkq = v.at(k, q);
          v.at(k, p) = c * vkp - sn * vkq;
          v.at(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }
  // sort ascending by eigenvalue
  std::array<int, kMaxDim> idx{};
  for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (s.at(idx[static_cast<size_t>(j)], idx[static_cast<size_t>(j)]) <
          s.at(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(i)]))
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
  EigenSym out;
  out.values = Vec(n);
  out.vectors = Mat(n);
  for (int i = 0; i < n; ++i) {
    int k = idx[static_cast<size_t>(i)];
    out.values[i] = s.at(k, k);
    for (int r = 0; r < n; ++r) out.vectors.at(r, i) = v.at(r, k);
  }
  return out;
}

// PSD square root by eigendecomposition; eigenvalues below the clamp
// tolerance are treated as 0 (rounding can leave tiny negatives).
inline Mat sqrt_psd(const Mat& m, double clamp_tol = 1e-12) {
  EigenSym es = eig_sym(m);
  double scale = std::max(1.0, std::abs(es.values[m.n - 1]));
  Mat r(m.n);
  for (int k = 0; k < m.n; ++k) {
    double lam = es.values[k];
    if (lam < -clamp_tol * scale && lam < -clamp_tol) {
      // genuinely negative input is a caller bug; clamp but keep going
      lam = 0.0;
    }
    double s = lam > 0 ? std::sqrt(lam) : 0.0;
    if (s == 0.0) continue;
    for (int i = 0; i < m.n; ++i)
      for (int j = 0; j < m.n; ++j) r.at(i, j) += s * es.vectors.at(i, k) * es.vectors.at(j, k);
  }
  return r;
}

}  // namespace rb
