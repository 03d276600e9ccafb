#include "iselab/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <queue>

namespace iselab {

namespace {

struct GLRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Newton iteration on P_n(x) = 0 with the three-term recurrence.  Standard
// initial guesses cos(pi (i - 1/4) / (n + 1/2)) converge in a handful of
// steps; weights are 2 / ((1 - x^2) P_n'(x)^2).
GLRule compute_gauss_legendre(int n) {
  GLRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    rule.nodes[i] = x;
    rule.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  // Enforce exact symmetry of the rule.
  for (int i = 0; i < n / 2; ++i) {
    double m = 0.5 * (rule.nodes[i] - rule.nodes[n - 1 - i]);
    rule.nodes[i] = m;
    rule.nodes[n - 1 - i] = -m;
    double w = 0.5 * (rule.weights[i] + rule.weights[n - 1 - i]);
    rule.weights[i] = rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

const GLRule& gl_rule(int n) {
  static std::mutex mu;
  static std::map<int, GLRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, compute_gauss_legendre(n)).first;
  return it->second;
}

struct Panel {
  double a, b;
  double value;   // 15-point estimate
  double error;   // |15-point - 7-point|
};

Panel evaluate_panel(const RealFn& f, double a, double b, long* evals) {
  const GLRule& g7 = gl_rule(7);
  const GLRule& g15 = gl_rule(15);
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double s7 = 0.0, s15 = 0.0;
  for (int i = 0; i < 7; ++i) s7 += g7.weights[i] * f(mid + half * g7.nodes[i]);
  for (int i = 0; i < 15; ++i) s15 += g15.weights[i] * f(mid + half * g15.nodes[i]);
  *evals += 22;
  s7 *= half;
  s15 *= half;
  return Panel{a, b, s15, std::abs(s15 - s7)};
}

}  // namespace

const std::vector<double>& gauss_legendre_nodes(int n) { return gl_rule(n).nodes; }
const std::vector<double>& gauss_legendre_weights(int n) { return gl_rule(n).weights; }

IntegrationResult adaptive_integrate(const RealFn& f, double a, double b,
                                     const QuadratureSpec& spec) {
  IntegrationResult res;
  if (a == b) return res;

  auto worse = [](const Panel& x, const Panel& y) { return x.error < y.error; };
  std::priority_queue<Panel, std::vector<Panel>, decltype(worse)> heap(worse);
  heap.push(evaluate_panel(f, a, b, &res.evaluations));

  double total = heap.top().value;
  double total_err = heap.top().error;
  int splits = 0;
  while (true) {
    double goal = std::max(spec.abs_tol, spec.rel_tol * std::abs(total));
    if (total_err <= goal) break;
    if (splits >= spec.max_subdivisions) {
      throw numerical_failure("adaptive_integrate: subdivision cap reached", total_err);
    }
    Panel worst = heap.top();
    heap.pop();
    double mid = 0.5 * (worst.a + worst.b);
    if (mid <= worst.a || mid >= worst.b) {
      // Interval at rounding resolution; accept its estimate as-is.
      heap.push(Panel{worst.a, worst.b, worst.value, 0.0});
      continue;
    }
    Panel left = evaluate_panel(f, worst.a, mid, &res.evaluations);
    Panel right = evaluate_panel(f, mid, worst.b, &res.evaluations);
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++splits;
  }

  // Recompute the sums from the final partition to avoid drift from the
  // incremental updates.
  total = 0.0;
  total_err = 0.0;
  while (!heap.empty()) {
    total += heap.top().value;
    total_err += heap.top().error;
    heap.pop();
  }
  res.value = total;
  res.error_estimate = total_err;
  return res;
}

IntegrationResult integrate_semi_infinite(const RealFn& f, const QuadratureSpec& spec) {
  return adaptive_integrate(f, 0.0, spec.truncation_radius, spec);
}

IntegrationResult nested_integrate(int dim,
                                   const std::function<double(const std::vector<double>&)>& f,
                                   const QuadratureSpec& spec) {
  if (dim < 1) throw std::invalid_argument("nested_integrate: dim must be >= 1");
  IntegrationResult res;
  std::vector<double> point(dim, 0.0);
  long evals = 0;

  std::function<double(int)> level = [&](int depth) -> double {
    RealFn g = [&](double t) {
      point[depth] = t;
      if (depth + 1 == dim) {
        ++evals;
        return f(point);
      }
      return level(depth + 1);
    };
    IntegrationResult r = adaptive_integrate(g, 0.0, spec.truncation_radius, spec);
    return r.value;
  };

  res.value = level(0);
  res.evaluations = evals;
  res.error_estimate = spec.abs_tol * dim;  // per-level tolerance, stacked
  return res;
}

ChebFun::ChebFun(const RealFn& f, double a, double b, double tol) : a_(a), b_(b) {
  for (int n = 65; n <= 1025; n = 2 * n - 1) {
    // Chebyshev-Lobatto nodes x_j = cos(pi j / (n-1)) mapped to [a, b].
    std::vector<double> vals(n);
    for (int j = 0; j < n; ++j) {
      double x = std::cos(M_PI * j / (n - 1));
      vals[j] = f(0.5 * (a + b) + 0.5 * (b - a) * x);
    }
    // Discrete cosine transform (type I), direct O(n^2) evaluation.
    int m = n - 1;
    coeffs_.assign(n, 0.0);
    for (int k = 0; k < n; ++k) {
      double s = 0.5 * (vals[0] + (k % 2 == 0 ? vals[m] : -vals[m]));
      for (int j = 1; j < m; ++j) s += vals[j] * std::cos(M_PI * k * j / m);
      coeffs_[k] = 2.0 * s / m;
    }
    coeffs_[0] *= 0.5;
    coeffs_[m] *= 0.5;

    double scale = 0.0;
    for (double c : coeffs_) scale = std::max(scale, std::abs(c));
    if (scale == 0.0) return;
    double tail = 0.0;
    for (int k = n - 4; k < n; ++k) tail = std::max(tail, std::abs(coeffs_[k]));
    if (tail <= tol * scale) return;
  }
  // Keep the largest fit; callers get the best available resolution.
}

double ChebFun::operator()(double x) const {
  if (coeffs_.empty()) return 0.0;
  double u = (2.0 * x - a_ - b_) / (b_ - a_);
  u = std::clamp(u, -1.0, 1.0);
  // Clenshaw recurrence.
  double b1 = 0.0, b2 = 0.0;
  for (int k = static_cast<int>(coeffs_.size()) - 1; k >= 1; --k) {
    double t = 2.0 * u * b1 - b2 + coeffs_[k];
    b2 = b1;
    b1 = t;
  }
  return u * b1 - b2 + coeffs_[0];
}

}  // namespace iselab
