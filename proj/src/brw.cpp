#include "iselab/brw.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <stdexcept>
#include <thread>

#include "iselab/errors.hpp"

namespace iselab {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 stream_engine(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(stream + 1)));
}

// Unbiased bounded draw by rejection; keeps the stream engine-portable
// instead of delegating to distribution classes with unspecified algorithms.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t m) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() / m * m;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % m;
}

double unit_double(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Offspring multiset conditioned on total progeny n (sum of counts n - 1):
// with c twos the ones count is n - 1 - 2c. The binary law forces
// c = (n - 1) / 2; otherwise c is drawn from the exact conditional weights
// (multinomial coefficients times law probabilities, evaluated in logs).
long draw_two_count(const BrwConfig& config, std::mt19937_64& rng) {
  const long n = config.n;
  if (config.law.binary()) return (n - 1) / 2;

  const double lp0 = config.law.p0 > 0 ? std::log(config.law.p0.get_d()) : 0.0;
  const double lp1 = config.law.p1 > 0 ? std::log(config.law.p1.get_d()) : 0.0;
  const double lp2 = config.law.p2 > 0 ? std::log(config.law.p2.get_d()) : 0.0;
  std::vector<double> logw;
  std::vector<long> values;
  double best = -std::numeric_limits<double>::infinity();
  for (long c = 0; 2 * c <= n - 1; ++c) {
    const long b = n - 1 - 2 * c;
    const long a = n - b - c;
    if (a < 0) continue;
    if ((a > 0 && config.law.p0 == 0) || (b > 0 && config.law.p1 == 0) ||
        (c > 0 && config.law.p2 == 0))
      continue;
    const double lw = std::lgamma(n + 1.0) - std::lgamma(a + 1.0) -
                      std::lgamma(b + 1.0) - std::lgamma(c + 1.0) +
                      a * lp0 + b * lp1 + c * lp2;
    logw.push_back(lw);
    values.push_back(c);
    best = std::max(best, lw);
  }
  if (values.empty())
    throw std::invalid_argument("tree size unreachable under offspring law");
  double total = 0.0;
  for (double& w : logw) {
    w = std::exp(w - best);
    total += w;
  }
  double u = unit_double(rng) * total;
  for (size_t i = 0; i < logw.size(); ++i) {
    u -= logw[i];
    if (u <= 0) return values[i];
  }
  return values.back();
}

}  // namespace

void OffspringLaw::validate() const {
  if (p0 < 0 || p1 < 0 || p2 < 0)
    throw std::invalid_argument("offspring probabilities must be nonnegative");
  if (p0 + p1 + p2 != Rational(1))
    throw std::invalid_argument("offspring probabilities must sum to 1");
  if (p1 + Rational(2) * p2 != Rational(1))
    throw std::invalid_argument("offspring mean must be exactly 1");
}

void BrwConfig::validate() const {
  law.validate();
  if (d < 1) throw std::invalid_argument("dimension must be >= 1");
  if (n < 1) throw std::invalid_argument("tree size must be >= 1");
  if (samples < 0) throw std::invalid_argument("sample count must be >= 0");
  if (!(scale > 0)) throw std::invalid_argument("scale must be positive");
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  if (law.binary() && n % 2 == 0)
    throw std::invalid_argument(
        "binary offspring law only reaches odd tree sizes");
}

FamilyTree sample_family_tree(const BrwConfig& config, long sample_index) {
  config.validate();
  const long n = config.n;
  auto rng = stream_engine(config.seed, static_cast<std::uint64_t>(sample_index));

  const long twos = draw_two_count(config, rng);
  const long ones = n - 1 - 2 * twos;
  std::vector<std::uint8_t> offspring(n, 0);
  for (long i = 0; i < twos; ++i) offspring[i] = 2;
  for (long i = twos; i < twos + ones; ++i) offspring[i] = 1;
  for (long i = n - 1; i > 0; --i) {
    const long j = static_cast<long>(bounded(rng, i + 1));
    std::swap(offspring[i], offspring[j]);
  }

  // cycle lemma: rotate to start just past the first prefix-sum minimum,
  // the unique rotation whose walk stays nonnegative until the final -1
  long sum = 0, min_sum = 0, rotate = 0;
  for (long i = 0; i < n; ++i) {
    sum += offspring[i] - 1;
    if (sum < min_sum) {
      min_sum = sum;
      rotate = i + 1;
    }
  }
  if (sum != -1) throw std::logic_error("offspring counts do not sum to n - 1");
  std::rotate(offspring.begin(), offspring.begin() + (rotate % n),
              offspring.end());
  sum = 0;
  for (long i = 0; i + 1 < n; ++i) {
    sum += offspring[i] - 1;
    if (sum < 0) throw std::logic_error("rotated walk dips before the end");
  }

  // preorder embedding: each node steps uniformly from its parent
  std::vector<int> positions(static_cast<size_t>(n) * config.d, 0);
  std::vector<std::pair<long, int>> stack;  // (node, children left)
  stack.emplace_back(0, offspring[0]);
  for (long j = 1; j < n; ++j) {
    while (!stack.empty() && stack.back().second == 0) stack.pop_back();
    if (stack.empty()) throw std::logic_error("walk ended before all nodes");
    const long parent = stack.back().first;
    --stack.back().second;
    const std::uint64_t move = bounded(rng, 2 * config.d);
    const int dim = static_cast<int>(move / 2);
    const int sign = (move % 2 == 0) ? 1 : -1;
    for (int c = 0; c < config.d; ++c)
      positions[j * config.d + c] = positions[parent * config.d + c];
    positions[j * config.d + dim] += sign;
    stack.emplace_back(j, offspring[j]);
  }

  FamilyTree tree;
  tree.offspring = std::move(offspring);
  tree.positions = std::move(positions);
  return tree;
}

EmpiricalMeasure sample_conditioned_tree(const BrwConfig& config,
                                         long sample_index) {
  const FamilyTree tree = sample_family_tree(config, sample_index);
  EmpiricalMeasure out;
  out.d = config.d;
  const double factor =
      config.scale * std::pow(static_cast<double>(config.n), -0.25);
  out.coords.resize(tree.positions.size());
  for (size_t i = 0; i < tree.positions.size(); ++i)
    out.coords[i] = tree.positions[i] * factor;
  return out;
}

std::vector<EmpiricalMeasure> sample_measures(const BrwConfig& config) {
  config.validate();
  std::vector<EmpiricalMeasure> out(static_cast<size_t>(config.samples));
  const int threads = static_cast<int>(
      std::max<long>(1, std::min<long>(config.threads, config.samples)));
  if (threads == 1) {
    for (long i = 0; i < config.samples; ++i)
      out[i] = sample_conditioned_tree(config, i);
    return out;
  }
  std::vector<std::thread> pool;
  std::atomic<long> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      try {
        while (true) {
          const long i = next.fetch_add(1);
          if (i >= config.samples) return;
          out[i] = sample_conditioned_tree(config, i);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return out;
}

namespace {

std::complex<double> measure_char(const EmpiricalMeasure& m,
                                  const VecList& ktilde) {
  const long n = m.point_count();
  std::complex<double> prod(1.0, 0.0);
  for (const auto& k : ktilde) {
    std::complex<double> acc(0.0, 0.0);
    for (long p = 0; p < n; ++p) {
      double phase = 0.0;
      for (int c = 0; c < m.d; ++c) phase += k[c] * m.coords[p * m.d + c];
      acc += std::complex<double>(std::cos(phase), std::sin(phase));
    }
    prod *= acc / static_cast<double>(n);
  }
  return prod;
}

}  // namespace

CharEstimate empirical_char(const std::vector<EmpiricalMeasure>& measures,
                            const VecList& ktilde, int resamples) {
  if (measures.size() < 2)
    throw std::invalid_argument("need at least two sample measures");
  if (ktilde.empty() || ktilde.size() > 2)
    throw std::invalid_argument("moment order must be 1 or 2");
  const int d = measures.front().d;
  for (const auto& k : ktilde)
    if (static_cast<int>(k.size()) != d)
      throw std::invalid_argument("frequency arity mismatch");
  for (const auto& m : measures)
    if (m.d != d || m.point_count() == 0)
      throw std::invalid_argument("inconsistent or empty measure");

  const long M = static_cast<long>(measures.size());
  std::vector<std::complex<double>> values(M);
  for (long i = 0; i < M; ++i) values[i] = measure_char(measures[i], ktilde);

  std::complex<double> mean(0.0, 0.0);
  for (const auto& v : values) mean += v;
  mean /= static_cast<double>(M);

  CharEstimate est;
  est.value = mean;
  est.samples = M;

  // fixed-seed bootstrap over the per-measure values
  std::mt19937_64 rng(splitmix64(0x626f6f74ULL ^ (static_cast<std::uint64_t>(M)
                                                  << 20)));
  double acc_re = 0.0, acc_re2 = 0.0, acc_im = 0.0, acc_im2 = 0.0;
  for (int b = 0; b < resamples; ++b) {
    std::complex<double> s(0.0, 0.0);
    for (long i = 0; i < M; ++i)
      s += values[bounded(rng, static_cast<std::uint64_t>(M))];
    s /= static_cast<double>(M);
    acc_re += s.real();
    acc_re2 += s.real() * s.real();
    acc_im += s.imag();
    acc_im2 += s.imag() * s.imag();
  }
  const double B = resamples;
  est.se_re = std::sqrt(std::max(0.0, acc_re2 / B - (acc_re / B) * (acc_re / B)));
  est.se_im = std::sqrt(std::max(0.0, acc_im2 / B - (acc_im / B) * (acc_im / B)));
  return est;
}

ScaleFit fit_scale(const std::vector<EmpiricalMeasure>& measures,
                   double reference_k, double target) {
  if (measures.size() < 2)
    throw std::invalid_argument("need at least two sample measures");
  if (!(reference_k > 0))
    throw std::invalid_argument("reference frequency must be positive");
  if (!(target > 0) || !(target < 1))
    throw std::invalid_argument("target must lie in (0, 1)");
  const long n = measures.front().point_count();
  const int d = measures.front().d;
  for (const auto& m : measures)
    if (m.point_count() != n || m.d != d)
      throw std::invalid_argument("measures must share size and dimension");

  // first coordinates repeat exactly (integer lattice times a common
  // factor), so a histogram collapses the mean into a short cosine sum
  std::map<double, long> hist;
  for (const auto& m : measures)
    for (long p = 0; p < n; ++p) ++hist[m.coords[p * d]];
  const double total = static_cast<double>(measures.size()) *
                       static_cast<double>(n);
  std::vector<std::pair<double, double>> bins;
  bins.reserve(hist.size());
  for (const auto& [x, c] : hist)
    bins.emplace_back(x, static_cast<double>(c) / total);

  const auto mean_char = [&](double scale) {
    double re = 0.0;
    for (const auto& [x, w] : bins) re += w * std::cos(scale * reference_k * x);
    return re;
  };

  double lo = 0.0, hi = 1.0;
  int guard = 0;
  while (mean_char(hi) > target) {
    lo = hi;
    hi *= 2.0;
    if (++guard > 60)
      throw numerical_failure("scale fit bracket did not close", hi);
  }
  for (int it = 0; it < 200 && (hi - lo) > 1e-13 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mean_char(mid) > target)
      lo = mid;
    else
      hi = mid;
  }

  ScaleFit fit;
  fit.scale = 0.5 * (lo + hi);
  fit.reference_k = reference_k;
  fit.target = target;
  fit.achieved = mean_char(fit.scale);
  return fit;
}

}  // namespace iselab
