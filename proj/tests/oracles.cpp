#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "xview/error.hpp"
#include "xview/variational.hpp"

namespace xview::testing {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

GradCheck check_gradients(const std::function<Tensor(Graph&)>& loss_fn,
                          const std::vector<ParamPtr>& params, double step) {
  Graph g;
  Tensor loss = loss_fn(g);
  g.backward(loss);

  GradCheck result;
  for (const ParamPtr& p : params) {
    const std::vector<double>* analytic = g.grad_for_key(p.get());
    std::vector<double> zeros;
    if (!analytic) {
      zeros.assign(p->size(), 0.0);
      analytic = &zeros;
    }
    for (std::size_t i = 0; i < p->size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + step;
      Graph gp;
      const double up = loss_fn(gp).value();
      p->value[i] = saved - step;
      Graph gm;
      const double down = loss_fn(gm).value();
      p->value[i] = saved;
      const double fd = (up - down) / (2.0 * step);
      const double a = (*analytic)[i];
      const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1.0});
      result.max_rel_err = std::max(result.max_rel_err, rel);
      ++result.checked;
    }
  }
  return result;
}

namespace {

LabelSequence collapse_alignment(const std::vector<std::size_t>& path) {
  LabelSequence out;
  std::size_t prev = 0;
  for (std::size_t sym : path) {
    if (sym != 0 && sym != prev) out.push_back(static_cast<int>(sym) - 1);
    prev = sym;
  }
  return out;
}

// Calls visit(path, log_prob) for every alignment string.
void enumerate_alignments(const std::vector<double>& lp, std::size_t T, std::size_t W,
                          const std::function<void(const std::vector<std::size_t>&, double)>& visit) {
  std::vector<std::size_t> path(T, 0);
  std::function<void(std::size_t, double)> rec = [&](std::size_t t, double acc) {
    if (t == T) {
      visit(path, acc);
      return;
    }
    for (std::size_t s = 0; s < W; ++s) {
      path[t] = s;
      rec(t + 1, acc + lp[t * W + s]);
    }
  };
  rec(0, 0.0);
}

}  // namespace

double ctc_brute_force_loss(const std::vector<double>& log_probs, std::size_t frames,
                            std::size_t vocab_with_blank, const LabelSequence& target) {
  double mass = kNegInf;
  enumerate_alignments(log_probs, frames, vocab_with_blank,
                       [&](const std::vector<std::size_t>& path, double log_p) {
                         if (collapse_alignment(path) == target)
                           mass = vals::logsumexp2(mass, log_p);
                       });
  return -mass;
}

std::pair<LabelSequence, double> ctc_exhaustive_best(const std::vector<double>& log_probs,
                                                     std::size_t frames,
                                                     std::size_t vocab_with_blank) {
  std::map<LabelSequence, double> mass;
  enumerate_alignments(log_probs, frames, vocab_with_blank,
                       [&](const std::vector<std::size_t>& path, double log_p) {
                         LabelSequence lab = collapse_alignment(path);
                         auto [it, fresh] = mass.emplace(std::move(lab), log_p);
                         if (!fresh) it->second = vals::logsumexp2(it->second, log_p);
                       });
  auto best = mass.begin();
  for (auto it = mass.begin(); it != mass.end(); ++it)
    if (it->second > best->second) best = it;  // map order breaks ties lexicographically
  return {best->first, best->second};
}

double ctc_exhaustive_mass(const std::vector<double>& log_probs, std::size_t frames,
                           std::size_t vocab_with_blank, const LabelSequence& labeling) {
  double mass = kNegInf;
  enumerate_alignments(log_probs, frames, vocab_with_blank,
                       [&](const std::vector<std::size_t>& path, double log_p) {
                         if (collapse_alignment(path) == labeling)
                           mass = vals::logsumexp2(mass, log_p);
                       });
  return mass;
}

MonteCarloEstimate mc_kl_estimate(const DiagGaussian& q, std::size_t samples, Rng rng) {
  const std::size_t d = q.mean.size();
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    double term = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double eps = rng.normal();
      const double sigma = std::exp(0.5 * q.log_var[i]);
      const double z = q.mean[i] + sigma * eps;
      const double log_q = -0.5 * (kLogTwoPi + q.log_var[i] + eps * eps);
      const double log_p = -0.5 * (kLogTwoPi + z * z);
      term += log_q - log_p;
    }
    sum += term;
    sum_sq += term * term;
  }
  MonteCarloEstimate est;
  est.mean = sum / static_cast<double>(samples);
  const double var = sum_sq / static_cast<double>(samples) - est.mean * est.mean;
  est.std_error = std::sqrt(std::max(var, 0.0) / static_cast<double>(samples));
  return est;
}

double simpson(const std::function<double(double)>& f, double lo, double hi, std::size_t n) {
  if (n % 2) ++n;
  const double h = (hi - lo) / static_cast<double>(n);
  double acc = f(lo) + f(hi);
  for (std::size_t i = 1; i < n; ++i) acc += f(lo + h * static_cast<double>(i)) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

EditStats edit_distance_recursive(const LabelSequence& ref, const LabelSequence& hyp) {
  std::function<EditStats(std::size_t, std::size_t)> rec = [&](std::size_t i,
                                                               std::size_t j) -> EditStats {
    if (i == 0) return EditStats{0, j, 0};
    if (j == 0) return EditStats{0, 0, i};
    EditStats sub = rec(i - 1, j - 1);
    if (ref[i - 1] != hyp[j - 1]) ++sub.substitutions;
    EditStats ins = rec(i, j - 1);
    ++ins.insertions;
    EditStats del = rec(i - 1, j);
    ++del.deletions;
    // Preference: substitution, then insertion, then deletion.
    EditStats best = sub;
    if (ins.total() < best.total()) best = ins;
    if (del.total() < best.total()) best = del;
    return best;
  };
  return rec(ref.size(), hyp.size());
}

// ---- linear CCA --------------------------------------------------------------

namespace {

// Jacobi eigendecomposition of a symmetric matrix (row-major, d x d).
void jacobi_eig(std::vector<double> a, std::size_t d, std::vector<double>& eigvals,
                std::vector<double>& eigvecs) {
  eigvecs.assign(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) eigvecs[i * d + i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < d; ++p)
      for (std::size_t q = p + 1; q < d; ++q) off += a[p * d + q] * a[p * d + q];
    if (off < 1e-24) break;
    for (std::size_t p = 0; p < d; ++p)
      for (std::size_t q = p + 1; q < d; ++q) {
        const double apq = a[p * d + q];
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < d; ++k) {
          const double akp = a[k * d + p], akq = a[k * d + q];
          a[k * d + p] = c * akp - s * akq;
          a[k * d + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < d; ++k) {
          const double apk = a[p * d + k], aqk = a[q * d + k];
          a[p * d + k] = c * apk - s * aqk;
          a[q * d + k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < d; ++k) {
          const double vkp = eigvecs[k * d + p], vkq = eigvecs[k * d + q];
          eigvecs[k * d + p] = c * vkp - s * vkq;
          eigvecs[k * d + q] = s * vkp + c * vkq;
        }
      }
  }
  eigvals.resize(d);
  for (std::size_t i = 0; i < d; ++i) eigvals[i] = a[i * d + i];
}

// Symmetric inverse square root with eigenvalue regularization.
std::vector<double> inv_sqrt_sym(const std::vector<double>& m, std::size_t d) {
  std::vector<double> vals, vecs;
  jacobi_eig(m, d, vals, vecs);
  std::vector<double> out(d * d, 0.0);
  for (std::size_t k = 0; k < d; ++k) {
    const double lam = std::max(vals[k], 1e-10);
    const double w = 1.0 / std::sqrt(lam);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) out[i * d + j] += w * vecs[i * d + k] * vecs[j * d + k];
  }
  return out;
}

std::vector<double> mat_mul(const std::vector<double>& a, const std::vector<double>& b,
                            std::size_t m, std::size_t k, std::size_t n) {
  std::vector<double> out(m * n, 0.0);
  vals::matmul(a.data(), b.data(), out.data(), m, k, n);
  return out;
}

}  // namespace

double cca_top_correlations(const std::vector<double>& x, std::size_t dx,
                            const std::vector<double>& y, std::size_t dy, std::size_t n,
                            std::size_t k) {
  std::vector<double> xc = x, yc = y;
  for (std::size_t j = 0; j < dx; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += xc[i * dx + j];
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) xc[i * dx + j] -= mean;
  }
  for (std::size_t j = 0; j < dy; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += yc[i * dy + j];
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) yc[i * dy + j] -= mean;
  }
  auto cov = [n](const std::vector<double>& a, std::size_t da, const std::vector<double>& b,
                 std::size_t db) {
    std::vector<double> c(da * db, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t p = 0; p < da; ++p)
        for (std::size_t q = 0; q < db; ++q) c[p * db + q] += a[i * da + p] * b[i * db + q];
    for (auto& v : c) v /= static_cast<double>(n - 1);
    return c;
  };
  std::vector<double> cxx = cov(xc, dx, xc, dx);
  std::vector<double> cyy = cov(yc, dy, yc, dy);
  std::vector<double> cxy = cov(xc, dx, yc, dy);
  // Small ridge keeps the whitening stable.
  for (std::size_t i = 0; i < dx; ++i) cxx[i * dx + i] += 1e-8;
  for (std::size_t i = 0; i < dy; ++i) cyy[i * dy + i] += 1e-8;

  std::vector<double> wx = inv_sqrt_sym(cxx, dx);
  std::vector<double> wy = inv_sqrt_sym(cyy, dy);
  std::vector<double> m = mat_mul(mat_mul(wx, cxy, dx, dx, dy), wy, dx, dy, dy);
  // Singular values of m via the eigenvalues of m m^T.
  std::vector<double> mmt(dx * dx, 0.0);
  for (std::size_t i = 0; i < dx; ++i)
    for (std::size_t j = 0; j < dx; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < dy; ++t) acc += m[i * dy + t] * m[j * dy + t];
      mmt[i * dx + j] = acc;
    }
  std::vector<double> vals_out, vecs;
  jacobi_eig(mmt, dx, vals_out, vecs);
  std::sort(vals_out.begin(), vals_out.end(), std::greater<>());
  double sum = 0.0;
  for (std::size_t i = 0; i < std::min(k, vals_out.size()); ++i)
    sum += std::sqrt(std::max(vals_out[i], 0.0));
  return sum;
}

double chi_square_statistic(const std::vector<std::vector<std::size_t>>& table) {
  const std::size_t rows = table.size();
  const std::size_t cols = table[0].size();
  std::vector<double> row_sum(rows, 0.0), col_sum(cols, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      row_sum[i] += static_cast<double>(table[i][j]);
      col_sum[j] += static_cast<double>(table[i][j]);
      total += static_cast<double>(table[i][j]);
    }
  double stat = 0.0;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      const double expected = row_sum[i] * col_sum[j] / total;
      const double diff = static_cast<double>(table[i][j]) - expected;
      stat += diff * diff / expected;
    }
  return stat;
}

}  // namespace xview::testing
