#include "ddacdn/mkmmd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ddacdn {

void KernelBank::validate() const {
    if (bandwidths.empty() || bandwidths.size() != weights.size())
        throw std::invalid_argument("kernel bank: need m >= 1 bandwidths with matching weights");
    double wsum = 0;
    for (size_t i = 0; i < bandwidths.size(); ++i) {
        if (bandwidths[i] <= 0) throw std::invalid_argument("kernel bank: bandwidths must be > 0");
        if (weights[i] < 0) throw std::invalid_argument("kernel bank: weights must be >= 0");
        wsum += weights[i];
    }
    if (std::abs(wsum - 1.0) > 1e-12)
        throw std::invalid_argument("kernel bank: weights must sum to 1");
}

KernelBank KernelBank::multi_scale(double base_bandwidth, int m) {
    if (base_bandwidth <= 0) throw std::invalid_argument("base bandwidth must be > 0");
    if (m < 1) throw std::invalid_argument("kernel count must be >= 1");
    KernelBank bank;
    double factor = std::pow(2.0, -(m - 1) / 2.0);
    for (int i = 0; i < m; ++i) {
        bank.bandwidths.push_back(base_bandwidth * factor);
        bank.weights.push_back(1.0 / m);
        factor *= 2.0;
    }
    return bank;
}

namespace {

double sq_dist(const double* x, const double* y, int d) {
    double s = 0;
    for (int i = 0; i < d; ++i) {
        double diff = x[i] - y[i];
        s += diff * diff;
    }
    return s;
}

double kernel_of_d2(const KernelBank& bank, double d2) {
    double k = 0;
    for (size_t i = 0; i < bank.bandwidths.size(); ++i)
        k += bank.weights[i] * std::exp(-d2 / (2.0 * bank.bandwidths[i]));
    return k;
}

// d k(x,y) / d d2, the scalar factor multiplying (x - y) is -2 * this... we
// keep the chain explicit: dk/dx = kprime_of_d2 * 2 * (x - y).
double kernel_d2_derivative(const KernelBank& bank, double d2) {
    double g = 0;
    for (size_t i = 0; i < bank.bandwidths.size(); ++i)
        g += bank.weights[i] * std::exp(-d2 / (2.0 * bank.bandwidths[i])) *
             (-1.0 / (2.0 * bank.bandwidths[i]));
    return g;
}

}  // namespace

double kernel_eval(const KernelBank& bank, const std::vector<double>& x,
                   const std::vector<double>& y) {
    bank.validate();
    if (x.size() != y.size())
        throw std::invalid_argument("kernel_eval: dimension mismatch " + std::to_string(x.size()) +
                                    " vs " + std::to_string(y.size()));
    return kernel_of_d2(bank, sq_dist(x.data(), y.data(), static_cast<int>(x.size())));
}

double median_bandwidth(const std::vector<double>& xs, const std::vector<double>& xt, int dim) {
    if (dim <= 0) throw std::invalid_argument("median_bandwidth: dim must be positive");
    size_t n = xs.size() / static_cast<size_t>(dim);
    size_t r = xt.size() / static_cast<size_t>(dim);
    size_t total = n + r;
    if (total < 2) throw std::invalid_argument("median_bandwidth: need >= 2 pooled vectors");
    std::vector<const double*> rows;
    rows.reserve(total);
    for (size_t i = 0; i < n; ++i) rows.push_back(xs.data() + i * static_cast<size_t>(dim));
    for (size_t i = 0; i < r; ++i) rows.push_back(xt.data() + i * static_cast<size_t>(dim));
    std::vector<double> d2;
    d2.reserve(total * (total - 1) / 2);
    for (size_t a = 0; a < total; ++a)
        for (size_t b = a + 1; b < total; ++b) d2.push_back(sq_dist(rows[a], rows[b], dim));
    std::sort(d2.begin(), d2.end());
    size_t k = d2.size();
    double med = (k % 2 == 1) ? d2[k / 2] : 0.5 * (d2[k / 2 - 1] + d2[k / 2]);
    return med > 0 ? med : 1.0;
}

Tensor mmd2(const KernelBank& bank, const Tensor& xs, const Tensor& xt, MmdEstimator est) {
    bank.validate();
    if (xs.shape.size() != 2 || xt.shape.size() != 2 || xs.shape[1] != xt.shape[1])
        throw std::invalid_argument("mmd2: feature shape mismatch " + shape_str(xs.shape) +
                                    " vs " + shape_str(xt.shape));
    int n = xs.shape[0], r = xt.shape[0], d = xs.shape[1];
    if (n < 1 || r < 1) throw std::invalid_argument("mmd2: need at least one sample per set");
    if (est == MmdEstimator::unbiased && (n < 2 || r < 2))
        throw std::invalid_argument("mmd2: unbiased estimator needs >= 2 samples per set");

    const double* S = xs.data->data();
    const double* T = xt.data->data();
    auto row_s = [&](int i) { return S + static_cast<int64_t>(i) * d; };
    auto row_t = [&](int i) { return T + static_cast<int64_t>(i) * d; };

    double ss = 0, tt = 0, st = 0;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            if (est == MmdEstimator::unbiased && a == b) continue;
            ss += kernel_of_d2(bank, sq_dist(row_s(a), row_s(b), d));
        }
    for (int a = 0; a < r; ++a)
        for (int b = 0; b < r; ++b) {
            if (est == MmdEstimator::unbiased && a == b) continue;
            tt += kernel_of_d2(bank, sq_dist(row_t(a), row_t(b), d));
        }
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < r; ++b) st += kernel_of_d2(bank, sq_dist(row_s(a), row_t(b), d));

    double cs = est == MmdEstimator::biased ? 1.0 / (static_cast<double>(n) * n)
                                            : 1.0 / (static_cast<double>(n) * (n - 1));
    double ct = est == MmdEstimator::biased ? 1.0 / (static_cast<double>(r) * r)
                                            : 1.0 / (static_cast<double>(r) * (r - 1));
    double cx = 2.0 / (static_cast<double>(n) * r);
    Tensor out(cs * ss + ct * tt - cx * st);

    Graph* g = xs.graph ? xs.graph : xt.graph;
    if (xs.graph && xt.graph && xs.graph != xt.graph)
        throw std::invalid_argument("mmd2: operands belong to different graphs");
    if (!g) return out;

    Tensor xsc = xs, xtc = xt;
    KernelBank bk = bank;
    g->record(out, {xs.node, xt.node},
              [xsc, xtc, bk, n, r, d, cs, ct, cx, est](Graph& gr, const std::vector<double>& go) {
                  double go0 = go[0];
                  const double* S = xsc.data->data();
                  const double* T = xtc.data->data();
                  auto row_s = [&](int i) { return S + static_cast<int64_t>(i) * d; };
                  auto row_t = [&](int i) { return T + static_cast<int64_t>(i) * d; };
                  std::vector<double> gs, gt;
                  if (xsc.node >= 0) gs.assign(xsc.data->size(), 0.0);
                  if (xtc.node >= 0) gt.assign(xtc.data->size(), 0.0);
                  // within-source pairs: each unordered pair appears twice
                  if (xsc.node >= 0) {
                      for (int a = 0; a < n; ++a)
                          for (int b = 0; b < n; ++b) {
                              if (a == b) continue;
                              double d2 = sq_dist(row_s(a), row_s(b), d);
                              double kp = kernel_d2_derivative(bk, d2);
                              double f = go0 * cs * kp * 4.0;  // 2 (pair order) * 2 (d2 chain)
                              for (int j = 0; j < d; ++j)
                                  gs[static_cast<int64_t>(a) * d + j] +=
                                      f * (row_s(a)[j] - row_s(b)[j]);
                          }
                  }
                  if (xtc.node >= 0) {
                      for (int a = 0; a < r; ++a)
                          for (int b = 0; b < r; ++b) {
                              if (a == b) continue;
                              double d2 = sq_dist(row_t(a), row_t(b), d);
                              double kp = kernel_d2_derivative(bk, d2);
                              double f = go0 * ct * kp * 4.0;
                              for (int j = 0; j < d; ++j)
                                  gt[static_cast<int64_t>(a) * d + j] +=
                                      f * (row_t(a)[j] - row_t(b)[j]);
                          }
                  }
                  for (int a = 0; a < n; ++a)
                      for (int b = 0; b < r; ++b) {
                          double d2 = sq_dist(row_s(a), row_t(b), d);
                          double kp = kernel_d2_derivative(bk, d2);
                          double f = -go0 * cx * kp * 2.0;
                          for (int j = 0; j < d; ++j) {
                              double diff = row_s(a)[j] - row_t(b)[j];
                              if (xsc.node >= 0) gs[static_cast<int64_t>(a) * d + j] += f * diff;
                              if (xtc.node >= 0) gt[static_cast<int64_t>(b) * d + j] -= f * diff;
                          }
                      }
                  (void)est;
                  if (xsc.node >= 0) gr.accumulate(xsc.node, gs);
                  if (xtc.node >= 0) gr.accumulate(xtc.node, gt);
              });
    return out;
}

Tensor domain_loss(const std::vector<Tensor>& pooled_s, const std::vector<Tensor>& pooled_t,
                   const std::vector<KernelBank>& banks, const double beta[3]) {
    if (pooled_s.size() != 3 || pooled_t.size() != 3 || banks.size() != 3)
        throw std::invalid_argument("domain_loss: expected 3 scales");
    Tensor total(0.0);
    for (size_t i = 0; i < 3; ++i)
        total = add(total, mul(mmd2(banks[i], pooled_s[i], pooled_t[i]), beta[i]));
    return total;
}

DomainBatch build_intermediate(const DomainBatch& batch_s, const DomainBatch& batch_t, Rng& rng) {
    if (batch_s.samples.empty() || batch_t.samples.empty())
        throw std::invalid_argument("build_intermediate: both batches must be non-empty");
    for (const auto& ds : batch_t.samples)
        if (ds.sample.labels.empty())
            throw std::invalid_argument(
                "build_intermediate: target samples must carry labels for the intermediate phase");
    DomainBatch out;
    out.domain = Domain::intermediate;
    for (const auto& s : batch_s.samples)
        out.samples.push_back(DomainSample{s.sample, Domain::source});
    for (const auto& t : batch_t.samples)
        out.samples.push_back(DomainSample{t.sample, Domain::target});
    // Fisher-Yates with the provided stream
    for (size_t i = out.samples.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(rng.uniform_int(i));
        std::swap(out.samples[i - 1], out.samples[j]);
    }
    return out;
}

}  // namespace ddacdn
