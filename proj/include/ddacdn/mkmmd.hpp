#ifndef DDACDN_MKMMD_HPP
#define DDACDN_MKMMD_HPP

#include <vector>

#include "ddacdn/bbox.hpp"
#include "ddacdn/rng.hpp"
#include "ddacdn/tensor.hpp"

namespace ddacdn {

// Convex combination of Gaussian kernels: sum_i w_i exp(-||x-y||^2 / (2 s2_i)).
struct KernelBank {
    std::vector<double> bandwidths;  // sigma^2 of each kernel
    std::vector<double> weights;     // non-negative, sum to 1

    void validate() const;

    // m kernels around a base bandwidth: base * {0.25, 0.5, 1, 2, 4}, equal weights
    static KernelBank multi_scale(double base_bandwidth, int m = 5);
};

enum class MmdEstimator { biased, unbiased };

double kernel_eval(const KernelBank& bank, const std::vector<double>& x,
                   const std::vector<double>& y);

// Median of pairwise squared distances over the pooled rows of xs and xt,
// 1.0 if the median is zero. Rows are length-d vectors, matrices row-major.
double median_bandwidth(const std::vector<double>& xs, const std::vector<double>& xt, int dim);

// Squared MMD between row-major (n x d) and (r x d) feature matrices.
// Differentiable: if either operand carries a graph node the result does too,
// with an analytic backward pass.
Tensor mmd2(const KernelBank& bank, const Tensor& xs, const Tensor& xt,
            MmdEstimator est = MmdEstimator::biased);

// sum_i beta_i * mmd2(bank_i, pool(pyr_s_i), pool(pyr_t_i)); operands are the
// already spatially pooled (n x d) per-scale feature matrices.
Tensor domain_loss(const std::vector<Tensor>& pooled_s, const std::vector<Tensor>& pooled_t,
                   const std::vector<KernelBank>& banks, const double beta[3]);

struct DomainSample {
    LabeledImage sample;
    Domain origin = Domain::source;
};

struct DomainBatch {
    std::vector<DomainSample> samples;
    Domain domain = Domain::source;
};

// Shuffled union of a source and a labeled target batch, tagged intermediate.
DomainBatch build_intermediate(const DomainBatch& batch_s, const DomainBatch& batch_t, Rng& rng);

}  // namespace ddacdn

#endif
