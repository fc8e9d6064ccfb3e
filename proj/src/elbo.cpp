#include "pvmc/elbo.hpp"

#include <cmath>

#include "pvmc/smoothing.hpp"

namespace pvmc {

ELBOEstimates elbo_estimates(const KernelTensor& kernels) {
  kernels.validate();
  const std::size_t N = kernels.particles();
  const double n = static_cast<double>(N);

  std::vector<double> diagonal(N, 0.0);
  double pvae = 0.0;
  for (std::size_t t = 0; t < kernels.steps(); ++t) {
    const LogMatrix& slab = kernels.slabs[t];
    for (std::size_t k = 0; k < N; ++k) diagonal[k] += slab(k, k);
    double sum = 0.0;
    if (t == 0) {
      for (LogValue v : slab.row(0)) sum += v;
      pvae += sum / n;
    } else {
      for (LogValue v : slab.data()) sum += v;
      pvae += sum / (n * n);
    }
  }

  ELBOEstimates e;
  e.pvmc = likelihood_from_kernels(kernels);
  e.iwae = log_sum_exp(diagonal) - std::log(n);
  e.pvae = pvae;
  double vae = 0.0;
  for (double v : diagonal) vae += v;
  e.vae = vae / n;
  return e;
}

}  // namespace pvmc
