#include <Eigen/Dense>
#include <stdexcept>

#include "binquant/gram.hpp"

namespace binquant {

std::vector<double> lstsq_solve(const DenseMatrix& a, const std::vector<double>& b) {
  require_dims(a.rows == a.cols && a.rows == b.size(), "lstsq_solve");
  if (!a.all_finite())
    throw std::invalid_argument("lstsq_solve: non-finite matrix entries");
  for (double v : b)
    if (!std::isfinite(v))
      throw std::invalid_argument("lstsq_solve: non-finite rhs entries");

  const Eigen::Index n = static_cast<Eigen::Index>(a.rows);
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
      am(a.data.data(), n, n);
  Eigen::Map<const Eigen::VectorXd> bv(b.data(), n);

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(am, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-10);
  const Eigen::VectorXd x = svd.solve(bv);
  return std::vector<double>(x.data(), x.data() + n);
}

}  // namespace binquant
