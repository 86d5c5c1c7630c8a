#include "gauge_lab/matrix_exp.hpp"

#include <array>
#include <cmath>

namespace gauge_lab {

namespace {

// c_k = (2m - k)! m! / ((2m)! k! (m - k)!) for m = 6.
constexpr std::array<double, 7> kPade6 = {
    1.0, 1.0 / 2.0, 5.0 / 44.0, 1.0 / 66.0, 1.0 / 792.0, 1.0 / 15840.0, 1.0 / 665280.0};

constexpr double kScaledNormBound = 0.5;

}  // namespace

Matrix expm(const Matrix& a) {
  if (a.rows() != a.cols()) throw ShapeError("expm needs a square matrix");
  const auto n = a.rows();
  if (n == 0) return a;
  if (!a.allFinite()) throw NonFiniteState("expm argument is not finite");

  const double norm = a.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > kScaledNormBound) {
    squarings = static_cast<int>(std::ceil(std::log2(norm / kScaledNormBound)));
  }
  const Matrix scaled = std::ldexp(1.0, -squarings) * a;

  const Matrix identity = Matrix::Identity(n, n);
  const Matrix a2 = scaled * scaled;
  const Matrix a4 = a2 * a2;
  const Matrix a6 = a4 * a2;
  const Matrix even = kPade6[0] * identity + kPade6[2] * a2 + kPade6[4] * a4 + kPade6[6] * a6;
  const Matrix odd = scaled * (kPade6[1] * identity + kPade6[3] * a2 + kPade6[5] * a4);

  Matrix result = (even - odd).partialPivLu().solve(even + odd);
  for (int i = 0; i < squarings; ++i) result = result * result;
  return result;
}

}  // namespace gauge_lab
