#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>

namespace etcons {

namespace detail {

// Padé approximant r_m(A) = (V - U)^{-1} (V + U); U holds the odd terms.
template <std::size_t M>
void pade_terms(const Eigen::MatrixXd& a, const std::array<double, M + 1>& b,
                Eigen::MatrixXd& u, Eigen::MatrixXd& v) {
  const auto n = a.rows();
  const Eigen::MatrixXd ident = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd a2 = a * a;
  Eigen::MatrixXd odd = b[1] * ident;
  Eigen::MatrixXd even = b[0] * ident;
  Eigen::MatrixXd power = ident;
  for (std::size_t k = 2; k <= M; k += 2) {
    power = power * a2;
    even += b[k] * power;
    if (k + 1 <= M) odd += b[k + 1] * power;
  }
  u = a * odd;
  v = even;
}

// Degree-13 variant with the factored evaluation that needs only six
// matrix products.
inline void pade13_terms(const Eigen::MatrixXd& a, Eigen::MatrixXd& u, Eigen::MatrixXd& v) {
  constexpr std::array<double, 14> b = {
      64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
      129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
      1323241920.0,        40840800.0,          960960.0,           16380.0,
      182.0,               1.0};
  const auto n = a.rows();
  const Eigen::MatrixXd ident = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd a2 = a * a;
  const Eigen::MatrixXd a4 = a2 * a2;
  const Eigen::MatrixXd a6 = a4 * a2;
  const Eigen::MatrixXd inner_u = a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2);
  u = a * (inner_u + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident);
  v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 +
      b[0] * ident;
}

}  // namespace detail

// Matrix exponential by scaling and squaring with a Padé approximant
// (Higham 2005). Degree is chosen from the 1-norm of the argument; for the
// degree-13 branch the argument is scaled by 2^-s so its norm falls below
// theta_13, and the result is squared s times.
inline Eigen::MatrixXd expm(const Eigen::MatrixXd& a) {
  const auto n = a.rows();
  if (n == 0) return a;
  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();

  Eigen::MatrixXd u;
  Eigen::MatrixXd v;
  int squarings = 0;
  if (norm1 <= 1.495585217958292e-2) {
    detail::pade_terms<3>(a, {120.0, 60.0, 12.0, 1.0}, u, v);
  } else if (norm1 <= 2.539398330063230e-1) {
    detail::pade_terms<5>(a, {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0}, u, v);
  } else if (norm1 <= 9.504178996162932e-1) {
    detail::pade_terms<7>(
        a, {17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0}, u, v);
  } else if (norm1 <= 2.097847961257068) {
    detail::pade_terms<9>(a,
                          {17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
                           2162160.0, 110880.0, 3960.0, 90.0, 1.0},
                          u, v);
  } else {
    constexpr double theta13 = 5.371920351148152;
    if (norm1 > theta13) squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
    const Eigen::MatrixXd scaled = a * std::ldexp(1.0, -squarings);
    detail::pade13_terms(scaled, u, v);
  }

  Eigen::MatrixXd result = (v - u).partialPivLu().solve(v + u);
  for (int k = 0; k < squarings; ++k) result = result * result;
  return result;
}

}  // namespace etcons
