#include "oracles.hpp"
#include "support.hpp"

#include "repclass/error.hpp"
#include "repclass/linalg.hpp"

using namespace repclass;

namespace {

Matrix random_matrix(PortableRng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

}  // namespace

TEST_SUITE("linalg") {

TEST_CASE("spd solve with a scaled identity") {
  const SpdFactor f = spd_factorize(2.0 * Matrix::Identity(3, 3));
  const Vector x = f.solve(Vector{{2.0, 4.0, 6.0}});
  CHECK(x(0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(x(1) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(x(2) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK_FALSE(f.auto_ridged());
}

TEST_CASE("spd solve adds the requested ridge") {
  const SpdFactor f = spd_factorize(Matrix::Identity(2, 2), 1.0);
  const Vector x = f.solve(Vector{{2.0, 2.0}});
  CHECK(x(0) == doctest::Approx(1.0));
  CHECK(x(1) == doctest::Approx(1.0));
  CHECK(f.applied_ridge() == 1.0);
}

TEST_CASE("spd solve agrees with Gaussian elimination on random systems") {
  PortableRng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix m = random_matrix(rng, 6, 6);
    const Matrix a = m.transpose() * m + 0.1 * Matrix::Identity(6, 6);
    const Vector b = random_matrix(rng, 6, 1);
    const Vector x = spd_factorize(a).solve(b);
    const Vector ref = oracle::gauss_solve(a, b);
    CHECK((x - ref).lpNorm<Eigen::Infinity>() <= 1e-8 * std::max(1.0, ref.lpNorm<Eigen::Infinity>()));
    CHECK((a * x - b).lpNorm<Eigen::Infinity>() <= 1e-8 * b.lpNorm<Eigen::Infinity>());
  }
}

TEST_CASE("spd solve of a matrix right-hand side solves each column") {
  PortableRng rng(12);
  const Matrix m = random_matrix(rng, 5, 5);
  const Matrix a = m.transpose() * m + Matrix::Identity(5, 5);
  const Matrix b = random_matrix(rng, 5, 3);
  const Matrix x = spd_factorize(a).solve(b);
  for (int j = 0; j < 3; ++j) CHECK((x.col(j) - oracle::gauss_solve(a, b.col(j))).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("spd factorize falls back to a small ridge for a singular Gram") {
  // Rank-1 Gram of two identical columns.
  Matrix x(3, 2);
  x << 1, 1, 2, 2, 3, 3;
  const Matrix g = x.transpose() * x;
  const SpdFactor f = spd_factorize(g);
  CHECK(f.auto_ridged());
  CHECK(f.applied_ridge() == doctest::Approx(1e-10 * g.trace() / 2.0));
}

TEST_CASE("spd factorize rejects bad input") {
  CHECK(kind_of([] { spd_factorize(Matrix::Identity(2, 3)); }) == ErrorKind::DimensionMismatch);
  Matrix asym = Matrix::Identity(2, 2);
  asym(0, 1) = 0.5;
  CHECK(kind_of([&] { spd_factorize(asym); }) == ErrorKind::DimensionMismatch);
  CHECK(kind_of([] { spd_factorize(-Matrix::Identity(2, 2)); }) == ErrorKind::NotPositiveDefinite);
  Matrix nan = Matrix::Identity(2, 2);
  nan(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK(kind_of([&] { spd_factorize(nan); }) == ErrorKind::NonFiniteValue);
}

TEST_CASE("make_matrix refuses empty or non-finite data") {
  const double ok[] = {1, 2, 3, 4};
  CHECK(make_matrix(2, 2, ok)(1, 0) == 2.0);
  const double bad[] = {1, std::numeric_limits<double>::infinity()};
  CHECK(kind_of([&] { make_matrix(1, 2, bad); }) == ErrorKind::NonFiniteValue);
  CHECK(kind_of([&] { make_matrix(0, 2, ok); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("pca of identical columns is rank deficient") {
  Matrix x = Vector{{1.0, 2.0, 3.0}}.replicate(1, 5);
  CHECK(kind_of([&] { pca_fit(x, 1); }) == ErrorKind::RankDeficient);
}

TEST_CASE("pca reports a reduced model when fewer directions carry variance") {
  PortableRng rng(3);
  const Matrix basis = random_matrix(rng, 6, 2);
  const Matrix x = basis * random_matrix(rng, 2, 10);
  const PcaModel m = pca_fit(x, 4);
  CHECK(m.rank_deficient);
  CHECK(m.k() == 2);
  CHECK(m.requested_k == 4);
}

TEST_CASE("pca on an exact two-dimensional subspace reconstructs the data") {
  PortableRng rng(4);
  const Matrix basis = random_matrix(rng, 7, 2);
  const Matrix x = basis * random_matrix(rng, 2, 12) + Vector::Constant(7, 0.5).replicate(1, 12);
  const PcaModel m = pca_fit(x, 2);
  CHECK_FALSE(m.rank_deficient);
  const Matrix back = pca_reconstruct(m, pca_project(m, x));
  CHECK((back - x).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("pca eigenvalues match a Jacobi decomposition of the covariance") {
  PortableRng rng(5);
  const Matrix x = random_matrix(rng, 10, 50);
  const PcaModel m = pca_fit(x, 3);

  const Vector mean = x.rowwise().mean();
  const Matrix centered = x.colwise() - mean;
  const Matrix cov = oracle::transpose_times(Matrix(centered.transpose()), Matrix(centered.transpose())) / 49.0;
  const auto ref = oracle::jacobi_eigen(cov);
  for (int i = 0; i < 3; ++i) {
    CHECK(m.eigenvalues(i) == doctest::Approx(ref.values(i)).epsilon(1e-6));
    // same direction up to sign
    CHECK(std::abs(m.basis.col(i).dot(ref.vectors.col(i))) == doctest::Approx(1.0).epsilon(1e-6));
  }

  // projected training data has per-row variance equal to the eigenvalues
  const Matrix z = pca_project(m, x);
  for (int i = 0; i < 3; ++i) {
    const double var = z.row(i).squaredNorm() / 49.0;
    CHECK(var == doctest::Approx(ref.values(i)).epsilon(1e-6));
  }
}

TEST_CASE("pca uses the inner-product route when samples are fewer than features") {
  PortableRng rng(6);
  const Matrix x = random_matrix(rng, 40, 9);
  const PcaModel m = pca_fit(x, 5);
  const Matrix centered = x.colwise() - x.rowwise().mean();
  const auto ref = oracle::jacobi_eigen(centered * centered.transpose() / 8.0);
  for (int i = 0; i < 5; ++i) CHECK(m.eigenvalues(i) == doctest::Approx(ref.values(i)).epsilon(1e-6));
  CHECK((m.basis.transpose() * m.basis - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("pca basis is orthonormal and sign-normalized") {
  PortableRng rng(7);
  for (auto [d, n] : {std::pair<int, int>{12, 30}, {30, 12}}) {
    const Matrix x = random_matrix(rng, d, n);
    const PcaModel m = pca_fit(x, 6);
    CHECK((m.basis.transpose() * m.basis - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() <= 1e-8);
    for (int i = 0; i < 6; ++i) {
      Eigen::Index arg = 0;
      m.basis.col(i).cwiseAbs().maxCoeff(&arg);
      CHECK(m.basis(arg, i) > 0.0);
      if (i > 0) CHECK(m.eigenvalues(i) <= m.eigenvalues(i - 1));
    }
  }
}

TEST_CASE("pca projection of the mean is zero and a full basis only centers") {
  PortableRng rng(8);
  const Matrix x = random_matrix(rng, 4, 20);
  const PcaModel m = pca_fit(x, 4);
  CHECK(pca_project(m, m.mean.replicate(1, 3)).cwiseAbs().maxCoeff() < 1e-12);
  const Matrix y = random_matrix(rng, 4, 5);
  const Matrix z = pca_project(m, y);
  // orthonormal full basis: norms of centered columns are preserved
  const Matrix centered = y.colwise() - m.mean;
  for (int j = 0; j < 5; ++j) CHECK(z.col(j).norm() == doctest::Approx(centered.col(j).norm()).epsilon(1e-12));
  CHECK((pca_reconstruct(m, z) - y).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("reconstruct after project is idempotent on the span") {
  PortableRng rng(9);
  const Matrix x = random_matrix(rng, 8, 25);
  const PcaModel m = pca_fit(x, 3);
  const Matrix once = pca_reconstruct(m, pca_project(m, x));
  const Matrix twice = pca_reconstruct(m, pca_project(m, once));
  CHECK((once - twice).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("pca argument checks") {
  PortableRng rng(10);
  const Matrix x = random_matrix(rng, 5, 4);
  CHECK(kind_of([&] { pca_fit(x, 0); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([&] { pca_fit(x, 5); }) == ErrorKind::InvalidArgument);
  const PcaModel m = pca_fit(x, 2);
  CHECK(kind_of([&] { pca_project(m, Matrix::Zero(4, 1)); }) == ErrorKind::DimensionMismatch);
  CHECK(kind_of([&] { pca_reconstruct(m, Matrix::Zero(3, 1)); }) == ErrorKind::DimensionMismatch);
}

}  // TEST_SUITE
