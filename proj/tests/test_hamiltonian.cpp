#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "nqsite/hamiltonian.hpp"
#include "nqsite/hilbert.hpp"
#include "nqsite/lattice.hpp"
#include "nqsite/rng.hpp"

using namespace nqsite;

namespace {

SpinConfig neel_4x4() {
  std::uint64_t bits = 0;
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x)
      if ((x + y) % 2 == 0) bits |= 1ull << (y * 4 + x);
  return SpinConfig{bits, 16};
}

}  // namespace

TEST_SUITE("hamiltonian") {

TEST_CASE("Neel state: every nn bond anti-aligned, every nnn bond aligned") {
  const Lattice lat = build_lattice(4);
  const SpinConfig neel = neel_4x4();

  SUBCASE("j2 = 0") {
    const ConnectedSet row = connected(lat, Couplings{1.0, 0.0}, neel);
    CHECK(row.diagonal == doctest::Approx(-8.0).epsilon(1e-14));
    REQUIRE(row.off_diag.size() == 32);
    for (const auto& e : row.off_diag) {
      CHECK(e.amplitude == doctest::Approx(0.5).epsilon(1e-14));
      CHECK(e.config.n_up() == 8);  // exchange preserves magnetization
    }
  }
  SUBCASE("j1 = j2 = 1 cancels the diagonal") {
    const ConnectedSet row = connected(lat, Couplings{1.0, 1.0}, neel);
    CHECK(row.diagonal == doctest::Approx(0.0).epsilon(1e-14));
    // Aligned nnn bonds produce no exchange, so still 32 entries.
    CHECK(row.off_diag.size() == 32);
  }
}

TEST_CASE("fully polarized state is diagonal") {
  const Lattice lat = build_lattice(4);
  const SpinConfig all_up{0xFFFFu, 16};
  const ConnectedSet row = connected(lat, Couplings{1.0, 0.7}, all_up);
  // 32 nn and 32 nnn bonds, each aligned: (j1 + j2) * 32 / 4.
  CHECK(row.diagonal == doctest::Approx(8.0 * 1.7).epsilon(1e-14));
  CHECK(row.off_diag.empty());
}

TEST_CASE("connected rows are sorted by target bit pattern") {
  const Lattice lat = build_lattice(4);
  CounterRng rng(77, 0);
  for (int k = 0; k < 20; ++k) {
    const SpinConfig s = random_config(16, 8, rng);
    const ConnectedSet row = connected(lat, Couplings{1.0, 0.5}, s);
    for (std::size_t j = 1; j < row.off_diag.size(); ++j)
      CHECK(row.off_diag[j - 1].config.bits < row.off_diag[j].config.bits);
  }
}

TEST_CASE("uniform vector is an eigenvector with energy (j1+j2)*Nb/4") {
  // The symmetric combination of all sector states is the maximal-spin
  // state, on which every bond term contributes +1/4.
  const Lattice lat = build_lattice(4);
  const SectorIndex sec = enumerate_sector(16, 8);
  for (const double j2 : {0.0, 0.5, 1.3}) {
    const Couplings cpl{1.0, j2};
    const Eigen::VectorXd ones =
        Eigen::VectorXd::Ones(static_cast<Eigen::Index>(sec.dim()));
    Eigen::VectorXd hx(ones.size());
    apply_hamiltonian(lat, cpl, sec, ones, hx);
    const double expect = 8.0 * (1.0 + j2);
    CHECK((hx.array() - expect).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("matrix-free apply agrees with the explicit sparse matrix") {
  const Lattice lat = build_lattice(4);
  const SectorIndex sec = enumerate_sector(16, 8);
  const Couplings cpl{1.0, 0.5};
  const Eigen::SparseMatrix<double> h = sector_matrix(lat, cpl, sec);
  REQUIRE(h.rows() == 12870);

  CounterRng rng(2024, 3);
  Eigen::VectorXd x(h.rows());
  for (Eigen::Index i = 0; i < x.size(); ++i)
    x[i] = 2.0 * rng.next_double() - 1.0;
  Eigen::VectorXd y(x.size());
  apply_hamiltonian(lat, cpl, sec, x, y);
  const Eigen::VectorXd ref = h * x;
  CHECK((y - ref).cwiseAbs().maxCoeff() < 1e-12 * ref.cwiseAbs().maxCoeff());

  // Complex overload: real and imaginary parts propagate independently.
  Eigen::VectorXcd xc(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i)
    xc[i] = std::complex<double>(x[i], -0.5 * x[x.size() - 1 - i]);
  Eigen::VectorXcd yc(x.size());
  apply_hamiltonian(lat, cpl, sec, xc, yc);
  Eigen::VectorXd yim(x.size());
  apply_hamiltonian(lat, cpl, sec, Eigen::VectorXd(xc.imag()), yim);
  CHECK((yc.real() - ref).cwiseAbs().maxCoeff() <
        1e-12 * ref.cwiseAbs().maxCoeff());
  CHECK((yc.imag() - yim).cwiseAbs().maxCoeff() <
        1e-12 * yim.cwiseAbs().maxCoeff());
}

TEST_CASE("sector matrix is symmetric") {
  const Lattice lat = build_lattice(4);
  const SectorIndex sec = enumerate_sector(16, 8);
  const Eigen::SparseMatrix<double> h =
      sector_matrix(lat, Couplings{1.0, 0.8}, sec);
  const Eigen::SparseMatrix<double> ht = h.transpose();
  CHECK(Eigen::SparseMatrix<double>(h - ht).norm() == 0.0);
}

TEST_CASE("dense matrix matches sparse on a small sector") {
  const Lattice lat = build_lattice(4);
  const SectorIndex sec = enumerate_sector(16, 2);  // dim 120
  const Couplings cpl{1.0, 0.5};
  const Eigen::MatrixXd dense = dense_sector_matrix(lat, cpl, sec);
  const Eigen::MatrixXd sparse =
      Eigen::MatrixXd(sector_matrix(lat, cpl, sec));
  CHECK((dense - sparse).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("dense path refuses oversized sectors") {
  const Lattice lat = build_lattice(4);
  const SectorIndex sec = enumerate_sector(16, 8);
  CHECK_THROWS_AS(dense_sector_matrix(lat, Couplings{}, sec),
                  std::length_error);
}

TEST_CASE("length mismatch is rejected") {
  const Lattice lat = build_lattice(4);
  const SectorIndex sec = enumerate_sector(16, 8);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(10);
  Eigen::VectorXd y;
  CHECK_THROWS_AS(apply_hamiltonian(lat, Couplings{}, sec, x, y),
                  std::invalid_argument);
}

}  // TEST_SUITE
