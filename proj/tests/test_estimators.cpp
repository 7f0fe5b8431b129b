#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <cmath>
#include <complex>
#include <vector>

#include "nqsite/ed_oracle.hpp"
#include "nqsite/estimators.hpp"
#include "nqsite/hamiltonian.hpp"
#include "nqsite/hilbert.hpp"
#include "nqsite/lattice.hpp"
#include "nqsite/nqs_model.hpp"
#include "nqsite/rng.hpp"
#include "nqsite/wavefunction.hpp"

using namespace nqsite;
using cd = std::complex<double>;

namespace {

Architecture small_arch(int width, int depth) {
  Architecture a;
  a.d_lat = 4;
  a.d_p = 2;
  a.d_enc = 4;
  a.width = width;
  a.depth = depth;
  return a;
}

std::vector<SpinConfig> draw_samples(int n, std::uint64_t seed, int n_up = 8) {
  CounterRng rng(seed, 0);
  std::vector<SpinConfig> out;
  for (int k = 0; k < n; ++k) out.push_back(random_config(16, n_up, rng));
  return out;
}

}  // namespace

TEST_SUITE("estimators") {

TEST_CASE("local energy equals the connected-row sum evaluated directly") {
  const Lattice lat = build_lattice(4);
  const Couplings cpl{1.0, 0.5};
  NqsNetwork net(small_arch(8, 2));
  net.init_params(31);
  CounterRng rng(32, 0);
  for (int k = 0; k < 20; ++k) {
    const SpinConfig s = random_config(16, 8, rng);
    const ConnectedSet row = connected(lat, cpl, s);
    const cd psi_s = std::exp(log_psi(net.psi(s)));
    cd direct = row.diagonal;
    for (const auto& e : row.off_diag)
      direct += e.amplitude * std::exp(log_psi(net.psi(e.config))) / psi_s;
    const cd h = local_energy(net, lat, cpl, s);
    CHECK(std::abs(h - direct) < 1e-12 * std::max(1.0, std::abs(direct)));
  }
}

TEST_CASE("local energy of an exact eigenstate is its eigenvalue") {
  const Lattice lat = build_lattice(4);
  const Couplings cpl{1.0, 0.5};
  const SectorIndex sec = enumerate_sector(16, 8);
  const EdResult ed = ground_state(lat, cpl, sec);
  Eigen::VectorXcd amps = ed.ground.cast<cd>();
  const TabulatedPsi psi(sec, amps);

  const EnergyMoments m =
      energy_moments_exact(psi, lat, cpl, sec, E3Mode::approximate);
  CHECK(m.e1 == doctest::Approx(ed.e0).epsilon(1e-10));
  CHECK(m.sigma2 < 1e-8 * ed.e0 * ed.e0);
  CHECK(m.sigma_e == 0.0);
  CHECK(m.n_samples == sec.dim());

  // On high-weight states the pointwise local energy reproduces e0; tiny
  // amplitudes would amplify the eigensolver residual, so stay off them.
  const std::vector<double> w = exact_weights(psi, sec);
  int checked = 0;
  for (std::size_t k = 0; k < sec.dim() && checked < 40; ++k) {
    if (w[k] < 1e-4) continue;
    const cd h = local_energy(psi, lat, cpl, sec.config(k));
    CHECK(std::abs(h - cd(ed.e0, 0.0)) < 1e-6);
    ++checked;
  }
  CHECK(checked == 40);
}

TEST_CASE("batched local energies match single evaluations") {
  const Lattice lat = build_lattice(4);
  const Couplings cpl{1.0, 0.2};
  NqsNetwork net(small_arch(12, 2));
  net.init_params(33);
  const auto samples = draw_samples(37, 34);

  std::vector<cd> h(samples.size());
  std::vector<PsiValue> base;
  local_energy_batch(net, lat, cpl, samples, h, &base);
  REQUIRE(base.size() == samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const cd single = local_energy(net, lat, cpl, samples[k]);
    CHECK(std::abs(h[k] - single) < 1e-13 * std::max(1.0, std::abs(single)));
    const PsiValue v = net.psi(samples[k]);
    CHECK(base[k].log_rho == v.log_rho);
    CHECK(base[k].phi == v.phi);
  }
}

TEST_CASE("squared local energy matches two sparse Hamiltonian applications") {
  const Lattice lat = build_lattice(4);
  const Couplings cpl{1.0, 0.8};
  const SectorIndex sec = enumerate_sector(16, 8);
  NqsNetwork net(small_arch(8, 2));
  net.init_params(35);

  const Eigen::VectorXcd psi = psi_vector(net, sec);
  Eigen::VectorXcd hpsi, h2psi;
  apply_hamiltonian(lat, cpl, sec, psi, hpsi);
  apply_hamiltonian(lat, cpl, sec, hpsi, h2psi);

  CounterRng rng(36, 0);
  for (int k = 0; k < 12; ++k) {
    const std::size_t ord = rng.next_below(sec.dim());
    const cd expect = h2psi[(Eigen::Index)ord] / psi[(Eigen::Index)ord];
    const cd got = local_energy_sq(net, lat, cpl, sec.config(ord));
    CHECK(std::abs(got - expect) < 1e-10 * std::max(1.0, std::abs(expect)));
  }
}

TEST_CASE("sampled moments match hand-computed averages") {
  const Lattice lat = build_lattice(4);
  const Couplings cpl{1.0, 0.5};
  NqsNetwork net(small_arch(8, 2));
  net.init_params(37);
  const auto samples = draw_samples(64, 38);

  std::vector<cd> h(samples.size());
  local_energy_batch(net, lat, cpl, samples, h);
  const double n = static_cast<double>(samples.size());
  double e1 = 0, e2 = 0, e3a = 0, re2 = 0;
  for (const cd& x : h) {
    e1 += x.real();
    e2 += std::norm(x);
    e3a += x.real() * std::norm(x);
    re2 += x.real() * x.real();
  }
  e1 /= n; e2 /= n; e3a /= n; re2 /= n;

  const EnergyMoments m =
      energy_moments(net, lat, cpl, samples, E3Mode::approximate);
  CHECK(m.e1 == doctest::Approx(e1).epsilon(1e-13));
  CHECK(m.e2 == doctest::Approx(e2).epsilon(1e-13));
  CHECK(m.e3 == doctest::Approx(e3a).epsilon(1e-13));
  CHECK(m.sigma2 == doctest::Approx(e2 - e1 * e1).epsilon(1e-12));
  CHECK(m.sigma_e ==
        doctest::Approx(std::sqrt((re2 - e1 * e1) / n)).epsilon(1e-12));
  CHECK(m.n_samples == samples.size());
  CHECK(m.e3_mode == E3Mode::approximate);

  SUBCASE("exact third moment uses the nested local value") {
    const EnergyMoments mx =
        energy_moments(net, lat, cpl, samples, E3Mode::exact);
    double e3x = 0;
    for (std::size_t k = 0; k < samples.size(); ++k)
      e3x += std::real(std::conj(h[k]) *
                       local_energy_sq(net, lat, cpl, samples[k]));
    e3x /= n;
    CHECK(mx.e3 == doctest::Approx(e3x).epsilon(1e-12));
    CHECK(mx.e1 == doctest::Approx(e1).epsilon(1e-13));
    CHECK(mx.e3_mode == E3Mode::exact);
  }

  SUBCASE("blocked standard error uses sixteen contiguous block means") {
    const EnergyMoments mb =
        energy_moments(net, lat, cpl, samples, E3Mode::approximate, true);
    double means[16];
    for (int b = 0; b < 16; ++b) {
      means[b] = 0;
      for (int i = b * 4; i < (b + 1) * 4; ++i) means[b] += h[(std::size_t)i].real();
      means[b] /= 4.0;
    }
    double mu = 0;
    for (double x : means) mu += x;
    mu /= 16.0;
    double var = 0;
    for (double x : means) var += (x - mu) * (x - mu);
    CHECK(mb.sigma_e ==
          doctest::Approx(std::sqrt(var / (16.0 * 15.0))).epsilon(1e-12));
    CHECK(mb.e1 == doctest::Approx(e1).epsilon(1e-13));
  }

  SUBCASE("tiny batches fall back to the naive standard error") {
    const auto few = draw_samples(8, 39);
    const EnergyMoments ma =
        energy_moments(net, lat, cpl, few, E3Mode::approximate, false);
    const EnergyMoments mbk =
        energy_moments(net, lat, cpl, few, E3Mode::approximate, true);
    CHECK(ma.sigma_e == mbk.sigma_e);
  }
}

TEST_CASE("exact-sum moments match sparse-matrix quadratic forms") {
  const Lattice lat = build_lattice(4);
  const Couplings cpl{1.0, 0.5};
  const SectorIndex sec = enumerate_sector(16, 8);
  NqsNetwork net(small_arch(8, 2));
  net.init_params(40);

  const Eigen::VectorXcd psi = psi_vector(net, sec);
  Eigen::VectorXcd h1, h2, h3;
  apply_hamiltonian(lat, cpl, sec, psi, h1);
  apply_hamiltonian(lat, cpl, sec, h1, h2);
  apply_hamiltonian(lat, cpl, sec, h2, h3);
  const double norm = psi.squaredNorm();
  const double e1 = psi.dot(h1).real() / norm;
  const double e2 = psi.dot(h2).real() / norm;
  const double e3 = psi.dot(h3).real() / norm;

  const EnergyMoments m =
      energy_moments_exact(net, lat, cpl, sec, E3Mode::exact);
  CHECK(m.e1 == doctest::Approx(e1).epsilon(1e-11));
  CHECK(m.e2 == doctest::Approx(e2).epsilon(1e-11));
  CHECK(m.e3 == doctest::Approx(e3).epsilon(1e-11));
  CHECK(m.sigma2 == doctest::Approx(e2 - e1 * e1).epsilon(1e-10));
  CHECK(m.sigma_e == 0.0);
}

TEST_CASE("euler target equals psi minus delta_tau H psi") {
  const Lattice lat = build_lattice(4);
  const Couplings cpl{1.0, 0.2};
  const SectorIndex sec = enumerate_sector(16, 8);
  NqsNetwork fixed(small_arch(8, 2));
  fixed.init_params(41);

  const Eigen::VectorXcd psi = psi_vector(fixed, sec);
  Eigen::VectorXcd hpsi;
  apply_hamiltonian(lat, cpl, sec, psi, hpsi);

  const double dt = 0.07;
  const Eigen::VectorXcd target = euler_target_table(fixed, lat, cpl, sec, dt);
  CHECK((target - (psi - dt * hpsi)).cwiseAbs().maxCoeff() <
        1e-12 * psi.cwiseAbs().maxCoeff());
  CHECK(euler_target_table(fixed, lat, cpl, sec, 0.0) == psi);
}

TEST_CASE("overlap loss: value, scale invariance and orthogonal blowup") {
  const Lattice lat = build_lattice(4);
  const SectorIndex sec = enumerate_sector(16, 8);
  NqsNetwork net(small_arch(8, 2));
  net.init_params(42);
  const Eigen::VectorXcd psi = psi_vector(net, sec);

  SUBCASE("matches the normalized-overlap formula") {
    const Eigen::VectorXcd target =
        euler_target_table(net, lat, Couplings{1.0, 0.5}, sec, 0.11);
    const double expect =
        -std::log(std::norm(psi.dot(target)) /
                  (psi.squaredNorm() * target.squaredNorm()));
    CHECK(ite_loss_exact(net, sec, target) ==
          doctest::Approx(expect).epsilon(1e-12));
    CHECK(expect > 0.0);
  }

  SUBCASE("a scaled copy of psi has zero loss") {
    CHECK(std::abs(ite_loss_exact(net, sec, Eigen::VectorXcd(2.7 * psi))) <
          1e-12);
  }

  SUBCASE("an orthogonal target sends the loss to +infinity") {
    Eigen::VectorXcd target = Eigen::VectorXcd::Zero(psi.size());
    // Swap two components so <psi|target> = 0 exactly.
    target[0] = std::conj(psi[1]);
    target[1] = -std::conj(psi[0]);
    CHECK(std::isinf(ite_loss_exact(net, sec, target)));
  }
}

TEST_CASE("adjoint-weighted gradient combines per-config log gradients") {
  const Lattice lat = build_lattice(4);
  NqsNetwork net(small_arch(8, 2));
  net.init_params(43);
  const auto samples = draw_samples(6, 44);

  ForwardWorkspace ws;
  std::vector<PsiValue> vals(samples.size());
  net.forward(samples, vals, &ws);

  std::vector<cd> alpha;
  CounterRng rng(45, 0);
  for (std::size_t k = 0; k < samples.size(); ++k)
    alpha.emplace_back(rng.next_double() - 0.5, rng.next_double() - 0.5);

  const Eigen::VectorXd got = weighted_log_grad(net, ws, alpha);
  Eigen::VectorXd expect = Eigen::VectorXd::Zero(got.size());
  for (std::size_t k = 0; k < samples.size(); ++k) {
    Eigen::VectorXd d_rho, d_phi;
    net.log_psi_grad(samples[k], d_rho, d_phi);
    expect += 2.0 * alpha[k].real() * d_rho + 2.0 * alpha[k].imag() * d_phi;
  }
  CHECK((got - expect).cwiseAbs().maxCoeff() <
        1e-12 * std::max(1.0, expect.cwiseAbs().maxCoeff()));
}

TEST_CASE("sampled overlap-loss gradient matches its defining formula") {
  const Lattice lat = build_lattice(4);
  const Couplings cpl{1.0, 0.5};
  NqsNetwork net(small_arch(8, 2));
  net.init_params(46);
  NqsNetwork fixed(small_arch(8, 2));
  fixed.init_params(47);
  const auto samples = draw_samples(48, 48);
  const double dt = 0.06;

  const IteGradResult res = ite_loss_grad(net, fixed, lat, cpl, samples, dt);

  // r(s) = (psi_f / psi)(1 - dt H_loc^f), all per sample.
  const double n = static_cast<double>(samples.size());
  std::vector<cd> r(samples.size());
  cd r_mean = 0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const cd ratio = std::exp(log_psi(fixed.psi(samples[k])) -
                              log_psi(net.psi(samples[k])));
    const cd hf = local_energy(fixed, lat, cpl, samples[k]);
    r[k] = ratio * (1.0 - dt * hf);
    r_mean += r[k];
  }
  r_mean /= n;

  Eigen::VectorXd expect = Eigen::VectorXd::Zero(res.grad.size());
  double r_abs2 = 0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    Eigen::VectorXd d_rho, d_phi;
    net.log_psi_grad(samples[k], d_rho, d_phi);
    // 2 Re{ <g> - <r g>/<r> } with g = d log rho - i d phi
    const cd c = 1.0 / n - (r[k] / r_mean) / n;
    expect += 2.0 * c.real() * d_rho + 2.0 * c.imag() * d_phi;
    r_abs2 += std::norm(r[k]);
  }
  r_abs2 /= n;

  CHECK((res.grad - expect).cwiseAbs().maxCoeff() <
        1e-10 * std::max(1.0, expect.cwiseAbs().maxCoeff()));
  CHECK(std::abs(res.mean_ratio - r_mean) < 1e-12 * std::abs(r_mean));
  CHECK(res.loss ==
        doctest::Approx(-std::log(std::norm(r_mean) / r_abs2)).epsilon(1e-10));
}

TEST_CASE("sampled energy-loss gradient matches its defining formula") {
  const Lattice lat = build_lattice(4);
  const Couplings cpl{1.0, 0.2};
  NqsNetwork net(small_arch(8, 2));
  net.init_params(49);
  const auto samples = draw_samples(40, 50);

  const ELossGradResult res = e_loss_grad(net, lat, cpl, samples);

  const double n = static_cast<double>(samples.size());
  std::vector<cd> h(samples.size());
  local_energy_batch(net, lat, cpl, samples, h);
  cd h_mean = 0;
  for (const cd& x : h) h_mean += x;
  h_mean /= n;

  Eigen::VectorXd expect = Eigen::VectorXd::Zero(res.grad.size());
  for (std::size_t k = 0; k < samples.size(); ++k) {
    Eigen::VectorXd d_rho, d_phi;
    net.log_psi_grad(samples[k], d_rho, d_phi);
    const cd c = (h[k] - h_mean) / n;  // 2 Re{ <H g> - <H><g> }
    expect += 2.0 * c.real() * d_rho + 2.0 * c.imag() * d_phi;
  }
  CHECK((res.grad - expect).cwiseAbs().maxCoeff() <
        1e-10 * std::max(1.0, expect.cwiseAbs().maxCoeff()));
  CHECK(std::abs(res.mean_energy - h_mean) < 1e-12 * std::abs(h_mean));
}

TEST_CASE("exact-sum gradients match their Born-weighted formulas") {
  const Lattice lat = build_lattice(4);
  const Couplings cpl{1.0, 0.8};
  const SectorIndex sec = enumerate_sector(16, 2);  // dim 120, cheap
  NqsNetwork net(small_arch(8, 2));
  net.init_params(51);
  NqsNetwork fixed(small_arch(8, 2));
  fixed.init_params(52);
  const double dt = 0.09;

  const std::vector<double> w = exact_weights(net, sec);
  std::vector<Eigen::VectorXd> d_rho(sec.dim()), d_phi(sec.dim());
  for (std::size_t k = 0; k < sec.dim(); ++k)
    net.log_psi_grad(sec.config(k), d_rho[k], d_phi[k]);

  SUBCASE("overlap loss") {
    const IteGradResult res =
        ite_loss_grad_exact(net, fixed, lat, cpl, sec, dt);
    cd r_mean = 0;
    std::vector<cd> r(sec.dim());
    for (std::size_t k = 0; k < sec.dim(); ++k) {
      const SpinConfig s = sec.config(k);
      const cd ratio =
          std::exp(log_psi(fixed.psi(s)) - log_psi(net.psi(s)));
      r[k] = ratio * (1.0 - dt * local_energy(fixed, lat, cpl, s));
      r_mean += w[k] * r[k];
    }
    Eigen::VectorXd expect = Eigen::VectorXd::Zero(res.grad.size());
    for (std::size_t k = 0; k < sec.dim(); ++k) {
      const cd c = w[k] * (1.0 - r[k] / r_mean);
      expect += 2.0 * c.real() * d_rho[k] + 2.0 * c.imag() * d_phi[k];
    }
    CHECK((res.grad - expect).cwiseAbs().maxCoeff() <
          1e-10 * std::max(1.0, expect.cwiseAbs().maxCoeff()));
  }

  SUBCASE("energy loss") {
    const ELossGradResult res = e_loss_grad_exact(net, lat, cpl, sec);
    std::vector<cd> h(sec.dim());
    cd h_mean = 0;
    for (std::size_t k = 0; k < sec.dim(); ++k) {
      h[k] = local_energy(net, lat, cpl, sec.config(k));
      h_mean += w[k] * h[k];
    }
    Eigen::VectorXd expect = Eigen::VectorXd::Zero(res.grad.size());
    for (std::size_t k = 0; k < sec.dim(); ++k) {
      const cd c = w[k] * (h[k] - h_mean);
      expect += 2.0 * c.real() * d_rho[k] + 2.0 * c.imag() * d_phi[k];
    }
    CHECK((res.grad - expect).cwiseAbs().maxCoeff() <
          1e-10 * std::max(1.0, expect.cwiseAbs().maxCoeff()));
    CHECK(std::abs(res.mean_energy - h_mean) < 1e-11 * std::abs(h_mean));
  }
}

TEST_CASE("overlap gradient vanishes identically at the fixed point") {
  // With the frozen net equal to the live net and delta_tau = 0 every
  // sampled ratio is exactly 1, so the gradient must be exact zeros, not
  // merely small numbers.
  const Lattice lat = build_lattice(4);
  const Couplings cpl{1.0, 0.5};
  NqsNetwork net(small_arch(12, 2));
  net.init_params(53);
  const auto samples = draw_samples(41, 54);  // odd count on purpose

  SUBCASE("same object") {
    const IteGradResult res = ite_loss_grad(net, net, lat, cpl, samples, 0.0);
    CHECK(res.mean_ratio == cd(1.0, 0.0));
    CHECK(res.loss == 0.0);
    for (Eigen::Index i = 0; i < res.grad.size(); ++i)
      CHECK(res.grad[i] == 0.0);
  }

  SUBCASE("identical copy") {
    NqsNetwork copy(small_arch(12, 2));
    copy.params() = net.params();
    const IteGradResult res = ite_loss_grad(net, copy, lat, cpl, samples, 0.0);
    CHECK(res.mean_ratio == cd(1.0, 0.0));
    for (Eigen::Index i = 0; i < res.grad.size(); ++i)
      CHECK(res.grad[i] == 0.0);
  }
}

}  // TEST_SUITE
