#include <cmath>

#include "doctest.h"
#include "svlab/charge.hpp"
#include "svlab/errors.hpp"

using namespace svlab;
using namespace svlab::charge;

namespace {

const radial::CoupledState& state(int d) {
  static const radial::CoupledState s1 = radial::continue_in_beta(-0.5, 1, 20.0).first;
  static const radial::CoupledState s2 = radial::continue_in_beta(-0.5, 2, 20.0).first;
  return d == 1 ? s1 : s2;
}

/// max |density + (d/r) φ′ cos φ| over r ∈ [1, 10], φ = atan2(u, f) differenced centrally.
double identity_error(double h, int M) {
  const auto s = radial::continue_in_beta(-0.5, 1, 20.0, 0.1, h).first;
  const auto f = planar_from_radial(s, M, 2);
  const auto q = charge_density(f);
  const auto& m = *f.mesh;
  const auto& r = s.u.mesh.nodes();
  std::vector<double> phi(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) phi[i] = std::atan2(s.u.values[i], s.f.values[i]);
  double e = 0;
  for (std::size_t i = 1; i + 1 < r.size(); ++i) {
    if (r[i] < 1 || r[i] > 10) continue;
    const double dp = (phi[i + 1] - phi[i - 1]) / (r[i + 1] - r[i - 1]);
    const double expect = -(1.0 / r[i]) * dp * std::cos(phi[i]);
    for (int j = 0; j < M; ++j) e = std::max(e, std::abs(q[m.index(i, j)] - expect));
  }
  return e;
}

planar::NewtonReport planar_state() {
  planar::AnsatzOptions o;
  o.h = 0.2;
  o.arc = 0.2;
  // root of the reduced force at β = 1e-4
  return planar::newton_planar(planar::build_ansatz(7.760858112100518, 2, 1, o), 1e-4);
}

}  // namespace

TEST_SUITE("nmap") {
  TEST_CASE("unit vectors") {
    const auto f = planar_from_radial(state(1), 64);
    const auto n = build_nmap(f);
    double worst = 0;
    for (std::size_t i = 0; i < n.n1.size(); ++i)
      worst = std::max(worst, std::abs(std::sqrt(n.n1[i] * n.n1[i] + n.n2[i] * n.n2[i] + n.n3[i] * n.n3[i]) - 1));
    CHECK(worst < 1e-14);
    const auto rn = build_nmap(state(2));
    for (std::size_t i = 0; i < rn.sin_phi.size(); ++i)
      CHECK(std::abs(rn.sin_phi[i] * rn.sin_phi[i] + rn.cos_phi[i] * rn.cos_phi[i] - 1) < 1e-14);
  }

  TEST_CASE("north pole at the vortex core") {
    const auto rn = build_nmap(state(1));
    CHECK(rn.sin_phi.front() == 1.0);
    CHECK(rn.d == 1);
  }

  TEST_CASE("far field lies on the equator with the vortex phase") {
    for (int d : {1, 2}) {
      const auto f = planar_from_radial(state(d), 64);
      const auto n = build_nmap(f);
      const auto& m = *f.mesh;
      const std::size_t i = m.rings() - 1;
      for (int j = 0; j < m.m_theta(); ++j) {
        const std::size_t a = m.index(i, j);
        CHECK(std::abs(n.n1[a] - std::cos(d * m.theta(j))) < 1e-4);
        CHECK(std::abs(n.n2[a] - std::sin(d * m.theta(j))) < 1e-4);
        CHECK(std::abs(n.n3[a]) < 1e-4);
      }
    }
  }

  TEST_CASE("projective invariance") {
    const auto f = planar_from_radial(state(1), 64);
    auto g = f;
    for (auto* x : {&g.u, &g.v1, &g.v2})
      for (double& y : x->v) y *= 2;
    const auto a = build_nmap(f), b = build_nmap(g);
    for (std::size_t i = 0; i < a.n1.size(); ++i) {
      CHECK(a.n1[i] == b.n1[i]);
      CHECK(a.n2[i] == b.n2[i]);
      CHECK(a.n3[i] == b.n3[i]);
    }
    CHECK(charge_2d(f).Q == charge_2d(g).Q);
  }

  TEST_CASE("degenerate node") {
    auto f = planar_from_radial(state(1), 64);
    f.u[5] = f.v1[5] = f.v2[5] = 0.0;
    try {
      build_nmap(f);
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::degenerate_point);
    }
  }
}

TEST_SUITE("charge") {
  TEST_CASE("constant map has no charge") {
    auto f = planar_from_radial(state(1), 64);
    for (auto* x : {&f.u, &f.v2}) x->v.assign(x->size(), 0.0);
    f.v1.v.assign(f.v1.size(), 1.0);
    // d = 0 keeps the constant map single-valued across the sector edge
    f.d = 0;
    CHECK(std::abs(charge_2d(f).Q) < 1e-14);
  }

  TEST_CASE("radial states carry half their degree") {
    for (int d : {1, 2}) {
      const auto q = charge_radial(state(d));
      CHECK(q.method == Method::radial_analytic);
      CHECK(q.d == d);
      CHECK(std::abs(q.Q - 0.5 * d) < 1e-3);
    }
  }

  TEST_CASE("2D quadrature matches the radial shortcut") {
    for (int d : {1, 2}) {
      const auto q2 = charge_2d(planar_from_radial(state(d), 256));
      CHECK(q2.method == Method::quadrature_2d);
      CHECK(std::abs(q2.Q - charge_radial(state(d)).Q) < 1e-4);
      // the estimate is conservative for the extrapolated value
      CHECK(std::abs(q2.Q - 0.5 * d) <= q2.quadrature_error);
    }
  }

  TEST_CASE("integrand identity at second order") {
    const double coarse = identity_error(0.05, 128), fine = identity_error(0.025, 256);
    CHECK(fine < coarse);
    CHECK(coarse / fine >= 3.5);
  }

  TEST_CASE("truncation deficit") {
    for (int d : {1, 2})
      for (double R : {3.0, 4.0, 5.0}) {
        const auto t = truncate(state(d), R);
        const double measured = 0.5 * d - charge_2d(planar_from_radial(t, 256)).Q;
        const auto rep = charge_radial(t);
        const auto& u = t.u.values;
        const auto& f = t.f.values;
        const double tail = 0.5 * d * u.back() / f.back();
        CHECK(rep.deficit == doctest::Approx(measured).epsilon(0.1));
        CHECK(rep.deficit == doctest::Approx(tail).epsilon(0.1));
      }
  }

  TEST_CASE("convergence in the ball radius") {
    const auto run = radial::continue_in_R(-0.5, 1, {20.0, 40.0, 80.0});
    const auto& big = run.states.back();
    double prev = 1e300;
    for (double R : {20.0, 40.0, 80.0}) {
      const double e = std::abs(charge_radial(truncate(big, R)).Q - 0.5);
      CHECK(e <= prev);
      if (prev > 1e-15) CHECK(e < prev);
      prev = e;
    }
  }

  TEST_CASE("planar state") {
    const auto rep = planar_state();
    const auto q = charge_2d(rep.field);
    CHECK(std::abs(q.Q - 0.5) < 5e-3);
    CHECK(q.d == 1);
    const auto n = build_nmap(rep.field);
    const auto& m = *rep.field.mesh;
    const std::size_t i = m.rings() - 1;
    for (int j = 0; j < m.m_theta(); ++j) {
      const std::size_t a = m.index(i, j);
      CHECK(std::abs(n.n1[a] - std::cos(m.theta(j))) < 1e-4);
      CHECK(std::abs(n.n3[a]) < 1e-4);
    }
  }

  TEST_CASE("truncation radius must be a node") {
    CHECK_THROWS_AS(truncate(state(1), 3.01), Error);
  }
}
