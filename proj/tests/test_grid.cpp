#include <cmath>
#include <numbers>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "doctest.h"
#include "svlab/errors.hpp"
#include "svlab/field.hpp"
#include "svlab/kernels.hpp"
#include "svlab/mesh.hpp"
#include "svlab/profiles.hpp"
#include "svlab/radial_ops.hpp"

using namespace svlab;
using grid::RadialMesh;
using grid::SectorMesh;

namespace {

constexpr double kPi = std::numbers::pi;

std::shared_ptr<const SectorMesh> sector(const RadialMesh& r, int M, int k) {
  return std::make_shared<const SectorMesh>(r, M, k);
}

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::config;
}

}  // namespace

TEST_SUITE("mesh") {
  TEST_CASE("graded mesh invariants") {
    const auto m = RadialMesh::graded({40.0, 0.05, 1.05, 4.0});
    CHECK(m.r(0) == 0.0);
    CHECK(m.size() >= 65);
    for (std::size_t i = 0; i + 1 < m.size(); ++i) CHECK(m.r(i + 1) > m.r(i));
    CHECK(m.r_max() == doctest::Approx(40.0));
    for (std::size_t i = 1; i < m.size(); ++i)
      if (m.r(i) <= 4.0) CHECK(m.h(i - 1) == doctest::Approx(0.05));
  }

  TEST_CASE("from_nodes rejects bad node sets") {
    CHECK(kind_of([] { RadialMesh::from_nodes({0.0, 1.0, 0.5}, false); }) == ErrorKind::invalid_mesh);
    CHECK(kind_of([] { RadialMesh::from_nodes({0.1, 1.0, 2.0}, false); }) == ErrorKind::invalid_mesh);
    CHECK(kind_of([] { RadialMesh::from_nodes({0.0, 1.0, 2.0}, true); }) == ErrorKind::invalid_mesh);
  }

  TEST_CASE("sector mesh angle and M constraints") {
    const auto r = RadialMesh::uniform(10.0, 0.1);
    for (int k : {2, 3, 4, 7}) {
      SectorMesh s(r, 64, k);
      CHECK(std::abs(s.sector_angle() * k - 2 * kPi) < 1e-14);
    }
    CHECK(kind_of([&] { SectorMesh(r, 30, 2); }) == ErrorKind::invalid_mesh);
    CHECK(kind_of([&] { SectorMesh(r, 28, 2); }) == ErrorKind::invalid_mesh);
    CHECK(kind_of([&] { SectorMesh(r, 64, 1); }) == ErrorKind::invalid_mesh);
  }

  TEST_CASE("mesh config round-trips bit-exactly") {
    grid::MeshConfig c{{37.25, 0.0125, 1.0371, 3.5, 0.07}, 3, 96};
    nlohmann::json j = c;
    const auto text = j.dump();
    grid::MeshConfig back = nlohmann::json::parse(text).get<grid::MeshConfig>();
    CHECK(back == c);
    CHECK(nlohmann::json(back).dump() == text);
    for (const char* key : {"r_max", "h_core", "ratio", "k", "m_theta"}) CHECK(j.contains(key));
  }

  TEST_CASE("truncated keeps a prefix ending at a node") {
    const auto m = RadialMesh::uniform(20.0, 0.05);
    const auto t = m.truncated(5.0);
    CHECK(t.r_max() == doctest::Approx(5.0));
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(t.r(i) == m.r(i));
    CHECK(kind_of([&] { m.truncated(5.01); }) == ErrorKind::invalid_mesh);
  }
}

TEST_SUITE("radial operators") {
  TEST_CASE("r^2 with d = 0 gives 4") {
    const auto m = RadialMesh::graded({10.0, 0.05, 1.05, 4.0});
    std::vector<double> f;
    for (double r : m.nodes()) f.push_back(r * r);
    const auto L = grid::radial_laplacian(m, f, 0);
    for (std::size_t i = 0; i + 1 < m.size(); ++i) CHECK(L[i] == doctest::Approx(4.0).epsilon(1e-3));
  }

  TEST_CASE("r is in the kernel of the d = 1 operator") {
    const auto m = RadialMesh::graded({10.0, 0.05, 1.05, 4.0});
    const auto L = grid::radial_laplacian(m, m.nodes(), 1);
    for (std::size_t i = 1; i + 1 < m.size(); ++i) CHECK(std::abs(L[i]) < 1e-3);
  }

  TEST_CASE("too few nodes") {
    const auto m = RadialMesh::from_nodes({0.0, 1.0}, false);
    CHECK(kind_of([&] { grid::radial_laplacian(m, {0.0, 1.0}, 0); }) == ErrorKind::invalid_mesh);
  }

  TEST_CASE("solved S_1 satisfies its own equation") {
    const auto S = profiles::solve_vortex(1);
    const auto L = grid::radial_laplacian(S.mesh, S.values, 1);
    double worst = 0.0;
    for (std::size_t i = 1; i + 1 < S.size(); ++i) worst = std::max(worst, std::abs(L[i] + S[i] - std::pow(S[i], 3)));
    CHECK(worst < 1e-8);
  }

  TEST_CASE("second-order truncation error") {
    // e^{-r²} has f'' + f'/r = (4r² − 4)e^{-r²}
    auto err = [](double h) {
      const auto m = RadialMesh::uniform(6.0, h);
      std::vector<double> f;
      for (double r : m.nodes()) f.push_back(std::exp(-r * r));
      const auto L = grid::radial_laplacian(m, f, 0);
      double e = 0.0;
      for (std::size_t i = 1; i + 1 < m.size(); ++i) {
        const double r = m.r(i);
        if (r < 0.5 || r > 3.0) continue;
        e = std::max(e, std::abs(L[i] - (4 * r * r - 4) * std::exp(-r * r)));
      }
      return e;
    };
    const double ratio = err(0.05) / err(0.025);
    CHECK(ratio >= 3.5);
    CHECK(ratio <= 4.5);
  }
}

TEST_SUITE("norms") {
  const grid::WeightedNorms w(0.25);
  const RadialMesh& rmesh() {
    static const RadialMesh r = RadialMesh::uniform(30.0, 0.05);
    return r;
  }

  TEST_CASE("norm_star trivial values") {
    const auto m = sector(rmesh(), 64, 2);
    grid::SectorField z(m), one(m, 1.0);
    CHECK(grid::norm_star(z, z, w) == 0.0);
    CHECK(grid::norm_star(one, z, w) == doctest::Approx(1.0).epsilon(1e-14));
  }

  TEST_CASE("norm_star of the critical decay profile") {
    // (1+r)^{1+α}(|ψ2| + |ψ2'|) = 1 + (1+α)/(1+r), discrete sup near the origin
    auto value = [&](double h) {
      auto mm = sector(RadialMesh::uniform(20.0, h), 64, 2);
      auto psi2 = grid::sample(mm, [](double rr, double) { return std::pow(1 + rr, -1.25); });
      return grid::norm_star(grid::SectorField(mm), psi2, w);
    };
    const double coarse = value(0.02), fine = value(0.005);
    CHECK(std::abs(fine - 2.25) < std::abs(coarse - 2.25));
    CHECK(fine == doctest::Approx(2.25).epsilon(2e-2));
  }

  TEST_CASE("norm_dstar weight cancels") {
    const auto m = sector(rmesh(), 64, 2);
    grid::SectorField z(m);
    CHECK(grid::norm_dstar(z, z, w) == 0.0);
    auto h1 = grid::sample(m, [](double rr, double) { return std::pow(1 + rr, -2.25); });
    CHECK(grid::norm_dstar(h1, z, w) == doctest::Approx(1.0).epsilon(1e-13));
  }

  TEST_CASE("mismatched meshes") {
    grid::SectorField a(sector(rmesh(), 64, 2)), b(sector(rmesh(), 32, 2));
    CHECK(kind_of([&] { grid::norm_star(a, b, w); }) == ErrorKind::mesh_mismatch);
    CHECK(kind_of([&] { grid::norm_dstar(a, b, w); }) == ErrorKind::mesh_mismatch);
  }

  TEST_CASE("homogeneity and triangle inequality on random pairs") {
    auto mm = sector(RadialMesh::uniform(10.0, 0.1), 32, 3);
    std::mt19937 gen(7);
    std::normal_distribution<double> nd;
    auto random_field = [&] {
      grid::SectorField f(mm);
      for (auto& x : f.v) x = nd(gen);
      return f;
    };
    for (int t = 0; t < 10; ++t) {
      auto a1 = random_field(), a2 = random_field(), b1 = random_field(), b2 = random_field();
      const double lam = -2.5;
      grid::SectorField s1(mm), s2(mm), l1(mm), l2(mm);
      for (std::size_t n = 0; n < mm->size(); ++n) {
        s1[n] = a1[n] + b1[n];
        s2[n] = a2[n] + b2[n];
        l1[n] = lam * a1[n];
        l2[n] = lam * a2[n];
      }
      for (auto norm : {+[](const grid::SectorField& x, const grid::SectorField& y, const grid::WeightedNorms& ww) {
                          return grid::norm_star(x, y, ww);
                        },
                        +[](const grid::SectorField& x, const grid::SectorField& y, const grid::WeightedNorms& ww) {
                          return grid::norm_dstar(x, y, ww);
                        }}) {
        CHECK(norm(l1, l2, w) == doctest::Approx(2.5 * norm(a1, a2, w)).epsilon(1e-13));
        CHECK(norm(s1, s2, w) <= norm(a1, a2, w) + norm(b1, b2, w) + 1e-12);
      }
    }
  }
}

TEST_SUITE("quadrature") {
  TEST_CASE("area of a disk") {
    const double R = 7.0;
    auto m = sector(RadialMesh::uniform(R, 0.05), 64, 2);
    CHECK(grid::quad_disk(grid::SectorField(m, 1.0)) == doctest::Approx(kPi * R * R).epsilon(1e-6));
  }

  TEST_CASE("exponential integrates to pi/2") {
    auto m = sector(RadialMesh::graded({40.0, 0.01, 1.02, 4.0}), 32, 4);
    auto f = grid::sample(m, [](double r, double) { return std::exp(-2 * r); });
    CHECK(grid::quad_disk(f) == doctest::Approx(kPi / 2).epsilon(1e-6));
  }

  TEST_CASE("w^2 against a one-dimensional adaptive oracle") {
    const auto w = profiles::solve_spike();
    auto m = sector(w.mesh, 32, 2);
    grid::SectorField f(m);
    for (std::size_t n = 0; n < m->size(); ++n) {
      const std::size_t i = n == 0 ? 0 : 1 + (n - 1) / 32;
      f[n] = w[i] * w[i];
    }
    const auto sp = w.spline();
    const double oracle = 2 * kPi *
                          boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
                              [&](double r) { return sp(r) * sp(r) * r; }, 0.0, w.mesh.r_max(), 15, 1e-14);
    CHECK(grid::quad_disk(f) == doctest::Approx(oracle).epsilon(1e-8));
    // θ-independent integrands reduce to the radial rule
    const auto wr = grid::weights_rdr(w.mesh);
    double oned = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) oned += wr[i] * w[i] * w[i];
    CHECK(std::abs(grid::quad_disk(f) - 2 * kPi * oned) < 1e-12);
  }

  TEST_CASE("non-finite samples") {
    auto m = sector(RadialMesh::uniform(5.0, 0.05), 32, 2);
    grid::SectorField f(m, 1.0);
    f[17] = std::nan("");
    CHECK(kind_of([&] { grid::quad_disk(f); }) == ErrorKind::nan_input);
  }
}

TEST_SUITE("kernels") {
  TEST_CASE("scalar and AVX2 kernels agree") {
    if (!kernels::cpu_has_avx2()) return;
    std::mt19937 gen(11);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 17u, 64u, 1001u}) {
      std::vector<double> a(n), b(n), c(n), w(n), o1(n), o2(n);
      for (std::size_t i = 0; i < n; ++i) a[i] = u(gen), b[i] = u(gen), c[i] = u(gen), w[i] = std::abs(u(gen));
      const double tol = 1e-13 * (1.0 + n);
      CHECK(std::abs(kernels::scalar::dot(a.data(), b.data(), n) - kernels::avx2::dot(a.data(), b.data(), n)) < tol);
      CHECK(std::abs(kernels::scalar::dot3(w.data(), a.data(), b.data(), n) -
                     kernels::avx2::dot3(w.data(), a.data(), b.data(), n)) < tol);
      CHECK(kernels::scalar::weighted_sup(w.data(), a.data(), b.data(), n) ==
            kernels::avx2::weighted_sup(w.data(), a.data(), b.data(), n));
      CHECK(kernels::scalar::weighted_sup(w.data(), a.data(), nullptr, n) ==
            kernels::avx2::weighted_sup(w.data(), a.data(), nullptr, n));
      kernels::scalar::cubic_response(a.data(), b.data(), c.data(), 0.3, o1.data(), n);
      kernels::avx2::cubic_response(a.data(), b.data(), c.data(), 0.3, o2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(o1[i] - o2[i]) < 1e-14);
      kernels::scalar::tridiag_apply(a.data(), b.data(), c.data(), w.data(), o1.data(), n);
      kernels::avx2::tridiag_apply(a.data(), b.data(), c.data(), w.data(), o2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(o1[i] - o2[i]) < 1e-14);
    }
  }

  TEST_CASE("dispatch can be forced") {
    const auto was = kernels::active_isa();
    kernels::force_isa(kernels::Isa::scalar);
    CHECK(kernels::active_isa() == kernels::Isa::scalar);
    const double a[3] = {1, 2, 3};
    CHECK(kernels::dot(a, a, 3) == 14.0);
    kernels::force_isa(was);
  }

  TEST_CASE("solver output is identical under both ISAs") {
    if (!kernels::cpu_has_avx2()) return;
    const auto was = kernels::active_isa();
    kernels::force_isa(kernels::Isa::scalar);
    const auto s1 = profiles::solve_vortex(2);
    kernels::force_isa(kernels::Isa::avx2);
    const auto s2 = profiles::solve_vortex(2);
    kernels::force_isa(was);
    double d = 0.0;
    for (std::size_t i = 0; i < s1.size(); ++i) d = std::max(d, std::abs(s1[i] - s2[i]));
    CHECK(d < 1e-12);
  }
}
