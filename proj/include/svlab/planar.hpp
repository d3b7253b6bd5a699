#pragma once

#include <complex>
#include <memory>
#include <string>
#include <vector>

#include "svlab/field.hpp"
#include "svlab/linalg.hpp"
#include "svlab/mesh.hpp"

namespace svlab::planar {

using cplx = std::complex<double>;

/// Sampled ansatz data shared by every field built on top of it. The Laplacian
/// of the ansatz is never differenced: Δw_j = w_j − w_j³ and
/// Δ(S_d e^{idθ}) = (S_d³ − S_d)e^{idθ} hold exactly.
struct Base {
  std::shared_ptr<const grid::SectorMesh> mesh;
  std::vector<cplx> centers;  ///< spike centres (all k copies)
  int d = 0;                  ///< vortex degree, 0 for no vortex (v_d ≡ 0)
  std::vector<double> U;      ///< Σ_j w(z − ξ_j)
  std::vector<double> cube;   ///< (Σw_j)³ − Σw_j³
  std::vector<double> S;      ///< S_d(r), or 0 without vortex
  std::vector<double> vd1, vd2;
  std::vector<double> du_dl;  ///< ∂U/∂l, zero unless centres sit on a polygon of radius l
};

/// Fields (u, v1, v2) on one sector. With a base attached, u − U and v − v_d are
/// the discretized corrections.
struct PlanarField {
  std::shared_ptr<const grid::SectorMesh> mesh;
  int k = 2;
  int d = 1;
  grid::SectorField u, v1, v2;
  std::shared_ptr<const Base> base;

  /// e^{iΦ}, Φ = 2πd/k: the phase picked up by v across one sector.
  cplx rotation_phase() const;
};

struct SymmetryDefect {
  double reflection_u = 0.0;
  double reflection_v = 0.0;
  double bound_v = 0.0;  ///< max |v|
};

/// Reflection defects u(θ) − u(−θ), v(θ) − conj v(−θ) through the sector identification.
SymmetryDefect symmetry_defect(const PlanarField& f);

struct AnsatzOptions {
  double h = 0.1;        ///< radial spacing
  double arc = 0.1;      ///< angular spacing measured at r = l
  double pad = 20.0;     ///< R_max = l + pad
  int m_theta = 0;       ///< nodes per sector; 0 picks from arc (rounded up to a multiple of 4)
};

struct PolygonAnsatz {
  double l = 0.0;
  int k = 2;
  int d = 1;
  std::vector<cplx> centers;
  PlanarField field;
  /// false when d ≥ 2 and 2(d−1) ≡ 0 mod k
  bool degree_ok = true;

  /// Continuum ansatz at a point of the plane.
  double u_at(double x, double y) const;
  cplx v_at(double x, double y) const;
};

bool degree_condition(int d, int k);

/// Build on a fresh sector mesh (R_max = l + pad).
PolygonAnsatz build_ansatz(double l, int k, int d, const AnsatzOptions& opt = {});
/// Build on a given mesh.
PolygonAnsatz build_ansatz_on(double l, int d, std::shared_ptr<const grid::SectorMesh> mesh);

/// Base made of arbitrary spike centres and an optional vortex (d = 0 disables it).
std::shared_ptr<const Base> make_base(std::shared_ptr<const grid::SectorMesh> mesh,
                                      std::vector<cplx> centers, int d, double l = 0.0);
/// Field equal to its base.
PlanarField field_from_base(std::shared_ptr<const Base> base, int d_symmetry);

/// Spike profile w and its derivative, zero beyond the solved range.
double spike(double rho);
double spike_deriv(double rho);
/// Vortex profile S_d, continued by 1 − d²/(2r²) past the solved range.
double vortex(int d, double r);

/// Δu − u + u³ + βu|v|² per node.
grid::SectorField apply_S1(const PlanarField& f, double beta);

struct ComplexField {
  grid::SectorField re, im;
};

/// ψ-form residual −iF₂/v of Δv + v − |v|²v + βu²v. Nodes with r < r_core carry
/// the direct residual F₂ instead.
ComplexField apply_S2(const PlanarField& f, double beta, double r_core = 0.5);

/// ψ with v = v_d e^{iψ}: ψ1 = arg(v/v_d), ψ2 = −log(|v|/S_d). Nodes with r < r_min
/// are set to 0; r_min < 0.5 is a core-exclusion error.
ComplexField extract_psi(const PlanarField& f, double r_min = 0.5);

/// Phase increments of v around the ring nearest to r, summed over all k sectors, over 2π.
double winding_number(const PlanarField& f, double r);
/// Mesh cells away from the origin around which v winds (zeros of v).
int off_center_zeros(const PlanarField& f);

struct NewtonOptions {
  double tol = 1e-9;
  int max_iter = 30;
  double alpha = 0.25;  ///< weight exponent of the ψ norm
};

struct NewtonReport {
  PlanarField field;
  std::vector<double> residual_history;  ///< max-norm, one entry per iterate
  int iterations = 0;
  double max_du = 0.0;     ///< max|u − u_l|
  double psi_star = 0.0;   ///< ‖ψ‖_* over r ≥ 0.5
  double winding = 0.0;    ///< at r = 2
  int zeros_off_center = 0;
  std::string linear_solver;
};

/// Damped Newton in the reflection-reduced sector unknowns. Throws diverged
/// (message carries the residual history) after max_iter steps.
NewtonReport newton_planar(const PolygonAnsatz& init, double beta, const NewtonOptions& opt = {});

/// e^{−2l sin(π/k)} + βl^{2+α}
double correction_scale(double l, int k, double beta, double alpha = 0.25);

struct ResidualReport {
  double s1_l2 = 0.0;
  double s2_dstar = 0.0;
  double l = 0.0, beta = 0.0, alpha = 0.25;
  int k = 2;
};

ResidualReport residual_report(const PolygonAnsatz& a, double beta, double alpha = 0.25);

struct NondegOptions {
  double r_max = 40.0;
  double h = 0.05;
  int m_max = 24;
};

struct NondegResult {
  double sigma_min = 0.0;
  bool resonant = false;
  int m_at_min = 0;
  bool coupled_at_min = false;
};

/// Smallest |eigenvalue| of the symmetric-class linearization at S_d e^{idθ},
/// block by block in the angular index m.
NondegResult check_nondegeneracy(int d, int k, const NondegOptions& opt = {});
bool predicted_resonant(int d, int k);

/// CSV rows r, θ, u, v1, v2 after a JSON header line.
std::string to_csv(const PlanarField& f, double l, double beta);

namespace detail {

/// Reflection-reduced unknown map. Full layout is [φ | χ1 | χ2] over all sector
/// nodes; fixed nodes (outer ring, χ at the origin) have empty columns.
struct Reduction {
  SpMat P;            ///< full × reduced
  std::size_t n_u;    ///< reduced unknowns belonging to φ (listed first)
};
Reduction reduction(const grid::SectorMesh& m, cplx phase);

/// Residuals of the full system at (U + φ, v_d + χ); outer ring rows are the Dirichlet rows.
void residual(const Base& b, cplx phase, double beta, const std::vector<double>& phi,
              const std::vector<double>& c1, const std::vector<double>& c2,
              std::vector<double>& F1, std::vector<double>& F2r, std::vector<double>& F2i);
SpMat jacobian(const Base& b, cplx phase, double beta, const std::vector<double>& phi,
               const std::vector<double>& c1, const std::vector<double>& c2);

/// Linearization of the first equation at (U, v_d) in φ alone: Δ − 1 + 3U² + βS².
SpMat linear_u(const Base& b, double beta);

/// BiCGSTAB + ILUT, SparseLU fallback; sets *which to the solver that succeeded.
Eigen::VectorXd solve(const SpMat& A, const Eigen::VectorXd& rhs, std::string* which = nullptr);

}  // namespace detail

}  // namespace svlab::planar
