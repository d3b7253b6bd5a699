#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"

namespace svlab::grid {

/// Grading of a radial mesh: uniform h_core on [0, core_end], then geometric
/// growth by `ratio` per cell, capped at h_max.
struct MeshSpec {
  double r_max = 40.0;
  double h_core = 0.05;
  double ratio = 1.05;
  double core_end = 4.0;
  double h_max = std::numeric_limits<double>::infinity();

  /// h -> h/2, ratio -> sqrt(ratio), h_max -> h_max/2.
  MeshSpec refined() const;
  bool operator==(const MeshSpec&) const = default;
};

class RadialMesh {
 public:
  RadialMesh() = default;
  static RadialMesh graded(const MeshSpec& spec);
  static RadialMesh uniform(double r_max, double h);
  /// Arbitrary nodes; r0 = 0 and strict increase are always checked, N ≥ 64 only if strict.
  static RadialMesh from_nodes(std::vector<double> nodes, bool strict = true);

  std::size_t size() const { return r_.size(); }
  std::size_t intervals() const { return r_.empty() ? 0 : r_.size() - 1; }
  double r(std::size_t i) const { return r_[i]; }
  const std::vector<double>& nodes() const { return r_; }
  double r_max() const { return r_.back(); }
  const MeshSpec& spec() const { return spec_; }
  const std::string& stretching() const { return stretching_; }
  /// Cell length r_{i+1} − r_i.
  double h(std::size_t i) const { return r_[i + 1] - r_[i]; }
  /// Cell midpoint (r_i + r_{i+1})/2.
  double mid(std::size_t i) const { return 0.5 * (r_[i] + r_[i + 1]); }
  /// Dual-cell weights ∫ r dr over [m_{i−½}, m_{i+½}] clipped to [0, r_max].
  const std::vector<double>& dual_weights() const { return dual_; }
  /// Index of the node equal to r (relative tolerance 1e-12), or npos.
  std::size_t find(double r) const;
  /// Index of the last node with r_i ≤ r.
  std::size_t locate(double r) const;
  /// Prefix mesh ending at the node r = R (which must exist).
  RadialMesh truncated(double R) const;
  bool same_as(const RadialMesh& o) const { return r_ == o.r_; }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  void finish(bool strict);
  std::vector<double> r_;
  std::vector<double> dual_;
  MeshSpec spec_{};
  std::string stretching_ = "nodes";
};

/// Polar sector covering θ ∈ [0, 2π/k) with M equispaced angles.
/// Node layout: index 0 is the origin, then ring i ≥ 1, angle j at 1 + (i−1)M + j.
class SectorMesh {
 public:
  SectorMesh() = default;
  SectorMesh(RadialMesh radial, int m_theta, int k);

  const RadialMesh& radial() const { return radial_; }
  int m_theta() const { return m_; }
  int k() const { return k_; }
  double dtheta() const { return dtheta_; }
  double sector_angle() const { return dtheta_ * m_; }
  double theta(int j) const { return j * dtheta_; }
  std::size_t rings() const { return radial_.size(); }
  std::size_t size() const { return 1 + (radial_.size() - 1) * static_cast<std::size_t>(m_); }
  std::size_t index(std::size_t i, int j) const {
    return i == 0 ? 0 : 1 + (i - 1) * static_cast<std::size_t>(m_) + static_cast<std::size_t>(j);
  }
  /// Radius of a flat node index.
  double r_of(std::size_t n) const { return n == 0 ? 0.0 : radial_.r(1 + (n - 1) / m_); }
  double theta_of(std::size_t n) const { return n == 0 ? 0.0 : theta(static_cast<int>((n - 1) % m_)); }
  bool same_as(const SectorMesh& o) const {
    return m_ == o.m_ && k_ == o.k_ && radial_.same_as(o.radial_);
  }
  /// Node weights for ∫_{disk} f, already multiplied by k (full-disk integral).
  const std::vector<double>& quad_weights() const { return qw_; }
  /// Node radii, flat layout.
  const std::vector<double>& node_r() const { return nr_; }

 private:
  RadialMesh radial_;
  std::vector<double> qw_;
  std::vector<double> nr_;
  int m_ = 0;
  int k_ = 0;
  double dtheta_ = 0.0;
};

/// Serializable block {"r_max","h_core","ratio","k","m_theta"} plus optional
/// "core_end" and "h_max".
struct MeshConfig {
  MeshSpec radial;
  int k = 2;
  int m_theta = 64;
  bool operator==(const MeshConfig&) const = default;
};

void to_json(nlohmann::json& j, const MeshConfig& c);
void from_json(const nlohmann::json& j, MeshConfig& c);
void to_json(nlohmann::json& j, const MeshSpec& s);
void from_json(const nlohmann::json& j, MeshSpec& s);

}  // namespace svlab::grid
