#include "svlab/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "svlab/errors.hpp"
#include "svlab/radial_ops.hpp"

namespace svlab::grid {

MeshSpec MeshSpec::refined() const {
  MeshSpec s = *this;
  s.h_core *= 0.5;
  s.ratio = std::sqrt(ratio);
  if (std::isfinite(h_max)) s.h_max *= 0.5;
  return s;
}

RadialMesh RadialMesh::graded(const MeshSpec& spec) {
  if (!(spec.r_max > 0.0) || !(spec.h_core > 0.0) || !(spec.ratio >= 1.0) ||
      !(spec.h_max >= spec.h_core * (1.0 - 1e-12)))
    throw Error(ErrorKind::invalid_mesh, "graded mesh needs r_max > 0, h_core > 0, ratio >= 1");
  std::vector<double> r{0.0};
  const double core = std::min(spec.core_end, spec.r_max);
  const auto nc = static_cast<std::size_t>(std::ceil(core / spec.h_core - 1e-9));
  const double hc = core / static_cast<double>(nc);
  for (std::size_t i = 1; i <= nc; ++i) r.push_back(i == nc ? core : hc * static_cast<double>(i));
  double h = hc;
  while (r.back() < spec.r_max) {
    h = std::min(h * spec.ratio, spec.h_max);
    const double next = r.back() + h;
    if (next >= spec.r_max - 0.5 * h) {
      // snap; a sliver last cell gets merged into its neighbour
      if (spec.r_max - r.back() < 0.5 * h && r.size() > 2) r.back() = spec.r_max;
      else r.push_back(spec.r_max);
      break;
    }
    r.push_back(next);
  }
  RadialMesh m;
  m.r_ = std::move(r);
  m.spec_ = spec;
  m.stretching_ = spec.ratio == 1.0 ? "uniform" : "graded";
  m.finish(true);
  return m;
}

RadialMesh RadialMesh::uniform(double r_max, double h) {
  MeshSpec s;
  s.r_max = r_max;
  s.h_core = h;
  s.ratio = 1.0;
  s.core_end = r_max;
  return graded(s);
}

RadialMesh RadialMesh::from_nodes(std::vector<double> nodes, bool strict) {
  RadialMesh m;
  m.r_ = std::move(nodes);
  m.spec_.r_max = m.r_.empty() ? 0.0 : m.r_.back();
  m.finish(strict);
  return m;
}

void RadialMesh::finish(bool strict) {
  if (r_.empty() || r_.front() != 0.0) throw Error(ErrorKind::invalid_mesh, "first node must be r = 0");
  for (std::size_t i = 1; i < r_.size(); ++i)
    if (!(r_[i] > r_[i - 1])) throw Error(ErrorKind::invalid_mesh, "nodes must increase strictly");
  if (strict && intervals() < 64) throw Error(ErrorKind::invalid_mesh, "need at least 64 cells");
  dual_.assign(r_.size(), 0.0);
  for (std::size_t i = 0; i < r_.size(); ++i) {
    const double lo = i == 0 ? 0.0 : mid(i - 1);
    const double hi = i + 1 == r_.size() ? r_.back() : mid(i);
    dual_[i] = 0.5 * (hi * hi - lo * lo);
  }
}

std::size_t RadialMesh::find(double r) const {
  auto it = std::lower_bound(r_.begin(), r_.end(), r * (1.0 - 1e-12) - 1e-300);
  if (it != r_.end() && std::abs(*it - r) <= 1e-12 * std::max(1.0, std::abs(r)))
    return static_cast<std::size_t>(it - r_.begin());
  return npos;
}

std::size_t RadialMesh::locate(double r) const {
  if (r <= r_.front()) return 0;
  if (r >= r_.back()) return r_.size() - 1;
  auto it = std::upper_bound(r_.begin(), r_.end(), r);
  return static_cast<std::size_t>(it - r_.begin()) - 1;
}

RadialMesh RadialMesh::truncated(double R) const {
  const std::size_t n = find(R);
  if (n == npos) throw Error(ErrorKind::invalid_mesh, "truncation radius is not a mesh node");
  RadialMesh m;
  m.r_.assign(r_.begin(), r_.begin() + static_cast<std::ptrdiff_t>(n) + 1);
  m.spec_ = spec_;
  m.spec_.r_max = m.r_.back();
  m.stretching_ = stretching_;
  m.finish(false);
  return m;
}

SectorMesh::SectorMesh(RadialMesh radial, int m_theta, int k)
    : radial_(std::move(radial)), m_(m_theta), k_(k) {
  if (k < 2) throw Error(ErrorKind::invalid_mesh, "symmetry order k must be >= 2");
  if (m_theta < 32 || m_theta % 4 != 0)
    throw Error(ErrorKind::invalid_mesh, "m_theta must be >= 32 and divisible by 4");
  if (radial_.size() < 3) throw Error(ErrorKind::invalid_mesh, "radial mesh too small");
  dtheta_ = 2.0 * std::numbers::pi / (static_cast<double>(k) * m_theta);
  const auto w = weights_rdr(radial_);
  qw_.assign(size(), 0.0);
  nr_.assign(size(), 0.0);
  qw_[0] = k * sector_angle() * w[0];
  for (std::size_t i = 1; i < radial_.size(); ++i)
    for (int j = 0; j < m_; ++j) {
      qw_[index(i, j)] = k * dtheta_ * w[i];
      nr_[index(i, j)] = radial_.r(i);
    }
}

void to_json(nlohmann::json& j, const MeshSpec& s) {
  j = nlohmann::json{{"r_max", s.r_max}, {"h_core", s.h_core}, {"ratio", s.ratio},
                     {"core_end", s.core_end}};
  if (std::isfinite(s.h_max)) j["h_max"] = s.h_max;
}

void from_json(const nlohmann::json& j, MeshSpec& s) {
  s = MeshSpec{};
  s.r_max = j.value("r_max", s.r_max);
  s.h_core = j.value("h_core", s.h_core);
  s.ratio = j.value("ratio", s.ratio);
  s.core_end = j.value("core_end", s.core_end);
  if (j.contains("h_max") && !j["h_max"].is_null()) s.h_max = j["h_max"].get<double>();
}

void to_json(nlohmann::json& j, const MeshConfig& c) {
  to_json(j, c.radial);
  j["k"] = c.k;
  j["m_theta"] = c.m_theta;
}

void from_json(const nlohmann::json& j, MeshConfig& c) {
  from_json(j, c.radial);
  c.k = j.value("k", 2);
  c.m_theta = j.value("m_theta", 64);
}

}  // namespace svlab::grid
