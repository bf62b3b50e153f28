#include "exk/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "exk/errors.hpp"

namespace exk {

RectDomain::RectDomain(Vector lower, Vector upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.size() != upper_.size()) {
    throw ConfigError("domain: lower has " + std::to_string(lower_.size()) + " entries but upper has " +
                      std::to_string(upper_.size()));
  }
  if (lower_.size() < 1) throw ConfigError("domain: dimension must be at least 1");
  for (Index i = 0; i < lower_.size(); ++i) {
    if (!std::isfinite(lower_(i)) || !std::isfinite(upper_(i)) || !(lower_(i) < upper_(i))) {
      std::ostringstream msg;
      msg << "domain: axis " << (i + 1) << " requires lower < upper (got " << lower_(i) << " >= " << upper_(i)
          << ")";
      throw ConfigError(msg.str());
    }
  }
}

bool RectDomain::contains(const Vector& t, double tol) const {
  if (t.size() != dim()) return false;
  for (Index i = 0; i < dim(); ++i) {
    if (t(i) < lower_(i) - tol || t(i) > upper_(i) + tol) return false;
  }
  return true;
}

int Face::epsilon_of(int j) const {
  for (std::size_t m = 0; m < fixed.size(); ++m) {
    if (fixed[m] == j) return epsilon[m];
  }
  return -1;
}

std::string Face::to_string() const {
  std::ostringstream out;
  out << dim() << "|{";
  for (std::size_t m = 0; m < sigma.size(); ++m) out << (m ? "," : "") << sigma[m] + 1;
  out << "}|{";
  for (std::size_t m = 0; m < fixed.size(); ++m) out << (m ? "," : "") << fixed[m] + 1 << ":" << epsilon[m];
  out << "}";
  return out.str();
}

bool OutwardCone::contains(const Vector& y) const {
  for (std::size_t m = 0; m < constraints.size(); ++m) {
    if (y(static_cast<Index>(m)) * constraints[m].sign < 0) return false;
  }
  return true;
}

std::vector<Face> faces_of_dim(const RectDomain& domain, int k) {
  const int n = static_cast<int>(domain.dim());
  std::vector<Face> faces;
  if (k < 0 || k > n) return faces;
  // subsets of size k in lexicographic order
  std::vector<int> pick(n, 0);
  std::fill(pick.begin(), pick.begin() + k, 1);
  do {
    Face base;
    base.ambient_dim = n;
    for (int j = 0; j < n; ++j) (pick[j] ? base.sigma : base.fixed).push_back(j);
    const int m = n - k;
    for (unsigned bits = 0; bits < (1u << m); ++bits) {
      Face face = base;
      face.epsilon.resize(m);
      // first fixed coordinate is the most significant bit -> lexicographic order
      for (int q = 0; q < m; ++q) face.epsilon[q] = static_cast<int>((bits >> (m - 1 - q)) & 1u);
      faces.push_back(std::move(face));
    }
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return faces;
}

std::vector<Face> enumerate_faces(const RectDomain& domain) {
  std::vector<Face> faces;
  for (int k = static_cast<int>(domain.dim()); k >= 0; --k) {
    auto layer = faces_of_dim(domain, k);
    faces.insert(faces.end(), std::make_move_iterator(layer.begin()), std::make_move_iterator(layer.end()));
  }
  return faces;
}

Vector embed_point_unchecked(const RectDomain& domain, const Face& face, const Vector& free_coords) {
  Vector t(domain.dim());
  for (std::size_t m = 0; m < face.sigma.size(); ++m) t(face.sigma[m]) = free_coords(static_cast<Index>(m));
  for (std::size_t m = 0; m < face.fixed.size(); ++m) {
    const int j = face.fixed[m];
    t(j) = face.epsilon[m] ? domain.upper()(j) : domain.lower()(j);
  }
  return t;
}

Vector embed_point(const RectDomain& domain, const Face& face, const Vector& free_coords) {
  if (free_coords.size() != face.dim()) {
    throw DomainError("embed_point: expected " + std::to_string(face.dim()) + " free coordinates, got " +
                      std::to_string(free_coords.size()));
  }
  for (std::size_t m = 0; m < face.sigma.size(); ++m) {
    const int j = face.sigma[m];
    const double x = free_coords(static_cast<Index>(m));
    if (!(x > domain.lower()(j) && x < domain.upper()(j))) {
      std::ostringstream msg;
      msg << "embed_point: coordinate " << (j + 1) << " = " << x << " outside open interval (" << domain.lower()(j)
          << ", " << domain.upper()(j) << ") of face " << face.to_string();
      throw DomainError(msg.str());
    }
  }
  return embed_point_unchecked(domain, face, free_coords);
}

Vector restrict_point(const Face& face, const Vector& t) {
  Vector free(face.dim());
  for (std::size_t m = 0; m < face.sigma.size(); ++m) free(static_cast<Index>(m)) = t(face.sigma[m]);
  return free;
}

OutwardCone outward_cone(const Face& face) {
  OutwardCone cone;
  for (std::size_t m = 0; m < face.fixed.size(); ++m) cone.constraints.push_back({face.fixed[m], 2 * face.epsilon[m] - 1});
  return cone;
}

Face classify_point(const RectDomain& domain, const Vector& t, double tol) {
  Face face;
  face.ambient_dim = static_cast<int>(domain.dim());
  for (int j = 0; j < face.ambient_dim; ++j) {
    const double slack = tol * domain.width(j);
    if (std::abs(t(j) - domain.lower()(j)) <= slack) {
      face.fixed.push_back(j);
      face.epsilon.push_back(0);
    } else if (std::abs(t(j) - domain.upper()(j)) <= slack) {
      face.fixed.push_back(j);
      face.epsilon.push_back(1);
    } else {
      face.sigma.push_back(j);
    }
  }
  return face;
}

bool face_closure_contains(const Face& outer, const Face& inner) {
  if (outer.ambient_dim != inner.ambient_dim) return false;
  for (std::size_t m = 0; m < outer.fixed.size(); ++m) {
    if (inner.epsilon_of(outer.fixed[m]) != outer.epsilon[m]) return false;
  }
  return true;
}

}  // namespace exk
