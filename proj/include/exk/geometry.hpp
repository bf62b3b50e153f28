#pragma once

#include <string>
#include <vector>

#include "exk/types.hpp"

namespace exk {

/// Compact rectangle prod_i [lower_i, upper_i] with lower_i < upper_i.
class RectDomain {
 public:
  RectDomain(Vector lower, Vector upper);

  Index dim() const { return lower_.size(); }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  double width(Index axis) const { return upper_(axis) - lower_(axis); }
  bool contains(const Vector& t, double tol = 0.0) const;
  bool contains_origin() const { return contains(Vector::Zero(dim())); }

 private:
  Vector lower_;
  Vector upper_;
};

/// Open face of a rectangle. Coordinates in `sigma` are free; every other
/// coordinate j sits at lower_j (bit 0) or upper_j (bit 1). Indices are 0-based
/// here and 1-based in the textual serialization.
struct Face {
  int ambient_dim = 0;
  std::vector<int> sigma;
  std::vector<int> fixed;
  std::vector<int> epsilon;  // parallel to `fixed`

  int dim() const { return static_cast<int>(sigma.size()); }
  bool is_vertex() const { return sigma.empty(); }
  bool is_interior() const { return fixed.empty(); }

  /// Bit of fixed coordinate j, or -1 when j is free.
  int epsilon_of(int j) const;

  /// "k|{sigma}|{j:bit,...}" with 1-based indices, e.g. "1|{1}|{2:1}".
  std::string to_string() const;

  friend bool operator==(const Face&, const Face&) = default;
};

/// Sign constraints y_j * sign_j >= 0 describing the outward cone of a face.
struct OutwardCone {
  struct Constraint {
    int index;
    int sign;  // 2*epsilon - 1
    friend bool operator==(const Constraint&, const Constraint&) = default;
  };
  std::vector<Constraint> constraints;

  std::size_t size() const { return constraints.size(); }
  bool contains(const Vector& y) const;
};

/// All 3^N faces ordered by dimension descending, then sigma, then epsilon.
std::vector<Face> enumerate_faces(const RectDomain& domain);

/// Faces of one dimension, in the same relative order as enumerate_faces.
std::vector<Face> faces_of_dim(const RectDomain& domain, int k);

/// Maps free coordinates of an open face to a point of R^N.
Vector embed_point(const RectDomain& domain, const Face& face, const Vector& free_coords);

/// Same as embed_point without the open-interval check.
Vector embed_point_unchecked(const RectDomain& domain, const Face& face, const Vector& free_coords);

/// Free coordinates of a point of R^N with respect to `face`.
Vector restrict_point(const Face& face, const Vector& t);

OutwardCone outward_cone(const Face& face);

/// Which open face contains t: coordinates within `tol * width` of an endpoint
/// are treated as fixed at it.
Face classify_point(const RectDomain& domain, const Vector& t, double tol = 0.0);

/// True when the closure of `outer` contains the closure of `inner`.
bool face_closure_contains(const Face& outer, const Face& inner);

}  // namespace exk
