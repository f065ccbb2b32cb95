#pragma once

#include "nlrec/manifold.hpp"

#include <iosfwd>
#include <optional>
#include <random>
#include <vector>

namespace nlrec {

/// Union of k subspaces (optionally affine) of R^n with pts_per points each.
struct UosSpec {
  Eigen::Index n = 10;
  int k = 2;
  std::vector<int> dims{2, 2};
  int pts_per = 20;
  bool affine = false;

  void validate() const;
};

struct UosData {
  Matrix m;
  std::vector<int> labels;
  std::vector<Matrix> bases;    // n × dim, orthonormal
  std::vector<Vector> offsets;  // zero for linear subspaces
};

UosData gen_uos(const UosSpec& spec, std::mt19937_64& rng);

struct ClusterSpec {
  Eigen::Index n = 5;
  int k = 3;
  int pts_per = 20;
  double sigma_c = 0.5;
  double center_sigma = 2.0;

  void validate() const;
};

struct ClusterData {
  Matrix m;
  std::vector<int> labels;
  Matrix centers;
};

ClusterData gen_clusters(const ClusterSpec& spec, std::mt19937_64& rng);

/// m = round(δ·n·s) entries of `target`, uniformly without replacement.
MeasurementSubspace gen_entry_mask(const Matrix& target, double delta, std::mt19937_64& rng);

struct SensingData {
  MeasurementSubspace meas;  // b = A·vec(M) + ξ
  Vector clean;              // A·vec(M)
  bool overdetermined = false;
};

/// A_ij ~ N(0, 1/m); ξ_i ~ N(0, σ²) when noise_sigma is set.
SensingData gen_gaussian_sensing(const Matrix& target, Eigen::Index m, std::mt19937_64& rng,
                                 std::optional<double> noise_sigma = std::nullopt);

double rmse(const Matrix& x, const Matrix& m);
double rand_index(const std::vector<int>& a, const std::vector<int>& b);

/// k-means on the columns, best of `restarts` k-means++ initializations.
std::vector<int> cluster_assign(const Matrix& x, int k, std::mt19937_64& rng, int restarts = 10);

/// Number of singular values >= rel_tol·σ1.
Eigen::Index numerical_rank(const Matrix& y, double rel_tol = 1e-8);

void write_matrix_csv(std::ostream& os, const Matrix& m);
Matrix read_matrix_csv(std::istream& is);
void write_labels(std::ostream& os, const std::vector<int>& labels);
std::vector<int> read_labels(std::istream& is);

}  // namespace nlrec
