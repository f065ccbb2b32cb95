#include "nlrec/synth.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

namespace nlrec {

namespace {

Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, double sd, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, sd);
  Matrix out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = normal(rng);
  }
  return out;
}

}  // namespace

void UosSpec::validate() const {
  if (n < 1 || k < 1 || pts_per < 1) throw ParameterError("UosSpec: n, k, pts_per must be >= 1");
  if (static_cast<int>(dims.size()) != k) throw ParameterError("UosSpec: need one dim per subspace");
  for (int d : dims) {
    if (d < 1 || d >= n) throw ParameterError("UosSpec: subspace dims must lie in [1, n)");
  }
}

UosData gen_uos(const UosSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  UosData out;
  out.m.resize(spec.n, static_cast<Eigen::Index>(spec.k) * spec.pts_per);
  Eigen::Index col = 0;
  for (int g = 0; g < spec.k; ++g) {
    const Matrix basis = qf(gaussian_matrix(spec.n, spec.dims[static_cast<std::size_t>(g)], 1.0, rng));
    const Vector offset = spec.affine ? Vector(gaussian_matrix(spec.n, 1, 1.0, rng)) : Vector::Zero(spec.n);
    const Matrix coeff = gaussian_matrix(basis.cols(), spec.pts_per, 1.0, rng);
    out.m.middleCols(col, spec.pts_per) = (basis * coeff).colwise() + offset;
    out.labels.insert(out.labels.end(), static_cast<std::size_t>(spec.pts_per), g);
    out.bases.push_back(basis);
    out.offsets.push_back(offset);
    col += spec.pts_per;
  }
  return out;
}

void ClusterSpec::validate() const {
  if (n < 1 || k < 1 || pts_per < 1) throw ParameterError("ClusterSpec: n, k, pts_per must be >= 1");
  if (!(sigma_c > 0.0) || !(center_sigma > 0.0)) {
    throw ParameterError("ClusterSpec: sigma_c and center_sigma must be positive");
  }
}

ClusterData gen_clusters(const ClusterSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  ClusterData out;
  out.centers = gaussian_matrix(spec.n, spec.k, spec.center_sigma, rng);
  out.m.resize(spec.n, static_cast<Eigen::Index>(spec.k) * spec.pts_per);
  for (int g = 0; g < spec.k; ++g) {
    const Matrix noise = gaussian_matrix(spec.n, spec.pts_per, spec.sigma_c, rng);
    out.m.middleCols(static_cast<Eigen::Index>(g) * spec.pts_per, spec.pts_per) =
        noise.colwise() + Vector(out.centers.col(g));
    out.labels.insert(out.labels.end(), static_cast<std::size_t>(spec.pts_per), g);
  }
  return out;
}

MeasurementSubspace gen_entry_mask(const Matrix& target, double delta, std::mt19937_64& rng) {
  if (!(delta > 0.0 && delta <= 1.0)) throw ParameterError("gen_entry_mask: delta must lie in (0, 1]");
  const Eigen::Index total = target.size();
  const auto m = static_cast<Eigen::Index>(std::llround(delta * static_cast<double>(total)));
  if (m < 1) throw ParameterError("gen_entry_mask: no entries would be observed");
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(total));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  // Partial Fisher–Yates: the first m slots are a uniform sample.
  for (Eigen::Index i = 0; i < m; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, total - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  BoolMatrix mask = BoolMatrix::Constant(target.rows(), target.cols(), false);
  for (Eigen::Index i = 0; i < m; ++i) mask.data()[idx[static_cast<std::size_t>(i)]] = true;
  return MeasurementSubspace::entry_mask(mask, target);
}

SensingData gen_gaussian_sensing(const Matrix& target, Eigen::Index m, std::mt19937_64& rng,
                                 std::optional<double> noise_sigma) {
  if (m < 1) throw ParameterError("gen_gaussian_sensing: m must be >= 1");
  if (noise_sigma && !(*noise_sigma >= 0.0)) {
    throw ParameterError("gen_gaussian_sensing: noise sigma must be >= 0");
  }
  Matrix a = gaussian_matrix(m, target.size(), 1.0 / std::sqrt(static_cast<double>(m)), rng);
  Vector clean = a * target.reshaped();
  Vector b = clean;
  if (noise_sigma && *noise_sigma > 0.0) b += Vector(gaussian_matrix(m, 1, *noise_sigma, rng));
  SensingData out{MeasurementSubspace::dense(target.rows(), target.cols(), std::move(a), b),
                  std::move(clean), m >= target.size()};
  return out;
}

double rmse(const Matrix& x, const Matrix& m) {
  require_shape(x, m.rows(), m.cols(), "rmse");
  return (x - m).norm() / std::sqrt(static_cast<double>(x.size()));
}

double rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw DimensionError("rand_index: labelings differ in length");
  const std::size_t s = a.size();
  if (s < 2) return 1.0;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = i + 1; j < s; ++j) {
      if ((a[i] == a[j]) == (b[i] == b[j])) ++agree;
    }
  }
  return static_cast<double>(agree) / static_cast<double>(s * (s - 1) / 2);
}

std::vector<int> cluster_assign(const Matrix& x, int k, std::mt19937_64& rng, int restarts) {
  const Eigen::Index s = x.cols();
  if (k < 1 || k > s) throw ParameterError("cluster_assign: need 1 <= k <= s");
  std::vector<int> best(static_cast<std::size_t>(s), 0);
  double best_obj = std::numeric_limits<double>::infinity();
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  for (int rep = 0; rep < std::max(restarts, 1); ++rep) {
    // k-means++ seeding
    Matrix centers(x.rows(), k);
    centers.col(0) = x.col(std::uniform_int_distribution<Eigen::Index>(0, s - 1)(rng));
    Vector d2 = (x.colwise() - Vector(centers.col(0))).colwise().squaredNorm().transpose();
    for (int c = 1; c < k; ++c) {
      const double total = d2.sum();
      Eigen::Index pick = s - 1;
      if (total > 0.0) {
        double u = unif(rng) * total;
        for (Eigen::Index j = 0; j < s; ++j) {
          u -= d2(j);
          if (u <= 0.0) {
            pick = j;
            break;
          }
        }
      } else {
        pick = std::uniform_int_distribution<Eigen::Index>(0, s - 1)(rng);
      }
      centers.col(c) = x.col(pick);
      d2 = d2.cwiseMin((x.colwise() - Vector(centers.col(c))).colwise().squaredNorm().transpose());
    }

    std::vector<int> labels(static_cast<std::size_t>(s), -1);
    double obj = 0.0;
    for (int iter = 0; iter < 300; ++iter) {
      bool changed = false;
      obj = 0.0;
      for (Eigen::Index j = 0; j < s; ++j) {
        Eigen::Index arg = 0;
        const double dist = (centers.colwise() - Vector(x.col(j))).colwise().squaredNorm().minCoeff(&arg);
        obj += dist;
        if (labels[static_cast<std::size_t>(j)] != static_cast<int>(arg)) {
          labels[static_cast<std::size_t>(j)] = static_cast<int>(arg);
          changed = true;
        }
      }
      if (!changed) break;
      Matrix sums = Matrix::Zero(x.rows(), k);
      std::vector<int> counts(static_cast<std::size_t>(k), 0);
      for (Eigen::Index j = 0; j < s; ++j) {
        sums.col(labels[static_cast<std::size_t>(j)]) += x.col(j);
        ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(j)])];
      }
      for (int c = 0; c < k; ++c) {
        if (counts[static_cast<std::size_t>(c)] > 0) {
          centers.col(c) = sums.col(c) / counts[static_cast<std::size_t>(c)];
        }
      }
    }
    if (obj < best_obj) {
      best_obj = obj;
      best = labels;
    }
  }
  return best;
}

Eigen::Index numerical_rank(const Matrix& y, double rel_tol) {
  if (y.size() == 0) return 0;
  const Vector sv = Eigen::BDCSVD<Matrix>(y).singularValues();
  if (sv(0) == 0.0) return 0;
  return (sv.array() >= rel_tol * sv(0)).count();
}

void write_matrix_csv(std::ostream& os, const Matrix& m) {
  os << "# " << m.rows() << ',' << m.cols() << '\n';
  char buf[64];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      if (j) os << ',';
      os << buf;
    }
    os << '\n';
  }
}

Matrix read_matrix_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.empty() || line[0] != '#') {
    throw ConfigError("read_matrix_csv: missing '# rows,cols' header");
  }
  long rows = 0;
  long cols = 0;
  if (std::sscanf(line.c_str(), "# %ld,%ld", &rows, &cols) != 2 || rows < 0 || cols < 0) {
    throw ConfigError("read_matrix_csv: malformed header '" + line + "'");
  }
  Matrix m(rows, cols);
  for (long i = 0; i < rows; ++i) {
    if (!std::getline(is, line)) throw ConfigError("read_matrix_csv: too few rows");
    std::stringstream ss(line);
    std::string cell;
    for (long j = 0; j < cols; ++j) {
      if (!std::getline(ss, cell, ',')) throw ConfigError("read_matrix_csv: too few columns");
      try {
        m(i, j) = std::stod(cell);
      } catch (const std::exception&) {
        throw ConfigError("read_matrix_csv: bad number '" + cell + "'");
      }
    }
  }
  return m;
}

void write_labels(std::ostream& os, const std::vector<int>& labels) {
  for (int l : labels) os << l << '\n';
}

std::vector<int> read_labels(std::istream& is) {
  std::vector<int> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(std::stoi(line));
    } catch (const std::exception&) {
      throw ConfigError("read_labels: bad label '" + line + "'");
    }
  }
  return out;
}

}  // namespace nlrec
