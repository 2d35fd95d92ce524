#pragma once

// Design declaration and validation: batches, their flat-direction
// constraints, covariates and priors, plus the balanced/orthogonal checks
// that license the factored posterior.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mmanova/linalg.hpp"

namespace mmanova {

struct FactorColumn {
  std::vector<std::size_t> index;   // 0-based level per observation
  std::vector<std::string> labels;  // first-appearance order
  std::size_t levels() const { return labels.size(); }
};

/// n observations of a d-dimensional response plus factor and covariate columns.
struct Dataset {
  Matrix responses;  // n × d
  std::vector<std::string> response_names;
  std::map<std::string, FactorColumn> factors;
  std::map<std::string, std::vector<double>> covariates;

  std::size_t size() const { return static_cast<std::size_t>(responses.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(responses.cols()); }
};

enum class BatchKind { intercept, main, interaction, slope };

inline std::string_view to_string(BatchKind kind) {
  switch (kind) {
    case BatchKind::intercept: return "intercept";
    case BatchKind::main: return "main";
    case BatchKind::interaction: return "interaction";
    case BatchKind::slope: return "slope";
  }
  return "?";
}

enum class CovariateTransform { none, center, orthogonalize };

struct PriorConfig {
  std::optional<Matrix> psi;
  double kappa = 0.0;
  std::optional<Vector> beta0;
};

struct BatchConfig {
  std::string name;
  BatchKind kind = BatchKind::main;
  std::vector<std::string> factors;
  std::optional<std::string> covariate;
  CovariateTransform transform = CovariateTransform::none;
  PriorConfig prior;
};

enum class TruncationFallback { truncate, fail };

/// The model configuration document: design plus sampler settings.
struct ModelConfig {
  std::vector<std::string> responses;
  std::vector<BatchConfig> batches;
  std::size_t draws = 1000;
  std::uint64_t seed = 1;
  std::vector<double> quantiles{0.025, 0.25, 0.5, 0.75, 0.975};
  PriorConfig error_prior;
  std::size_t rejection_cap = 1000;
  TruncationFallback fallback = TruncationFallback::truncate;
};

/// Eigenbasis of the constraint projector: the first `flat` columns of
/// `rotation` span the row space of C, the remaining `free` columns its
/// orthogonal complement.
struct ConstraintGeometry {
  SymMatrix projector;
  Matrix rotation;
  std::size_t flat = 0;
  std::size_t free = 0;
};

struct BatchSpec {
  std::string name;
  BatchKind kind = BatchKind::main;
  std::vector<std::string> factors;
  std::vector<std::size_t> dims;
  std::optional<std::string> covariate;
  std::size_t levels = 0;
  std::vector<std::string> level_labels;
  std::vector<std::size_t> level_map;   // per observation
  std::vector<double> covariate_values;  // transformed, per observation; empty for constant batches
  Matrix constraint;                     // c_b × n_b
  ConstraintGeometry geometry;
  SymMatrix prior_psi;
  double prior_kappa = 0.0;
  Vector prior_beta0;
  /// Per-level Σx² (n/n_b for constant batches).
  double weight = 0.0;
  bool covariance_proper = false;

  std::size_t constraint_count() const { return geometry.flat; }
  std::size_t dof() const { return geometry.free; }
  bool fully_flat() const { return geometry.free == 0; }
  /// Scale on Σ_ε of a level estimate's sampling covariance (n_b/n, or v_b for slopes).
  double variance_factor() const { return 1.0 / weight; }
  double posterior_dof() const { return prior_kappa + static_cast<double>(dof()); }
  double x(std::size_t obs) const { return covariate_values.empty() ? 1.0 : covariate_values[obs]; }
};

struct CovariateColumn {
  std::vector<double> raw;
  std::vector<double> transformed;
};

struct ModelSpec {
  std::size_t d = 0;
  std::size_t n = 0;
  std::vector<BatchSpec> batches;
  SymMatrix error_psi;
  double error_kappa = 0.0;
  std::map<std::string, CovariateColumn> covariates;
  std::vector<std::string> notes;

  /// n − Σ_b n_b, the residual count entering the error posterior.
  long residual_count() const {
    long total = static_cast<long>(n);
    for (const auto& b : batches) total -= static_cast<long>(b.levels);
    return total;
  }

  std::optional<std::size_t> find(const std::string& name) const {
    for (std::size_t b = 0; b < batches.size(); ++b)
      if (batches[b].name == name) return b;
    return std::nullopt;
  }
};

namespace detail {

inline Matrix reduce_to_full_row_rank(const std::vector<Vector>& rows, Index n) {
  std::vector<Vector> kept;
  std::vector<Vector> basis;
  for (const auto& r : rows) {
    Vector res = r;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : basis) res -= q.dot(res) * q;
    if (res.norm() > 1e-10 * r.norm()) {
      basis.push_back(res / res.norm());
      kept.push_back(r);
    }
  }
  Matrix c(static_cast<Index>(kept.size()), n);
  for (std::size_t i = 0; i < kept.size(); ++i) c.row(static_cast<Index>(i)) = kept[i].transpose();
  return c;
}

}  // namespace detail

/// Constraint matrix whose rows span the flat (unpenalized) directions of a
/// batch. Main and slope batches get a single sum-to-zero row, interactions
/// every marginal sum reduced to full row rank, the intercept the 1×1 [1].
inline Matrix flat_direction_constraints(BatchKind kind, const std::vector<std::size_t>& dims) {
  for (auto n : dims)
    if (n == 0) throw Error(Errc::invalid_dims, "factor with zero levels");
  switch (kind) {
    case BatchKind::intercept:
      if (!dims.empty()) throw Error(Errc::invalid_dims, "intercept takes no factors");
      return Matrix::Ones(1, 1);
    case BatchKind::main:
      if (dims.size() != 1) throw Error(Errc::invalid_dims, "main batch takes exactly one factor");
      break;
    case BatchKind::interaction:
      if (dims.size() < 2) throw Error(Errc::invalid_dims, "interaction needs at least two factors");
      break;
    case BatchKind::slope:
      if (dims.empty()) return Matrix::Ones(1, 1);
      break;
  }
  if (dims.size() == 1) return Matrix::Ones(1, static_cast<Index>(dims[0]));

  // Mixed-radix cells, first factor most significant.
  std::size_t cells = 1;
  for (auto n : dims) cells *= n;
  std::vector<std::size_t> stride(dims.size(), 1);
  for (std::size_t f = dims.size() - 1; f-- > 0;) stride[f] = stride[f + 1] * dims[f + 1];

  std::vector<Vector> rows;
  for (std::size_t f = 0; f < dims.size(); ++f) {
    // One row per combination of the other factors, summing over factor f.
    std::map<std::size_t, Vector> by_rest;
    for (std::size_t cell = 0; cell < cells; ++cell) {
      const std::size_t own = (cell / stride[f]) % dims[f];
      const std::size_t rest = cell - own * stride[f];
      auto [it, inserted] = by_rest.try_emplace(rest, Vector::Zero(static_cast<Index>(cells)));
      it->second(static_cast<Index>(cell)) = 1.0;
    }
    for (auto& [rest, row] : by_rest) rows.push_back(std::move(row));
  }
  return detail::reduce_to_full_row_rank(rows, static_cast<Index>(cells));
}

inline ConstraintGeometry constraint_geometry(const Matrix& c) {
  ConstraintGeometry g;
  g.projector = constraint_projector(c);
  const auto eig = sym_eigen(g.projector);
  const Index n = c.cols();
  std::vector<Index> free_cols;
  std::vector<Index> flat_cols;
  for (Index k = 0; k < n; ++k) (eig.values(k) > 0.5 ? free_cols : flat_cols).push_back(k);
  g.flat = flat_cols.size();
  g.free = free_cols.size();
  if (g.flat != static_cast<std::size_t>(c.rows())) {
    throw Error(Errc::invalid_dims, "constraint matrix is not of full row rank");
  }
  g.rotation.resize(n, n);
  Index col = 0;
  for (Index k : flat_cols) g.rotation.col(col++) = eig.vectors.col(k);
  for (Index k : free_cols) g.rotation.col(col++) = eig.vectors.col(k);
  return g;
}

/// Gram–Schmidt residual of x against the given basis columns.
inline std::vector<double> orthogonalize_covariate(const std::vector<double>& x, const Matrix& basis) {
  const Index n = static_cast<Index>(x.size());
  if (basis.cols() > 0 && basis.rows() != n) {
    throw Error(Errc::invalid_dims, "basis rows do not match covariate length");
  }
  std::vector<Vector> q;
  for (Index j = 0; j < basis.cols(); ++j) {
    Vector v = basis.col(j);
    const double norm0 = v.norm();
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& u : q) v -= u.dot(v) * u;
    if (!(v.norm() > 1e-10 * norm0) || norm0 == 0.0) {
      throw Error(Errc::degenerate_basis, "orthogonalization basis is linearly dependent");
    }
    q.push_back(v / v.norm());
  }
  Vector r = Eigen::Map<const Vector>(x.data(), n);
  for (int pass = 0; pass < 2; ++pass)
    for (const auto& u : q) r -= u.dot(r) * u;
  return {r.data(), r.data() + n};
}

namespace detail {

/// n × n_b design columns of a batch (indicator times covariate).
inline Matrix design_columns(const BatchSpec& b, std::size_t n) {
  Matrix x = Matrix::Zero(static_cast<Index>(n), static_cast<Index>(b.levels));
  for (std::size_t i = 0; i < n; ++i) x(static_cast<Index>(i), static_cast<Index>(b.level_map[i])) = b.x(i);
  return x;
}

/// Columns spanning the batch's estimation space: the constraint-free part of
/// its design, or the whole design for fully flat batches.
inline Matrix estimation_space(const BatchSpec& b, std::size_t n) {
  const Matrix x = design_columns(b, n);
  if (b.fully_flat()) return x;
  return x * b.geometry.rotation.rightCols(static_cast<Index>(b.geometry.free));
}

inline void check_balance(const Dataset& data, const std::vector<std::string>& factors) {
  if (factors.empty()) return;
  std::vector<const FactorColumn*> cols;
  std::size_t cells = 1;
  for (const auto& f : factors) {
    cols.push_back(&data.factors.at(f));
    cells *= cols.back()->levels();
  }
  std::vector<std::size_t> counts(cells, 0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::size_t cell = 0;
    for (const auto* c : cols) cell = cell * c->levels() + c->index[i];
    ++counts[cell];
  }
  std::map<std::size_t, std::size_t> frequency;
  for (auto c : counts) ++frequency[c];
  std::size_t expected = 0;
  std::size_t best = 0;
  for (auto [count, times] : frequency) {
    if (times > best || (times == best && count > expected)) {
      expected = count;
      best = times;
    }
  }
  for (std::size_t cell = 0; cell < cells; ++cell) {
    if (counts[cell] == expected && expected > 0) continue;
    std::ostringstream msg;
    msg << "unbalanced design: cell (";
    std::size_t rem = cell;
    std::vector<std::size_t> idx(cols.size());
    for (std::size_t f = cols.size(); f-- > 0;) {
      idx[f] = rem % cols[f]->levels();
      rem /= cols[f]->levels();
    }
    for (std::size_t f = 0; f < cols.size(); ++f) {
      msg << (f ? ", " : "") << factors[f] << "=" << cols[f]->labels[idx[f]];
    }
    msg << ") has " << counts[cell] << " observations, expected " << expected;
    throw Error(Errc::unbalanced, msg.str());
  }
}

}  // namespace detail

/// Validates a configuration against a dataset and assembles the design.
/// Covariate transforms are applied at the first batch that uses the
/// covariate, against the estimation spaces of the batches declared before it.
inline ModelSpec build_model(const ModelConfig& config, const Dataset& data) {
  ModelSpec model;
  model.d = data.dim();
  model.n = data.size();
  const Index d = static_cast<Index>(model.d);
  if (model.d == 0 || model.n == 0) throw Error(Errc::invalid_argument, "empty dataset");
  if (config.batches.empty()) throw Error(Errc::invalid_argument, "model has no batches");

  std::vector<std::string> all_factors;
  for (const auto& bc : config.batches) {
    for (const auto& f : bc.factors) {
      if (!data.factors.count(f)) {
        throw Error(Errc::invalid_argument, "batch '" + bc.name + "' references unknown factor '" + f + "'");
      }
      if (std::find(all_factors.begin(), all_factors.end(), f) == all_factors.end()) all_factors.push_back(f);
    }
    if (bc.covariate && !data.covariates.count(*bc.covariate)) {
      throw Error(Errc::invalid_argument,
                  "batch '" + bc.name + "' references unknown covariate '" + *bc.covariate + "'");
    }
  }
  detail::check_balance(data, all_factors);

  auto prior_psi = [&](const PriorConfig& p, const std::string& who) {
    if (!p.psi) return SymMatrix::zero(d);
    if (p.psi->rows() != d || p.psi->cols() != d) {
      throw Error(Errc::invalid_dims, who + ": prior psi must be " + std::to_string(d) + "x" + std::to_string(d));
    }
    SymMatrix psi(*p.psi);
    if (psi.trace() != 0.0 && sym_eigen(psi).values.minCoeff() < -1e-12 * std::abs(psi.trace())) {
      throw Error(Errc::invalid_argument, who + ": prior psi must be positive semidefinite");
    }
    return psi;
  };
  if (config.error_prior.kappa < 0.0) throw Error(Errc::invalid_argument, "error prior kappa must be >= 0");
  model.error_psi = prior_psi(config.error_prior, "error");
  model.error_kappa = config.error_prior.kappa;

  std::map<std::string, CovariateTransform> applied;
  std::vector<Matrix> spaces;
  for (const auto& bc : config.batches) {
    if (model.find(bc.name)) throw Error(Errc::invalid_argument, "duplicate batch name '" + bc.name + "'");
    BatchSpec b;
    b.name = bc.name;
    b.kind = bc.kind;
    b.factors = bc.factors;
    b.covariate = bc.covariate;

    const bool wants_covariate = bc.kind == BatchKind::slope;
    if (wants_covariate != bc.covariate.has_value()) {
      throw Error(Errc::invalid_argument, "batch '" + bc.name + "': only slope batches take a covariate, and they require one");
    }
    if (!wants_covariate && bc.transform != CovariateTransform::none) {
      throw Error(Errc::invalid_argument, "batch '" + bc.name + "': transform given without covariate");
    }

    for (const auto& f : bc.factors) b.dims.push_back(data.factors.at(f).levels());
    try {
      b.constraint = flat_direction_constraints(bc.kind, b.dims);
    } catch (const Error& e) {
      throw Error(e.code(), "batch '" + bc.name + "': " + e.what());
    }
    b.levels = static_cast<std::size_t>(b.constraint.cols());
    b.geometry = constraint_geometry(b.constraint);

    b.level_map.assign(model.n, 0);
    for (std::size_t i = 0; i < model.n; ++i) {
      std::size_t level = 0;
      for (std::size_t f = 0; f < bc.factors.size(); ++f) {
        level = level * b.dims[f] + data.factors.at(bc.factors[f]).index[i];
      }
      b.level_map[i] = level;
    }
    b.level_labels.assign(b.levels, "");
    for (std::size_t i = 0; i < model.n; ++i) {
      auto& label = b.level_labels[b.level_map[i]];
      if (!label.empty() || bc.factors.empty()) continue;
      for (std::size_t f = 0; f < bc.factors.size(); ++f) {
        const auto& col = data.factors.at(bc.factors[f]);
        label += (f ? ":" : "") + col.labels[col.index[i]];
      }
    }
    if (bc.factors.empty()) b.level_labels[0] = bc.name;

    if (bc.covariate) {
      const auto& name = *bc.covariate;
      auto it = applied.find(name);
      if (it == applied.end()) {
        const auto& raw = data.covariates.at(name);
        std::vector<double> values = raw;
        if (bc.transform == CovariateTransform::center) {
          values = orthogonalize_covariate(raw, Matrix::Ones(static_cast<Index>(model.n), 1));
        } else if (bc.transform == CovariateTransform::orthogonalize) {
          Index cols = 0;
          for (const auto& s : spaces) cols += s.cols();
          Matrix basis(static_cast<Index>(model.n), cols);
          Index at = 0;
          for (const auto& s : spaces) {
            basis.middleCols(at, s.cols()) = s;
            at += s.cols();
          }
          values = orthogonalize_covariate(raw, basis);
        }
        applied.emplace(name, bc.transform);
        model.covariates[name] = CovariateColumn{raw, values};
      } else if (bc.transform != CovariateTransform::none && bc.transform != it->second) {
        throw Error(Errc::invalid_argument, "covariate '" + name + "' given conflicting transforms");
      }
      b.covariate_values = model.covariates.at(name).transformed;
    }

    std::vector<double> level_weight(b.levels, 0.0);
    for (std::size_t i = 0; i < model.n; ++i) level_weight[b.level_map[i]] += b.x(i) * b.x(i);
    b.weight = level_weight[0];
    for (std::size_t l = 0; l < b.levels; ++l) {
      if (!(level_weight[l] > 0.0)) {
        throw Error(Errc::degenerate_basis, "batch '" + bc.name + "': covariate vanishes on level " + b.level_labels[l]);
      }
      if (std::abs(level_weight[l] - b.weight) > 1e-9 * b.weight) {
        throw Error(Errc::unbalanced, "batch '" + bc.name + "': unequal covariate sum of squares across levels (level " +
                                          b.level_labels[l] + ")");
      }
    }

    b.prior_psi = prior_psi(bc.prior, "batch '" + bc.name + "'");
    if (bc.prior.kappa < 0.0) throw Error(Errc::invalid_argument, "batch '" + bc.name + "': kappa must be >= 0");
    b.prior_kappa = bc.prior.kappa;
    b.prior_beta0 = bc.prior.beta0.value_or(Vector::Zero(d));
    if (b.prior_beta0.size() != d) throw Error(Errc::invalid_dims, "batch '" + bc.name + "': beta0 must have length d");

    b.covariance_proper = !b.fully_flat() && b.posterior_dof() > static_cast<double>(model.d) - 1.0;
    if (!b.fully_flat() && !b.covariance_proper) {
      std::ostringstream note;
      note << "InsufficientDof: batch '" << b.name << "' has kappa + nu = " << b.posterior_dof()
           << " <= d - 1; levels sampled, covariance summary withheld";
      model.notes.push_back(note.str());
    }

    spaces.push_back(detail::estimation_space(b, model.n));
    model.batches.push_back(std::move(b));
  }

  // Pairwise orthogonality of the estimation spaces.
  for (std::size_t a = 0; a < spaces.size(); ++a) {
    const Vector na = spaces[a].colwise().norm();
    for (std::size_t c = a + 1; c < spaces.size(); ++c) {
      const Vector nc = spaces[c].colwise().norm();
      const Matrix g = spaces[a].transpose() * spaces[c];
      for (Index i = 0; i < g.rows(); ++i) {
        for (Index j = 0; j < g.cols(); ++j) {
          if (std::abs(g(i, j)) > 1e-8 * na(i) * nc(j)) {
            throw Error(Errc::non_orthogonal, "batches '" + model.batches[a].name + "' and '" +
                                                  model.batches[c].name + "' are not orthogonal");
          }
        }
      }
    }
  }
  return model;
}

}  // namespace mmanova
