// Copyright 2026 The kftune Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "kftune/estimators.hpp"

#include <cmath>

#include "kftune/errors.hpp"

namespace kftune {

P0Method parse_p0_method(const std::string& s) {
  if (s == "scale_up") return P0Method::kScaleUp;
  if (s == "iim") return P0Method::kIim;
  if (s == "smoothed") return P0Method::kSmoothed;
  throw ConfigError("unknown p0 method '" + s + "' (expected scale_up|iim|smoothed)");
}

QMethod parse_q_method(const std::string& s) {
  if (s == "em") return QMethod::kEm;
  if (s == "dsdt") return QMethod::kDsdt;
  if (s == "ms") return QMethod::kMs;
  if (s == "mt") return QMethod::kMt;
  if (s == "floor" || s == "fixed_floor") return QMethod::kFixedFloor;
  throw ConfigError("unknown q method '" + s + "' (expected em|dsdt|ms|mt|floor)");
}

RMethod parse_r_method(const std::string& s) {
  if (s == "em") return RMethod::kEm;
  if (s == "ms") return RMethod::kMs;
  if (s == "mt") return RMethod::kMt;
  if (s == "dyn" || s == "dyn_residue") return RMethod::kDynResidue;
  throw ConfigError("unknown r method '" + s + "' (expected em|ms|mt|dyn)");
}

std::string to_string(P0Method m) {
  switch (m) {
    case P0Method::kScaleUp: return "scale_up";
    case P0Method::kIim: return "iim";
    case P0Method::kSmoothed: return "smoothed";
  }
  return "?";
}

std::string to_string(QMethod m) {
  switch (m) {
    case QMethod::kEm: return "em";
    case QMethod::kDsdt: return "dsdt";
    case QMethod::kMs: return "ms";
    case QMethod::kMt: return "mt";
    case QMethod::kFixedFloor: return "floor";
  }
  return "?";
}

std::string to_string(RMethod m) {
  switch (m) {
    case RMethod::kEm: return "em";
    case RMethod::kMs: return "ms";
    case RMethod::kMt: return "mt";
    case RMethod::kDynResidue: return "dyn";
  }
  return "?";
}

Matrix p0_scale_up(const Matrix& P_final, std::size_t n_samples, TrimMask mask,
                   std::size_t n_states) {
  return apply_mask(static_cast<double>(n_samples) * P_final, mask, n_states);
}

Matrix p0_iim(const FilterPass& pass, const Matrix& R, TrimMask mask, std::size_t n_states) {
  const std::size_t N = pass.size();
  if (N == 0) throw Error("p0_iim: empty pass");
  bool regularized = false;
  const auto dim = pass.X_post[0].size();
  Matrix info = Matrix::Zero(dim, dim);
  for (std::size_t k = 1; k <= N; ++k) {
    const Matrix HF = pass.H[k] * pass.F[k - 1];
    info += HF.transpose() * solve_spd(R, HF, k, &regularized, "R");
  }
  info = symmetrize(info / static_cast<double>(N));

  Eigen::SelfAdjointEigenSolver<Matrix> es(info);
  const double top = es.eigenvalues().cwiseAbs().maxCoeff();
  if (!(es.eigenvalues().minCoeff() > 1e-12 * top)) {
    std::string dirs;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
      if (es.eigenvalues()(i) > 1e-12 * top) continue;
      Eigen::Index arg;
      es.eigenvectors().col(i).cwiseAbs().maxCoeff(&arg);
      dirs += (dirs.empty() ? "" : ", ") + std::to_string(arg);
    }
    throw SingularMatrixError("information matrix is singular; unexcited state directions [" +
                                  dirs + "] need full-rank excitation",
                              N);
  }
  const Matrix inv = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
                     es.eigenvectors().transpose();
  return apply_mask(inv, mask, n_states);
}

Matrix p0_smoothed(const SmootherPass& smoother, TrimMask mask, std::size_t n_states) {
  return apply_mask(smoother.P_smooth.at(0), mask, n_states);
}

namespace {

void require(const void* p, const char* what) {
  if (!p) throw Error(std::string("estimator needs ") + what);
}

// Flip negative diagonal entries to their absolute value.
void clamp_diagonal(Matrix& m, EstimatorTelemetry* telemetry) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (m(i, i) < 0.0) {
      m(i, i) = -m(i, i);
      if (telemetry) ++telemetry->clamped_entries;
    }
  }
}

void check_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw Error(std::string(what) + " estimate is not finite");
}

}  // namespace

Matrix estimate_R(RMethod method, const PassProducts& passes, const ModelSpec& model,
                  TrimMask mask, EstimatorTelemetry* telemetry) {
  require(passes.filter, "a filter pass");
  const FilterPass& f = *passes.filter;
  const std::size_t N = f.size();
  const auto m = static_cast<Eigen::Index>(model.n_meas);
  Matrix sum = Matrix::Zero(m, m);

  switch (method) {
    case RMethod::kEm: {
      require(passes.smoother, "a smoother pass");
      const SmootherPass& s = *passes.smoother;
      for (std::size_t k = 1; k <= N; ++k) {
        const Vector& e = s.smoothed_residue[k];
        sum += e * e.transpose() + s.H_smooth[k] * s.P_smooth[k] * s.H_smooth[k].transpose();
      }
      break;
    }
    case RMethod::kMs:
      for (std::size_t k = 1; k <= N; ++k) {
        const Vector& e = f.residue[k];
        sum += e * e.transpose() + f.H_post[k] * f.P_post[k] * f.H_post[k].transpose();
      }
      break;
    case RMethod::kMt:
      for (std::size_t k = 1; k <= N; ++k) {
        const Vector& e = f.innovation[k];
        sum += e * e.transpose() - f.H[k] * f.P_prior[k] * f.H[k].transpose();
      }
      break;
    case RMethod::kDynResidue: {
      require(passes.dyn, "a dynamical pass");
      for (std::size_t k = 1; k <= N; ++k) {
        const Vector e = f.Z[k] - measure(model, passes.dyn->Xd[k]);
        sum += e * e.transpose();
      }
      break;
    }
  }
  Matrix R = apply_mask(symmetrize(sum / static_cast<double>(N)), mask, model.n_states);
  check_finite(R, "R");
  if (method == RMethod::kMt) clamp_diagonal(R, telemetry);
  return R;
}

Matrix q_floor_matrix(const ModelSpec& model, double floor) {
  const auto dim = static_cast<Eigen::Index>(model.augmented_size());
  Matrix Q = Matrix::Zero(dim, dim);
  Q.diagonal().head(model.n_states).setConstant(floor);
  return Q;
}

Matrix estimate_Q(QMethod method, const PassProducts& passes, const ModelSpec& model,
                  TrimMask mask, double floor, EstimatorTelemetry* telemetry) {
  if (method == QMethod::kFixedFloor) return q_floor_matrix(model, floor);
  require(passes.filter, "a filter pass");
  const FilterPass& f = *passes.filter;
  const std::size_t N = f.size();
  const auto dim = static_cast<Eigen::Index>(model.augmented_size());
  Matrix sum = Matrix::Zero(dim, dim);

  switch (method) {
    case QMethod::kEm: {
      require(passes.smoother, "a smoother pass");
      const SmootherPass& s = *passes.smoother;
      for (std::size_t k = 1; k <= N; ++k) {
        const Matrix& F = s.F_smooth[k - 1];
        const Matrix& L = s.lag_one[k];
        const double t_prev = static_cast<double>(k - 1) * f.dt;
        const Vector w1 = s.X_smooth[k] - propagate(model, s.X_smooth[k - 1], f.dt, t_prev, k);
        sum += w1 * w1.transpose() + s.P_smooth[k] + F * s.P_smooth[k - 1] * F.transpose() -
               L * F.transpose() - F * L.transpose();
      }
      break;
    }
    case QMethod::kDsdt: {
      require(passes.smoother, "a smoother pass");
      require(passes.dyn, "a dynamical pass");
      const SmootherPass& s = *passes.smoother;
      const DynamicalPass& d = *passes.dyn;
      for (std::size_t k = 1; k <= N; ++k) {
        const Matrix& Fd = d.Fd[k - 1];
        const Matrix& L = s.lag_one[k];
        const Vector w2 = (s.X_smooth[k] - d.Xd[k]) - Fd * (s.X_smooth[k - 1] - d.Xd[k - 1]);
        sum += w2 * w2.transpose() + s.P_smooth[k] + Fd * s.P_smooth[k - 1] * Fd.transpose() -
               L * Fd.transpose() - Fd * L.transpose();
      }
      break;
    }
    case QMethod::kMs: {
      const auto m = static_cast<Eigen::Index>(model.n_meas);
      Matrix C = Matrix::Zero(m, m);
      for (std::size_t k = 1; k <= N; ++k) C += f.innovation[k] * f.innovation[k].transpose();
      C /= static_cast<double>(N);
      sum = f.gain[N] * C * f.gain[N].transpose() * static_cast<double>(N);
      break;
    }
    case QMethod::kMt:
      for (std::size_t k = 1; k <= N; ++k) {
        const Matrix& F = f.F[k - 1];
        const Vector w3 = f.X_post[k] - f.X_prior[k];
        sum += w3 * w3.transpose() - (F * f.P_post[k - 1] * F.transpose() - f.P_post[k]);
      }
      break;
    case QMethod::kFixedFloor:
      break;
  }
  Matrix Q = apply_mask(symmetrize(sum / static_cast<double>(N)), mask, model.n_states);
  check_finite(Q, "Q");
  if (method == QMethod::kMt) clamp_diagonal(Q, telemetry);
  return Q;
}

}  // namespace kftune
