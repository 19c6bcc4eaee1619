#pragma once

// Plaintext control mathematics: plant discretization, PID and
// disturbance-observer realizations, the stacked parameter matrix
// Phi = [[A, B], [C, D]], closed-loop construction and spectrum analysis.
//
// Controller state (DOB-PID):  x = [e(t-1), w(t-1), xhat_p1, xhat_p2, dhat]
// Controller input:            v = [r, y]
// Stacked signal:              xi = [x; v],  psi = Phi * xi = [x(t+1); u(t)]

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "khectl/matrix.hpp"

namespace khectl::control {

struct PlantModel {
  Matrix A;  // 2x2
  Matrix B;  // 2x1
  Matrix C;  // 1x2
  double sample_period = 0.0;

  /// Throws std::invalid_argument on bad shapes, T_s <= 0, or when
  /// (A, B) is not controllable / (C, A) not observable.
  void validate() const;
};

struct GainSet {
  double kp = 0.0;
  double ki = 0.0;
  double kd = 0.0;
  std::array<double, 2> lx{};
  double ld = 0.0;
};

struct PidBlocks {
  Matrix Ac, Bc, Cc, Dc;
};

struct DobBlocks {
  Matrix Ad, Bd, Cd;
};

enum class ControllerKind { DobPid, Pid };

struct ControllerRealization {
  ControllerKind kind = ControllerKind::DobPid;
  Matrix A, B, C, D;
  Matrix phi;
  PidBlocks pid;
  std::optional<DobBlocks> dob;

  std::size_t states() const { return A.rows(); }
  std::size_t inputs() const { return B.cols(); }
  /// 0-based index of the disturbance estimate inside x, if any.
  std::optional<std::size_t> disturbance_index() const;
};

/// Exact zero-order-hold discretization of k / (s (s + a)) with state
/// [position, velocity]. Throws std::domain_error for a <= 0 or T_s <= 0.
PlantModel discretize_plant(double k, double a, double sample_period);

/// The paper's linear-stage model with its printed 4-decimal matrices.
PlantModel reference_plant();
GainSet reference_gains();

PidBlocks assemble_pid(const GainSet& g, double sample_period);

/// DOB-based PID realization. C_d = [B_p; 0] D_c + [L_x; L_d] [0 1], i.e. the
/// y-column carries the observer injection gains.
ControllerRealization assemble_dob_pid(const PlantModel& plant, const GainSet& g);

/// Conventional PID realization (no observer): x = [e(t-1), w(t-1)].
ControllerRealization assemble_pid_only(const GainSet& g, double sample_period);

/// Splits Phi back into (A, B, C, D) for a controller with `states` states.
ControllerRealization realization_from_phi(const Matrix& phi, std::size_t states,
                                           ControllerKind kind);

/// psi = Phi * xi.
Vector controller_step(const Matrix& phi, std::span<const double> xi);

enum class LoopConvention {
  /// x_p(t+1) = A_p x_p + B_p u with u = C x + D [0; y]; the loop the
  /// simulator runs.
  Physical,
  /// Feedthrough enters the plant block with reversed sign:
  /// [[A_p - B_p D_y C_p, B_p C], [B_y C_p, A]]. This is the matrix whose
  /// spectrum the published eigenvalue lists describe.
  Published,
};

/// Autonomous (r = 0, d = 0) closed loop on [x_p; x].
Matrix closed_loop_matrix(const PlantModel& plant, const ControllerRealization& cr,
                          LoopConvention convention = LoopConvention::Physical);

/// Magnitudes of all eigenvalues, sorted descending. Balancing, Hessenberg
/// reduction and shifted QR iteration; throws std::runtime_error when the
/// iteration budget is exceeded.
std::vector<double> eig_magnitudes(const Matrix& m);

struct Eigenvalue {
  double re = 0.0;
  double im = 0.0;
};
std::vector<Eigenvalue> eigenvalues(const Matrix& m);

/// Scales Phi(i, j) (1-based) by lambda and re-derives (A, B, C, D).
ControllerRealization apply_parameter_attack(const ControllerRealization& cr, std::size_t i,
                                             std::size_t j, double lambda);

/// Estimation-error dynamics of the observer augmented with the
/// disturbance state: [[A_p - L_x C_p, -B_p], [-L_d C_p, 1]].
Matrix dob_error_dynamics(const PlantModel& plant, const GainSet& g);

/// Non-fatal design diagnostics (e.g. observer error dynamics not Schur).
std::vector<std::string> design_warnings(const PlantModel& plant, const GainSet& g);

}  // namespace khectl::control
