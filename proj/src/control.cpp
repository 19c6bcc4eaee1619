#include "khectl/control.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace khectl::control {

namespace {

void expect_shape(const Matrix& m, std::size_t r, std::size_t c, const char* name) {
  if (m.rows() != r || m.cols() != c) {
    std::ostringstream msg;
    msg << name << " must be " << r << "x" << c << ", got " << m.rows() << "x" << m.cols();
    throw std::invalid_argument(msg.str());
  }
}

}  // namespace

void PlantModel::validate() const {
  expect_shape(A, 2, 2, "A_p");
  expect_shape(B, 2, 1, "B_p");
  expect_shape(C, 1, 2, "C_p");
  if (!(sample_period > 0.0)) throw std::invalid_argument("sampling period must be positive");
  if (rank(hstack(B, A * B)) < 2) {
    throw std::invalid_argument("plant (A_p, B_p) is not controllable");
  }
  if (rank(vstack(C, C * A)) < 2) {
    throw std::invalid_argument("plant (C_p, A_p) is not observable");
  }
}

std::optional<std::size_t> ControllerRealization::disturbance_index() const {
  if (kind == ControllerKind::DobPid) return states() - 1;
  return std::nullopt;
}

PlantModel discretize_plant(double k, double a, double sample_period) {
  if (!(a > 0.0)) throw std::domain_error("plant pole a must be positive");
  if (!(sample_period > 0.0)) throw std::domain_error("sampling period must be positive");
  const double decay = std::exp(-a * sample_period);
  // (1 - e^{-aT}) / a, evaluated without cancellation for small aT
  const double phi1 = -std::expm1(-a * sample_period) / a;
  PlantModel p;
  p.A = Matrix{{1.0, phi1}, {0.0, decay}};
  p.B = Matrix{{k * (sample_period - phi1) / a}, {k * phi1}};
  p.C = Matrix{{1.0, 0.0}};
  p.sample_period = sample_period;
  return p;
}

PlantModel reference_plant() {
  PlantModel p;
  p.A = Matrix{{1.0, 0.0085}, {0.0, 0.7118}};
  p.B = Matrix{{0.0013}, {0.2398}};
  p.C = Matrix{{1.0, 0.0}};
  p.sample_period = 0.01;
  return p;
}

GainSet reference_gains() {
  GainSet g;
  g.kp = 12.0;
  g.ki = 0.25;
  g.kd = 0.030;
  g.lx = {2.7118, 199.2800};
  g.ld = -380.4456;
  return g;
}

PidBlocks assemble_pid(const GainSet& g, double ts) {
  if (!(ts > 0.0)) throw std::invalid_argument("sampling period must be positive");
  const double direct = g.kp + g.ki * ts + g.kd / ts;
  PidBlocks b;
  b.Ac = Matrix{{0.0, 0.0}, {0.0, 1.0}};
  b.Bc = Matrix{{1.0, -1.0}, {ts, -ts}};
  b.Cc = Matrix{{-g.kd / ts, g.ki}};
  b.Dc = Matrix{{direct, -direct}};
  return b;
}

ControllerRealization assemble_dob_pid(const PlantModel& plant, const GainSet& g) {
  expect_shape(plant.A, 2, 2, "A_p");
  expect_shape(plant.B, 2, 1, "B_p");
  expect_shape(plant.C, 1, 2, "C_p");

  const PidBlocks pid = assemble_pid(g, plant.sample_period);
  const Matrix lx = Matrix{{g.lx[0]}, {g.lx[1]}};

  DobBlocks dob;
  dob.Ad = block2x2(plant.A - lx * plant.C, Matrix(2, 1), -g.ld * plant.C, Matrix{{1.0}});
  dob.Bd = vstack(plant.B * pid.Cc, Matrix(1, 2));
  const Matrix b_aug = vstack(plant.B, Matrix{{0.0}});
  const Matrix l_aug = vstack(lx, Matrix{{g.ld}});
  dob.Cd = b_aug * pid.Dc + l_aug * Matrix{{0.0, 1.0}};

  ControllerRealization cr;
  cr.kind = ControllerKind::DobPid;
  cr.A = block2x2(pid.Ac, Matrix(2, 3), dob.Bd, dob.Ad);
  cr.B = vstack(pid.Bc, dob.Cd);
  cr.C = hstack(pid.Cc, Matrix{{0.0, 0.0, 1.0}});
  cr.D = pid.Dc;
  cr.phi = block2x2(cr.A, cr.B, cr.C, cr.D);
  cr.pid = pid;
  cr.dob = dob;
  return cr;
}

ControllerRealization assemble_pid_only(const GainSet& g, double ts) {
  ControllerRealization cr;
  cr.kind = ControllerKind::Pid;
  cr.pid = assemble_pid(g, ts);
  cr.A = cr.pid.Ac;
  cr.B = cr.pid.Bc;
  cr.C = cr.pid.Cc;
  cr.D = cr.pid.Dc;
  cr.phi = block2x2(cr.A, cr.B, cr.C, cr.D);
  return cr;
}

ControllerRealization realization_from_phi(const Matrix& phi, std::size_t states,
                                           ControllerKind kind) {
  if (phi.rows() != states + 1 || phi.cols() <= states) {
    throw std::invalid_argument("Phi shape does not match the state dimension");
  }
  const std::size_t inputs = phi.cols() - states;
  ControllerRealization cr;
  cr.kind = kind;
  cr.phi = phi;
  cr.A = phi.block(0, 0, states, states);
  cr.B = phi.block(0, states, states, inputs);
  cr.C = phi.block(states, 0, 1, states);
  cr.D = phi.block(states, states, 1, inputs);
  if (states >= 2 && inputs == 2) {
    cr.pid = PidBlocks{cr.A.block(0, 0, 2, 2), cr.B.block(0, 0, 2, 2), cr.C.block(0, 0, 1, 2),
                       cr.D};
  }
  if (kind == ControllerKind::DobPid) {
    if (states != 5 || inputs != 2) {
      throw std::invalid_argument("a DOB-PID realization has 5 states and 2 inputs");
    }
    cr.dob = DobBlocks{cr.A.block(2, 2, 3, 3), cr.A.block(2, 0, 3, 2), cr.B.block(2, 0, 3, 2)};
  }
  return cr;
}

Vector controller_step(const Matrix& phi, std::span<const double> xi) { return phi * xi; }

Matrix closed_loop_matrix(const PlantModel& plant, const ControllerRealization& cr,
                          LoopConvention convention) {
  const std::size_t y_col = cr.inputs() - 1;
  const Matrix d_y = cr.D.block(0, y_col, 1, 1);
  const Matrix b_y = cr.B.block(0, y_col, cr.states(), 1);
  const Matrix feedthrough = plant.B * d_y * plant.C;
  const Matrix plant_block =
      convention == LoopConvention::Physical ? plant.A + feedthrough : plant.A - feedthrough;
  return block2x2(plant_block, plant.B * cr.C, b_y * plant.C, cr.A);
}

ControllerRealization apply_parameter_attack(const ControllerRealization& cr, std::size_t i,
                                             std::size_t j, double lambda) {
  if (i < 1 || i > cr.phi.rows() || j < 1 || j > cr.phi.cols()) {
    std::ostringstream msg;
    msg << "parameter index (" << i << "," << j << ") outside " << cr.phi.rows() << "x"
        << cr.phi.cols();
    throw std::out_of_range(msg.str());
  }
  Matrix phi = cr.phi;
  phi(i - 1, j - 1) *= lambda;
  return realization_from_phi(phi, cr.states(), cr.kind);
}

Matrix dob_error_dynamics(const PlantModel& plant, const GainSet& g) {
  const Matrix lx = Matrix{{g.lx[0]}, {g.lx[1]}};
  return block2x2(plant.A - lx * plant.C, -1.0 * plant.B, -g.ld * plant.C, Matrix{{1.0}});
}

std::vector<std::string> design_warnings(const PlantModel& plant, const GainSet& g) {
  std::vector<std::string> out;
  for (double v : {g.kp, g.ki, g.kd, g.lx[0], g.lx[1], g.ld}) {
    if (!std::isfinite(v)) {
      out.emplace_back("non-finite controller gain");
      break;
    }
  }
  const auto mags = eig_magnitudes(dob_error_dynamics(plant, g));
  if (!mags.empty() && mags.front() >= 1.0) {
    std::ostringstream msg;
    msg << "observer error dynamics are not Schur (spectral radius " << mags.front() << ")";
    out.push_back(msg.str());
  }
  return out;
}

}  // namespace khectl::control
