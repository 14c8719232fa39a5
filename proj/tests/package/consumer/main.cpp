#include <cmath>
#include <iostream>

#include <unravel/spin_model.hpp>

int main() {
  using namespace unravel;
  SpinParams sp;
  StateVector psi{0.5, std::sqrt(3.0) / 2.0};
  auto tr = simulate_trajectory(spin_model(sp), UnravelingParams::nonlinear(sp.lambda), psi, 1e-3, 100, 1);
  double z = expectation(tr.states.back(), pauli(Axis::z));
  std::cout << "sigma_z(0.1) = " << z << "\n";
  return std::abs(z) <= 1.0 ? 0 : 1;
}
