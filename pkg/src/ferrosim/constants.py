"""Physical constants (SI, CODATA 2018)."""

EPS0 = 8.8541878128e-12    # vacuum permittivity (F/m)
Q_E = 1.602176634e-19      # elementary charge (C)
K_B = 1.380649e-23         # Boltzmann constant (J/K)
HBAR = 1.054571817e-34     # reduced Planck constant (J*s)
M_E = 9.1093837015e-31     # electron rest mass (kg)
