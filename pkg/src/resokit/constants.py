"""Physical constants (SI, CODATA 2018 exact where defined)."""

import math

h = 6.62607015e-34          # Planck constant, J s
hbar = h / (2.0 * math.pi)  # reduced Planck constant, J s
k_B = 1.380649e-23          # Boltzmann constant, J/K
e_charge = 1.602176634e-19  # elementary charge, C
mu_0 = 1.25663706212e-6     # vacuum permeability, H/m
eps_0 = 8.8541878128e-12    # vacuum permittivity, F/m
phi_0 = h / (2.0 * e_charge)  # superconducting flux quantum, Wb
