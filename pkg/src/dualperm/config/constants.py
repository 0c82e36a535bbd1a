"""
Benchmark Constants.

This module collects the numbers that define the two transverse-flow benchmark
cells, their published reference permeabilities, and the default training
hyperparameters. Everything is dimensionless on the unit square.
"""

import math

# ----- DOMAIN AND TOW -----

# Unit square domain
DOMAIN = (0.0, 1.0, 0.0, 1.0)

# Region resolved by fibers (x_lo, x_hi, y_lo, y_hi)
BENCHMARK_TOW_BOX = (0.28, 0.72, 0.28, 0.72)

# Porous box of the mesoscale benchmark cell
BENCHMARK_POROUS_BOX = BENCHMARK_TOW_BOX

# Buffered tow that splits interior sampling and bounds the coupling region
BUFFER_BOX = (0.22, 0.78, 0.22, 0.78)

# Averaging window before the l_p inset
AVERAGING_BASE_BOX = (0.3125, 0.6875, 0.3125, 0.6875)

# Coupling points closer than this to the top or bottom edge are dropped
COUPLING_EDGE_MARGIN = 0.015

# ----- BENCHMARK FIBER LAYOUTS -----

BENCHMARK_25 = {"n_side": 5, "radius": 2.75e-2}
BENCHMARK_36 = {"n_side": 6, "radius": 2.5e-2}

# Reference K11 and half-width of the l_p band
REFERENCE_K11 = {
    25: (2.37e-4, 0.068e-4),
    36: (9.08e-5, 0.11e-5),
}

# ----- SOLVER DEFAULTS -----

BODY_FORCE = (10.0, 0.0)
PENALIZATION_PERMEABILITY = 1e-9
LINEAR_TOLERANCE = 1e-8
PERMEABILITY_STOP = 0.01
MIN_GRID_N = 16

# l_p sweep on [0, 0.045] with 10 samples
LP_RANGE = (0.0, 0.045)
LP_SAMPLES = 10

# ----- SAMPLING -----

POINTS_PER_EDGE = 200
POINTS_PER_FIBER = 200
SPLIT_25 = (15000, 45000)
SPLIT_36 = (25000, 70000)
MAX_REJECTION_ROUNDS = 200

# Material-ID cap on distinct segment tensors
MAX_SEGMENTS = 255

# ----- SURROGATE -----

# Square-packing limit
FVC_MAX = math.pi / 4.0

# Transverse-flow correlation prefactor
GEBART_C = 16.0 / (9.0 * math.pi * math.sqrt(2.0))
GEBART_EXPONENT = 2.5

MIN_DATASET_ROWS = 10

# ----- HYBRID TRAINING -----

K_MAX = 25000
K_C = 5000
COUPLING_EVERY = 250
GAMMA_U = 2.5e-4
GAMMA_P = 2.5e-4
K_INIT = 4.5e-4
K_LB = 5e-5
K_UB = 5e-4

ADAM_L0 = 1e-3
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
ADAM_DECAY_RATE = 0.9
ADAM_DECAY_EVERY = 1000

WEIGHT_SCALING_ALPHA = 0.9

# Loss term names in trace order
LOSS_TERMS = ("r", "div", "b", "u", "p")

# ----- NETWORK -----

D_E = 256
HIDDEN_WIDTHS = (128, 128, 128)
