"""Numeric tolerances and enumeration caps shared by all modules."""

TAU_TIE = 1e-9  # absolute band for argmax sets on Bellman values
TAU_STOCH = 1e-10  # row sums, entry bounds, structural-zero threshold
TAU_LIN = 1e-10  # matrix identity checks
PIVOT_TOL = 1e-12  # smallest admissible |pivot| in LU solves

DECISION_CAP = 4096  # max N**M decisions enumerated by build_decision_model
PRODUCT_CAP = 100_000  # max |D|**J products enumerated for gamma_J
