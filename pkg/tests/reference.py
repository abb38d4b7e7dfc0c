"""Published polynomial interference-bound coefficients, highest power first.

Used only as a test reference; the package always refits per path-loss
exponent. The alpha = 3.8 lower row duplicates the alpha = 3 row in the
source table and is therefore not used as ground truth.
"""

PUBLISHED_COEFFS = {
    3.0: {"upper": (2.4110, -0.8962, 0.4137, 1.5024), "lower": (0.5138, 0.7843, 0.0109, 1.5217)},
    3.8: {"upper": (3.8440, -2.0756, 0.6881, 0.8581)},
    4.0: {"upper": (4.2482, -2.4301, 0.7687, 0.7469), "lower": (1.1021, 0.3650, 0.1019, 0.7784)},
}
