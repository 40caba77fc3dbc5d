# %% [markdown]
# # Knapp examples and the scaling line
#
# Gaussians adapted to a delta-arc of the parabola saturate the estimate
# exactly on q = 2p'/(d^2 + d). Push q above that and the ratio grows like a
# power of 1/delta.

# %%
from affine_decomp import ExponentPair, RegionSpec, admissible_q, knapp_scan, moment_curve
from affine_decomp import min_epsilon_for_full_range

curve = moment_curve(2, domain=(-1, 1))
p = 1.25
q_line = ExponentPair(p, 1, 2).scaling_q
deltas = [2.0**-j for j in range(2, 7)]
for q in (q_line, 1.2 * q_line):
    scan = knapp_scan(curve, p, q, deltas, t0=0.0)
    print(round(q, 4), round(scan.slope, 4), scan.classification)

# %% [markdown]
# Without damping the guaranteed range for a C^4 planar curve is smaller:
# q <= (2/21) p'. Damping by epsilon >= 13/24 recovers every p in the Drury range.

# %%
print(admissible_q(RegionSpec(2, 4, 0), p))
print(min_epsilon_for_full_range(2, 4))
