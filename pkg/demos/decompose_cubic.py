# %% [markdown]
# # Dyadic cells for (t, t^3)
#
# The torsion of (t, t^3) on [0, 1] is 6t, so the curve degenerates at the
# origin. At scale k the torsion sits in [2^{-k-1}, 2^{-k}) on a single interval
# near 0, and the decomposition has to resolve both minors there.

# %%
import numpy as np

from affine_decomp import full_decomposition, polynomial_curve, torsion
from affine_decomp.decomposition import summarize

curve = polynomial_curve([[0, 1], [0, 0, 0, 1]], (0, 1), N=4, cnorm=6)
print(torsion(curve, np.array([0.0, 0.5, 1.0])))

# %% [markdown]
# Each scale goes through three stages: the level-set cover, shrinking to
# the length cap, and the secondary pass that checks comparability for the
# offspring curves.

# %%
reports = full_decomposition(curve, (0, 6), threads=1)
for row in summarize(reports):
    print(row["k_d"], row["N_k"], round(row["total_length"], 5), row["within_bounds"])

# %%
for cell in reports[3].cells[:5]:
    print(cell.interval, cell.sigma, cell.k, cell.verified)

# %% [markdown]
# The counts stay tiny next to the bound, which only has to grow like
# 2^{k(1/3 + 1/2)}.

# %%
r = reports[-1]
print(r.count, r.count_bound, r.total_length, r.length_bound)
