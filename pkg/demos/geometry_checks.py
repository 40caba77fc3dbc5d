# %% [markdown]
# # Jacobians, Vandermondes and iterated integrals
#
# On a certified cell the Jacobian of the sum map is comparable to
# 2^{-k_d} times the Vandermonde of the tuple. The iterated-integral identity
# makes that exact, and we check both numerically.

# %%
from affine_decomp import (check_geometric_inequality, check_jacobian_identity,
                           certify_injectivity, initial_decomposition, jacobian,
                           moment_curve, polynomial_curve, vandermonde)

m2 = moment_curve(2)
print(jacobian(m2, (0.2, 0.7)), vandermonde((0.2, 0.7)))

# %% [markdown]
# For (t, t^3) the ratio is no longer constant, but it stays within 2^{±6}.

# %%
cubic = polynomial_curve([[0, 1], [0, 0, 0, 1]], (0, 1), N=4, cnorm=6)
for cell in initial_decomposition(cubic, 4).cells:
    geo = check_geometric_inequality(cubic, cell, samples=5000)
    res = check_jacobian_identity(cubic, cell, samples=50)
    print(cell.interval, round(geo.inf_ratio, 3), round(geo.sup_ratio, 3),
          max(r.rel_err for r in res))

# %% [markdown]
# A single-signed Jacobian on the ordered simplex rules out collisions of the
# sum map; the grid search confirms it.

# %%
cell = initial_decomposition(m2, -2).cells[0]
print(certify_injectivity(m2, cell, grid_density=50).to_dict())
