# %% [markdown]
# # The cone feasibility solver on its own
#
# Each constraint reads ||A x + b|| <= c.x + d.  The solver maximizes the
# common slack t; the problem is feasible when the best t is nonnegative.

# %%
import numpy as np

from twrelay.socp import SocConstraint, SocpProblem, lift_complex, solve_margin

disk = SocConstraint(np.eye(2), np.zeros(2), np.zeros(2), 1.0)
print(solve_margin(SocpProblem(2, [disk])))

# %% [markdown]
# Two unit disks centred at (+-3, 0) do not meet; the best common slack is
# -2, reached on the segment between them.

# %%
left = SocConstraint(np.eye(2), [3.0, 0.0], np.zeros(2), 1.0)
right = SocConstraint(np.eye(2), [-3.0, 0.0], np.zeros(2), 1.0)
out = solve_margin(SocpProblem(2, [left, right]))
print(out.status, round(out.margin, 6))

# %% [markdown]
# Complex constraints are solved in real form: x stacks the real and
# imaginary parts of the complex unknown.

# %%
rng = np.random.default_rng(0)
a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
con = lift_complex(a, [0.0, 0.0], [1.0, 0.0], 0.5)
out = solve_margin(SocpProblem(4, [con]), radius=10.0)
v = out.point[:2] + 1j * out.point[2:]
print(out.status, "slack at the returned point:", con.slack(out.point))
print("complex check:", (v[0]).real + 0.5 - np.linalg.norm(a @ v))
