"""How the exercise threshold and the regime mix respond to the signal cost.

Sweeps phi in-process (the CLI `wealthtrap sweep` does the same thing with
artifacts on disk). Writes threshold_sweep.png.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from wealthtrap import Calibration, solve_hjb, solve_kfe

phis = np.arange(5.0, 14.0)
kstars, shares = [], []
for phi in phis:
    cal = Calibration(phi=float(phi))
    sol = solve_hjb(cal)
    den = solve_kfe(sol, cal)
    dk = sol.grid.dk
    kstars.append(sol.signal.kstar)
    shares.append((den.g_L.sum() * dk, den.g_W.sum() * dk, den.g_H.sum() * dk))
    print(f"phi = {phi:5.1f}   k* = {sol.signal.kstar:8.4f}   "
          f"pi = ({shares[-1][0]:.3f}, {shares[-1][1]:.3f}, {shares[-1][2]:.3f})")

shares = np.array(shares)

fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(10, 4))

ax0.plot(phis, kstars, "o-")
ax0.plot(phis, phis, "k:", lw=0.8, label="k = phi")
ax0.set_xlabel("signal cost phi")
ax0.set_ylabel("threshold k*")
ax0.set_title("exercise threshold")
ax0.legend(frameon=False)

ax1.stackplot(phis, shares.T, labels=["L", "W", "H"], alpha=0.8)
ax1.set_xlabel("signal cost phi")
ax1.set_ylabel("stationary share")
ax1.set_title("regime mix")
ax1.legend(frameon=False, loc="upper right")

fig.tight_layout()
fig.savefig("threshold_sweep.png", dpi=130)
print("wrote threshold_sweep.png")
