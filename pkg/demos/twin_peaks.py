"""Plot the stationary wealth distribution and its two modes.

The low mode collects households stuck under the threshold, the high mode
collects those who paid the cost and switched. Writes twin_peaks.png.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from wealthtrap import Calibration, bimodality, solve_hjb, solve_kfe

cal = Calibration()
sol = solve_hjb(cal)
den = solve_kfe(sol, cal)
k = sol.grid.nodes

g_total = den.g_L + den.g_W + den.g_H
peaks = bimodality(g_total, sol.grid)

fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(8, 7), sharex=True)

ax0.plot(k, g_total, "k-", lw=1.8, label="total")
for kp, _ in peaks:
    ax0.axvline(kp, color="gray", ls=":", lw=0.8)
    ax0.annotate(f"{kp:.2f}", (kp, g_total.max() * 0.95), ha="center", fontsize=9)
ax0.axvline(sol.signal.kstar, color="crimson", ls="--", lw=1.0,
            label=f"k* = {sol.signal.kstar:.2f}")
ax0.set_ylabel("density")
ax0.legend(frameon=False)
ax0.set_title("stationary wealth distribution")

ax1.plot(k, den.g_L, label="L (no opportunity)")
ax1.plot(k, den.g_W, label="W (waiting)")
ax1.plot(k, den.g_H, label="H (switched)")
ax1.axvline(cal.phi, color="gray", ls=":", lw=0.8)
ax1.annotate("phi", (cal.phi, ax1.get_ylim()[1] * 0.9), fontsize=9)
ax1.set_xlabel("wealth k")
ax1.set_ylabel("density")
ax1.legend(frameon=False)

fig.tight_layout()
fig.savefig("twin_peaks.png", dpi=130)
print(f"peaks at {[round(kp, 3) for kp, _ in peaks]}; wrote twin_peaks.png")
