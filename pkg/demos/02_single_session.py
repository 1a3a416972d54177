#!/usr/bin/env python3
"""Run one adaptive session and look at what the robot did.

The controller starts as a gentle wheel-to-servo feedback and climbs its
time-local predictive information online while scripted nudges poke it
every ten simulated seconds.  The end of the script draws the visit
histogram as ASCII so you can see the table coverage at a glance.
"""

import numpy as np

import tipisphere as tp

cfg = tp.SessionConfig(condition="ada", duration_steps=6000, seed=1)
log = tp.run_session(cfg, schedule="default")

series = tp.running_tipi(log, window=2000)
print(f"condition        : {log.condition}")
print(f"steps            : {len(log)} ({len(log) * cfg.plant.dt / 60:.1f} min of sim time)")
print(f"nudges applied   : {sum(1 for c in log.commands if c['kind'] == 'nudge')}")
print(f"mean running TiPI: {np.nanmean(series):+.3f} nats (window 2000)")
print(f"occupancy entropy: {tp.occupancy_entropy(log, grid=20):.3f} nats (20x20 grid)")
print(f"rms prediction err: {tp.rms_xi(log):.3f}")

# visit histogram over the table, darkest = most visited
G = 24
r = cfg.plant.table.radius
edges = np.linspace(-r, r, G + 1)
hist, _, _ = np.histogram2d(log.x, log.y, bins=(edges, edges))
shades = " .:-=+*#%@"
print("\nvisit map (table seen from above):")
for row in range(G - 1, -1, -1):
    line = ""
    for col in range(G):
        cx, cy = (edges[col] + edges[col + 1]) / 2, (edges[row] + edges[row + 1]) / 2
        if cx * cx + cy * cy > r * r:
            line += "  "
        else:
            level = hist[col, row]
            idx = 0 if level == 0 else min(1 + int(np.log1p(level)), len(shades) - 1)
            line += shades[idx] * 2
    print(" " + line)
