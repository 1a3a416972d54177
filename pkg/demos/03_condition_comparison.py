#!/usr/bin/env python3
"""Small-scale version of the condition comparison experiment.

Runs a few seeds of the adaptive condition against the frozen reactive
baseline (plus a constant-command robot as a floor) and prints the
per-condition medians.  The full 20-seed protocol lives in
tests/test_acceptance.py; this is the five-minute kitchen version.
"""

import importlib.resources

import numpy as np

import tipisphere as tp

FROZEN = str(importlib.resources.files("tipisphere") / "data/balanced_rea_frozen.json")
SEEDS = (0, 1, 2, 3, 4)
STEPS = 10_000  # matches the acceptance protocol; ~30 s total

logs = []
for seed in SEEDS:
    for cond in ("ada", "rea"):
        cfg = tp.SessionConfig(condition=cond, duration_steps=STEPS, seed=seed,
                               frozen_params_path=FROZEN)
        logs.append(tp.run_session(cfg, schedule="default"))

report = tp.compare(logs, tipi_window=2000)
print(report.to_table())

const_h = []
for seed in SEEDS:
    cfg = tp.SessionConfig(condition="ada", duration_steps=STEPS, seed=seed)
    log = tp.run_session(cfg, schedule="default",
                         policy_override=tp.ConstantPolicy((0.3, 0.3)))
    const_h.append(tp.occupancy_entropy(log))
print(f"\nconstant-command occupancy entropy (floor): median "
      f"{np.median(const_h):.3f} nats over {len(SEEDS)} seeds")
