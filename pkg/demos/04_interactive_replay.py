#!/usr/bin/env python3
"""Demonstrate the replay guarantee for interactive sessions.

Commands submitted to a live session are stamped with the step at which
they take effect and recorded in the log.  Feeding that command timeline
back through the batch runner reproduces the trajectory byte for byte,
which is what makes interactive experiments auditable.
"""

import tempfile
from pathlib import Path

import tipisphere as tp

cfg = lambda: tp.SessionConfig(condition="ada", duration_steps=800, seed=21)

# live session: a human nudges the robot and walls off half the table
session = tp.Session(cfg(), timeline=[])
while session.t < 800:
    if session.t == 100:
        session.submit({"kind": "nudge", "x": 0.0, "y": 0.0, "jx": 0.05, "jy": 0.02})
    if session.t == 250:
        session.submit({"kind": "block_on", "x1": -0.3, "y1": 0.0, "x2": 0.3, "y2": 0.0})
    if session.t == 500:
        session.submit({"kind": "block_off", "id": 0})
    session.tick()
live_log = session.finalize()
print(f"live session: {len(live_log)} steps, {len(live_log.commands)} commands recorded")

replay_log = tp.run_session(cfg(), schedule="none", timeline=live_log.commands)

with tempfile.TemporaryDirectory() as tmp:
    p_live, p_replay = Path(tmp, "live.jsonl"), Path(tmp, "replay.jsonl")
    tp.write_jsonl(live_log, p_live)
    tp.write_jsonl(replay_log, p_replay)
    identical = p_live.read_bytes() == p_replay.read_bytes()
print(f"replay byte-identical: {identical}")
assert identical
