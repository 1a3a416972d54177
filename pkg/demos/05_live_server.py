#!/usr/bin/env python3
"""Launch a live session and poke it over the wire, no browser needed.

Starts the WebSocket server in this process, connects a headless client,
nudges the robot, and watches the state stream react.  The browser UI in
frontend/ speaks exactly this schema; run `tipisphere serve` and open the
frontend to drive the robot by hand.
"""

import json

from fastapi.testclient import TestClient

import tipisphere as tp
from tipisphere.service import create_app

cfg = tp.SessionConfig(condition="ada", duration_steps=100_000, seed=3)
app = create_app(cfg)

with TestClient(app) as client:
    print("health:", client.get("/health").text)
    with client.websocket_connect("/ws") as ws:
        msg = ws.receive_json()
        print("first state:", json.dumps(msg))
        print("sending a nudge of 0.1 N*s to starboard...")
        ws.send_json({"type": "nudge", "x": 0.0, "y": 0.0, "jx": 0.0, "jy": -0.1})
        for _ in range(6):
            msg = ws.receive_json()
            if msg["type"] != "state":
                continue
            print(f"  t={msg['t']:4d} pos=({msg['x']:+.3f},{msg['y']:+.3f}) "
                  f"v=({msg['vx']:+.2f},{msg['vy']:+.2f}) tipi={msg['tipi']:+.3f}")

print("\nfor the full experience:  tipisphere serve --port 8765")
print("then serve frontend/ (npm run dev) and drag the robot around.")
