"""Walk the HTTP labeling service through a short analyst session.

The service wraps the feedback loop in a session API: one pending query
at a time, labels accepted only for that instance, state persisted after
every answer. This demo drives the exact HTTP surface in-process; the
same app serves over the network via `ifaad serve`.

Run: python demos/04_labeling_service.py
"""

import tempfile

from fastapi.testclient import TestClient

from ifaad.service import create_app

workdir = tempfile.mkdtemp(prefix="ifaad-demo-")
app = create_app(data_dir=f"{workdir}/datasets", session_dir=f"{workdir}/sessions")
client = TestClient(app)

print("-> GET /healthz")
print("  ", client.get("/healthz").json())

print('\n-> POST /sessions  (built-in "synthetic" dataset, budget 8)')
session = client.post(
    "/sessions",
    json={"dataset_id": "synthetic", "budget": 8, "num_trees": 50, "subsample_size": 128},
).json()
sid = session["session_id"]
print(f"   session {sid}, status={session['status']}, budget={session['budget']}")

print("\n-> labeling loop: GET next, decide, POST label")
while True:
    resp = client.get(f"/sessions/{sid}/next")
    if resp.status_code == 409:
        print(f"   next -> {resp.json()['code']}: {resp.json()['message']}")
        break
    pending = resp.json()
    feats = ", ".join(f"{k}={v:.2f}" for k, v in pending["features"].items())
    # play the analyst: the synthetic set's clumps sit far from the origin
    verdict = "anomaly" if abs(pending["features"]["x0"]) + abs(pending["features"]["x1"]) > 8 else "nominal"
    result = client.post(
        f"/sessions/{sid}/label",
        json={"instance_id": pending["instance_id"], "label": verdict},
    ).json()
    print(
        f"   iter {result['iteration']}: instance {pending['instance_id']} ({feats}) "
        f"score={pending['score']:.3f} -> {verdict}, found so far {result['anomalies_found']}"
    )

print("\n-> a stale submission is rejected without touching state")
stale = client.post(f"/sessions/{sid}/label", json={"instance_id": 0, "label": "anomaly"})
print(f"   status {stale.status_code}: {stale.json()}")

print("\n-> GET /sessions/{id}/state")
state = client.get(f"/sessions/{sid}/state").json()
print(f"   iteration {state['iteration']}/{state['budget']}, status {state['status']}")
print(f"   curve: {[p['cumulative'] for p in state['curve']]}")
print(f"   weight norm: {state['weight_norm']:.9f}")
print(f"\nsession file persisted under {workdir}/sessions/ (restart-safe)")
