"""Quick check of the Python bindings. Build first with
`pip install --no-build-isolation -e crates/py`."""

import json
import math

import adiabat

x = [1 / math.sqrt(2), 1 / math.sqrt(2)]
y = [1 / math.sqrt(2), 1j / math.sqrt(2)]

assert abs(adiabat.fidelity(x, x) - 1.0) < 1e-12
assert abs(adiabat.fidelity(x, y) - 0.5) < 1e-12
px, py, pz = adiabat.bloch_projections(x)
assert abs(px - 1.0) < 1e-12 and abs(pz - 0.5) < 1e-12

pts = adiabat.jumping_points(5)
assert len(pts) == 5 and abs(pts[0] - 0.1) < 1e-12

path = adiabat.Path.xy_geodesic(2 * math.pi)
omega0 = adiabat.two_pi_mhz(5.0)
tl = adiabat.Timeline.jumping(path, omega0, 5).compensated()
for psi in (x, y):
    rows = tl.evolve(psi, 51)
    final = rows[-1]
    assert abs(adiabat.fidelity(tl.target(psi), psi)) <= 1.0 + 1e-12
    print(f"jumping N=5 final fid_eig={final[5]:.6f}")

u = tl.propagate()
assert len(u) == 2

report = json.loads(tl.decompose())
print("epsilon_max", report["epsilon_max"])

names = adiabat.list_scenarios()
assert "fig4b" in names
summary = json.loads(adiabat.run_scenario("fig4b"))
for s in summary["states"]:
    print(s["label"], s["final_fidelity"])
    assert s["final_fidelity"] > 0.999

try:
    adiabat.run_scenario("no-such-scenario")
except ValueError as e:
    assert "fig4b" in str(e)
else:
    raise AssertionError("expected ValueError")

print("smoke test ok")
