"""
Data-driven tuning
==================

``tune_and_fit`` chooses the bandwidth, the number of knots and both
penalty levels. Every candidate it scored is kept in ``info["selection"]``.
"""

# %%
from modevcm import SelectionGrids, tune_and_fit
from modevcm.simulation import Scenario, generate

data, truth = generate(Scenario(model=1, p=10, n=500, seed=3), 0)
model = tune_and_fit(data, SelectionGrids(kn_candidates=(1, 2, 3, 4)))
print("selected labels:", model.labels)
print("true labels:    ", truth.labels)

# %%
for it in model.info["selection"]:
    print(f"iteration {it['iteration']}: h={it['h']:.3f} k={it['k']} "
          f"lambda2={it['lambda2']:.4f} varying={it['labels'].count('varying')}")

# %%
# Criterion values for the knot candidates of the last iteration.
last = model.info["selection"][-1]["records"]
for rec in (r for r in last if r["stage"] == "knots"):
    print(f"k={rec['k']}: SIC={rec['criterion']:.4f} (fit {rec['fit_term']:.4f}, edf {rec['edf']:.0f})")
