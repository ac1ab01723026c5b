"""
Boston housing
==============

Median home value (MEDV) against 12 covariates whose effects may vary with
the share of lower-status population (LSTAT, mapped to [0, 1]). The CSV used
here is the copy stored with the tests; any file with the same columns works.
"""

# %%
from pathlib import Path

from modevcm import tune_and_fit
from modevcm.io import load_csv, model_report, standardize

csv = Path(__file__).resolve().parents[1] / "tests" / "data" / "boston.csv"
data = standardize(load_csv(csv), response="MEDV", index="LSTAT")
print(data.n, "rows,", data.p, "covariates")

# %%
fits = {"VCEM": tune_and_fit(data),
        "BSE_L2": tune_and_fit(data, loss="ls", norm="l2")}
for name, m in fits.items():
    rep = model_report(m, data, name)
    print(f"\n{name}: MSE={rep['mse']:.3f}")
    for v in rep["variables"][1:]:
        extra = f" {v['constant']:.3f}" if v["label"] == "constant" else ""
        print(f"  {v['variable']:<8} {v['label']}{extra}")

# %%
# From the shell:
#   modevcm fit --csv boston.csv --response MEDV --index LSTAT --out vcem.jsonl
#   modevcm fit --csv boston.csv --response MEDV --index LSTAT --method BSE_L2 --out l2.jsonl
#   modevcm report vcem.jsonl l2.jsonl
