# One MP-ROGD run on the linear setting, followed by an audit.
#
# Run with:  python3 demos/01_single_run.py

import numpy as np

from safeoco.algo import MP_ROGD, run
from safeoco.audit import audit_run
from safeoco.problem import make_instance

inst = make_instance("linear", seed=0, dim=2)
print("constraint at the origin:", inst.constraint.value(np.zeros(2)))

# %% run and inspect
result = run(MP_ROGD, inst, T=2000)
p = result.params
print(f"eta={p.eta:.4g}  delta={p.delta:.4g}  alpha={p.alpha:.4g}")
print(f"regret={result.regret:.4f}  average={result.avg_regret:.5f}")
print(f"largest constraint value played: {result.max_g_value:.3e}")
print(f"smallest step fraction gamma:    {result.min_gamma:.4f}")

# %% audit
summary = audit_run(result, inst)
for name, rep in summary.reports.items():
    tag = "info" if rep.informational else rep.status
    print(f"  {name:14s} {tag:5s} worst={rep.worst:.3e} bound={rep.bound:.3e}")
print("audit passed:", summary.passed)
