"""Population competition between the two excited states at fixed signal power."""

import numpy as np

from qcnsim.experiments.scenarios import default_config, run

res = run(default_config("fig3"))
table = res.table("fig3")
beta2 = table.column("beta2_over_kappa")
s22, s33 = table.column("sigma22_numeric"), table.column("sigma33_numeric")

print(f"|alpha|^2/kappa fixed at {res.report['alpha2_over_kappa']:g}")
for b, p2, p3 in zip(beta2, s22, s33):
    bar = "#" * int(round(60 * p2)) + "." * int(round(60 * p3))
    print(f"{b:9.2g}  s22={p2:.4f}  s33={p3:.4f}  {bar}")

k = int(np.argmin(np.abs(s22 - s33)))
print(f"\npopulations cross at |beta|^2/kappa = {beta2[k]:g}")
