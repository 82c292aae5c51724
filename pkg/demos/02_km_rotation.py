"""Averaged (Krasnoselskii-Mann) iteration and asymptotic regularity.

z <- (z + Q z)/2 for a quarter turn Q contracts at rate |(I + Q)/2| = sqrt(2)/2,
and the step norms decrease monotonically.  The truncated square map, which
is not nonexpansive, is run the same way as a negative control.

    python3 demos/02_km_rotation.py
"""

import numpy as np

from retractor import (CertifiedMap, ConvexBody, NormedSpace, Rotation2D,
                       asymptotic_regularity_check, certify, km_iterate, square_map_example)
from retractor.errors import NonexpansiveRejected

disc = ConvexBody.ball(NormedSpace(2, "l2"))
Q = certify(CertifiedMap(Rotation2D(2, 90.0), disc, name="quarter"))
z, tr = km_iterate(Q, np.array([0.8, 0.3]), gamma=0.5, step_tol=1e-12)
s = np.array(tr.step_norms)
print(f"stopped after {tr.iterations} steps ({tr.stop_reason}), |z| = {np.linalg.norm(z):.2e}")
print("step ratios (first five):", np.round(s[1:6] / s[:5], 6), " sqrt(2)/2 =", round(np.sqrt(0.5), 6))
rep = asymptotic_regularity_check(tr)
print("regularity:", "pass" if rep.passed else "FAIL", "| tail:", [f"{v:.1e}" for v in rep.tail[-4:]])

print("\nnegative control: the truncated square map on the unit l1 ball")
sq = square_map_example(3)
try:
    certify(sq)
except NonexpansiveRejected as exc:
    print("  certification refused:", exc)
_, tr = km_iterate(sq, np.array([-0.9, 0.05, 0.05]), step_tol=1e-12, max_iter=10_000)
rep = asymptotic_regularity_check(tr)
print(f"  run anyway: {tr.iterations} steps, monotone={rep.monotone}, "
      f"first violation={rep.first_violation}")
