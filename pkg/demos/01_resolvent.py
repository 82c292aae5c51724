"""The anchored resolvent of a single nonexpansive map.

For a quarter turn Q of the unit disc, F_n x solves z = x/n + (1 - 1/n) Q z.
Its residual |Q F_n x - F_n x| shrinks like diam/n, and pushing n up turns
F_n into an approximate retraction onto Fix Q = {0}.

    python3 demos/01_resolvent.py
"""

import numpy as np

from retractor import CertifiedMap, ConvexBody, NormedSpace, Rotation2D, certify, resolve
from retractor.resolvent import single_retraction

space = NormedSpace(2, "l2")
disc = ConvexBody.ball(space)
Q = certify(CertifiedMap(Rotation2D(2, 90.0), disc, name="quarter"))
print("certificate:", Q.certificate)

x = np.array([1.0, 0.0])
print("\nF_2 x by iteration vs. the linear solve (I - Q/2) z = x/2")
r = resolve(Q, x, 2, inner_tol=1e-12)
A = np.array([[0.0, -1.0], [1.0, 0.0]])
print("  iterated:", r.point, " direct:", np.linalg.solve(np.eye(2) - 0.5 * A, 0.5 * x))
print(f"  residual {r.residual_T:.5f} (sqrt(0.4) = {np.sqrt(0.4):.5f}), bound diam/n = 1")

print("\nresidual against n")
for n in (10, 100, 1000, 10000):
    r = resolve(Q, x, n, inner_tol=1e-10)
    print(f"  n={n:6d}  |Q z - z| = {r.residual_T:.3e}   diam/n = {2 / n:.1e}"
          f"   inner iterations {r.inner.iterations_used}")

R = single_retraction(Q, 1e-3)
print(f"\nsingle-map retraction at eps=1e-3 uses n* = {R.root.n}")
print("  R(1, 0) =", R(x))
