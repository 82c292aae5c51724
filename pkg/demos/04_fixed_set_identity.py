"""Adding one more commuting map: Fix(family) and Fix(extra) meet in Fix(extra o R).

The audit builds approximate common fixed points of the enlarged family and
checks they are fixed by extra o R, then finds fixed points of extra o R and
checks they are fixed by everything.

    python3 demos/04_fixed_set_identity.py
"""

from retractor import CertifiedMap, CommutingFamily, ConvexBody, NormedSpace, Rotation2D, certify
from retractor import build_retraction, fixed_set_identity_check
from retractor.maps import certify_commuting, identity_map

disc = ConvexBody.ball(NormedSpace(2, "l2"))
quarter = certify(CertifiedMap(Rotation2D(2, 90.0), disc, name="rot90"))
eighth = certify(CertifiedMap(Rotation2D(2, 45.0), disc, name="rot45"))
fam = CommutingFamily((quarter,))
fam = CommutingFamily(fam.maps, certify_commuting(fam))
R = build_retraction(fam, eps=1e-6)

for extra in (eighth, identity_map(disc)):
    rep = fixed_set_identity_check(fam, R, extra, samples=20, seed=0)
    print(f"extra={extra.name:8s} passed={rep['passed']}  bound={rep['bound']:.0e}"
          f"  forward gap={rep['forward']['max_gap']:.2e}"
          f"  reverse residual={rep['reverse']['max_residual']:.2e}")
