"""Entropy convexity along constructed geodesics: an interval passes, a heavy-center star fails."""
import math

import numpy as np

from cdspace import DistortionParams, check_cd, path_space, star_space

sp = path_space(17)
x = np.linspace(0, 1, 17)
left = sp.uniform_on(np.flatnonzero(x <= 0.25))
right = sp.uniform_on(np.flatnonzero(x >= 0.5))

rep = check_cd([(left, right)], DistortionParams(0, math.inf), depth=3)
print(f"interval CD(0,inf): worst margin {rep.worst_margin:.4f}, sharpest K {rep.sharpest_K:.3f}")
rep2 = check_cd([(left, right)], DistortionParams(0, 2), depth=3)
print(f"interval CD(0,2):   worst margin {rep2.worst_margin:.4f}")

star = star_space()
i = star.index
bad = check_cd([(star.dirac(i("c")), star.dirac(i("a2")))], DistortionParams(0, math.inf), depth=2)
print(f"star CD(0,inf):     worst margin {bad.worst_margin:.4f}, certified {bad.certified}")
