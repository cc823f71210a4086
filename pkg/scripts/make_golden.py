"""Write the spectrum golden for the shipped cylindrical example from the closed form.

For a single term alpha/|x_J|^2 the sector (l1, l2, n) contributes
gamma = t(l1) + l2 + 2n with t(l) = -(k-2)/2 + sqrt(((k-2)/2 + l)^2 - alpha),
mu = gamma (gamma + N - 2), repeated dim H_l1(R^k) * dim H_l2(R^{N-k}) times.
"""
import json
import math
import sys
from pathlib import Path

from collision_asymptotics.potential import AngularCoefficient


def harmonic_dim(d, l):
    if d == 1:
        return 1 if l <= 1 else 0
    return math.comb(l + d - 1, d - 1) - (math.comb(l + d - 3, d - 1) if l >= 2 else 0)


def closed_form_spectrum(N, k, alpha, count, top=8):
    vals = []
    for l1 in range(top):
        t = -(k - 2) / 2 + math.sqrt(((k - 2) / 2 + l1) ** 2 - alpha)
        for l2 in range(top):
            for n in range(top):
                g = t + l2 + 2 * n
                vals += [g * (g + N - 2)] * (harmonic_dim(k, l1) * harmonic_dim(N - k, l2))
    return sorted(vals)[:count]


def main(out_dir):
    N, k, alpha = 5, 3, 3 / 16
    c = AngularCoefficient.cylindrical(N, k, alpha)
    ev = closed_form_spectrum(N, k, alpha, 12)
    path = Path(out_dir) / f"spectrum_{c.digest()}.json"
    path.write_text(json.dumps({"potential": c.to_dict(), "eigenvalues": ev, "source": "closed form"},
                               indent=2) + "\n")
    print(path)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "src/collision_asymptotics/data/golden")
