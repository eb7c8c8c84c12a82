import numpy as np

EXAMPLE = [[0.7, 0.15], [0.15, 0.0]]


def random_symmetric_below_threshold(d, rng, alpha=None):
    """Random distribution with the two-basis symmetry and disturbance below (d-1)/(2d)."""
    from quditkd.isotropic import d_th
    from quditkd.pauli_channel import disturbance, make_distribution, symmetrize

    while True:
        a = alpha if alpha is not None else rng.choice([0.05, 0.3, 1.0, 4.0])
        s = symmetrize(make_distribution(d, rng.dirichlet(np.full(d * d, a)).reshape(d, d)))
        ds = disturbance(s)
        if ds == 0.0:
            continue
        target = rng.uniform(0.0, d_th(d))
        t = min(1.0, target / ds)
        p = t * s.p
        p[0, 0] += 1.0 - t
        dist = make_distribution(d, p, require_symmetry=True)
        if disturbance(dist) < d_th(d):
            return dist


ACCEPTANCE_LINES = []


def record_criterion(number, title, passed, detail):
    line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed
