"""Independent reference implementations used as test oracles.

These deliberately avoid the package's own code paths (and numpy's
eigensolver) so each check is a genuine second route to the answer.
"""

from __future__ import annotations

import math


def inline_flags(width, depth, length, hatch, layer):
    """Direct evaluation of the three defect rules; None operands allowed."""
    keyhole = not (width / depth > 1.5)
    lof = None
    if hatch is not None and layer is not None:
        lof = (hatch / width) ** 2 + (layer / depth) ** 2 > 1.0
    balling = None
    if length is not None:
        balling = length / width >= math.pi
    return keyhole, lof, balling


def jacobi_eigendecomposition(matrix, sweeps=100, tol=1e-14):
    """Cyclic Jacobi rotations on a symmetric matrix (pure python).

    Returns (eigenvalues, eigenvectors) sorted by descending eigenvalue,
    eigenvectors as rows.
    """
    n = len(matrix)
    a = [list(map(float, row)) for row in matrix]
    v = [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]
    for _ in range(sweeps):
        off = math.sqrt(sum(a[i][j] ** 2 for i in range(n) for j in range(n) if i != j))
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p][q]) < 1e-300:
                    continue
                theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q])
                sign = 1.0 if theta >= 0 else -1.0
                t = sign / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp, akq = a[k][p], a[k][q]
                    a[k][p] = c * akp - s * akq
                    a[k][q] = s * akp + c * akq
                for k in range(n):
                    apk, aqk = a[p][k], a[q][k]
                    a[p][k] = c * apk - s * aqk
                    a[q][k] = s * apk + c * aqk
                for k in range(n):
                    vkp, vkq = v[k][p], v[k][q]
                    v[k][p] = c * vkp - s * vkq
                    v[k][q] = s * vkp + c * vkq
    order = sorted(range(n), key=lambda i: -a[i][i])
    values = [a[i][i] for i in order]
    vectors = [[v[r][i] for r in range(n)] for i in order]
    return values, vectors


def standardized_covariance(rows):
    """Population-convention covariance of z-scored columns, by hand."""
    n = len(rows)
    d = len(rows[0])
    means = [sum(row[j] for row in rows) / n for j in range(d)]
    sigmas = []
    for j in range(d):
        variance = sum((row[j] - means[j]) ** 2 for row in rows) / n
        sigma = math.sqrt(variance)
        sigmas.append(sigma if sigma >= 1e-12 else 1.0)
    z = [[(row[j] - means[j]) / sigmas[j] for j in range(d)] for row in rows]
    cov = [[0.0] * d for _ in range(d)]
    for i in range(d):
        for j in range(d):
            cov[i][j] = sum(z[r][i] * z[r][j] for r in range(n)) / n
    return cov


def fix_sign(vector):
    """Largest-magnitude coordinate made positive, matching the projection."""
    pivot = max(range(len(vector)), key=lambda i: abs(vector[i]))
    if vector[pivot] < 0:
        return [-x for x in vector]
    return list(vector)
