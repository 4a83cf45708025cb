"""Distance-generating functions for mirror/Bregman proximal steps.

Each Dgf is a superlinear convex function eta on R (or R_+) applied
pointwise; the induced Bregman divergence between densities f, g on a
grid with weights w is

    D(f, g) = sum_j w_j * (eta(f_j) - eta(g_j) - eta'(g_j) (f_j - g_j)).

Three families are provided:

  power(p):    eta(s) = |s|^p / (p (p-1)),  1 < p <= 2, signed domain
  entropy:     eta(s) = s log s - s + 1,    nonnegative domain
  hyperbolic:  eta(s) = s asinh(s/beta) - sqrt(s^2 + beta^2) + beta,
               beta > 0, signed domain ("signed entropy")

Every family is (p, beta)-strongly convex relative to the L1 norm on
bounded sets: D(f, g) >= c(K) * ||f - g||_L1^2 with
c(K) = (K + beta)^(p-2) / 2 whenever ||f||_L1, ||g||_L1 <= K
(entropy additionally needs f, g >= 0, which its domain enforces).
"""

import math

import numpy as np

DEFAULT_BETA = 1e-3


class Dgf:
    """Base distance-generating function.

    Subclasses set `name`, `domain` ("signed" or "nonnegative") and the
    relative-strong-convexity parameters `p` (exponent) and `beta`
    (offset), and implement eta, eta_prime, eta_prime_inv, eta_second
    as numpy ufunc-style maps.
    """

    name = None
    domain = None
    p = None
    beta = None

    def eta(self, s):
        raise NotImplementedError

    def eta_prime(self, s):
        raise NotImplementedError

    def eta_prime_inv(self, u):
        """Inverse of eta_prime (the mirror map back to densities)."""
        raise NotImplementedError

    def eta_second(self, s):
        raise NotImplementedError

    def divergence_values(self, weights, f, g):
        """Bregman divergence between raw value arrays on shared weights."""
        f = np.asarray(f, dtype=float)
        g = np.asarray(g, dtype=float)
        terms = self.eta(f) - self.eta(g) - self.eta_prime(g) * (f - g)
        return float(np.sum(weights * terms))

    def __repr__(self):
        return f"{type(self).__name__}({self.name})"


class PowerDgf(Dgf):
    """Power family eta(s) = |s|^p / (p (p-1)) on the signed domain.

    Parameters
    ----------
    p : float
        Exponent in (1, 2]. p = 2 gives the Euclidean half-square
        (eta_prime is the identity); p < 2 strengthens curvature near 0.
    """

    domain = "signed"
    beta = 0.0

    def __init__(self, p):
        if not 1.0 < p <= 2.0:
            raise ValueError(f"power exponent must lie in (1, 2], got {p}")
        self.p = float(p)
        self.name = f"p:{p:g}"

    def eta(self, s):
        s = np.asarray(s, dtype=float)
        return np.abs(s) ** self.p / (self.p * (self.p - 1.0))

    def eta_prime(self, s):
        s = np.asarray(s, dtype=float)
        return np.sign(s) * np.abs(s) ** (self.p - 1.0) / (self.p - 1.0)

    def eta_prime_inv(self, u):
        u = np.asarray(u, dtype=float)
        return np.sign(u) * ((self.p - 1.0) * np.abs(u)) ** (1.0 / (self.p - 1.0))

    def eta_second(self, s):
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore"):
            return np.abs(s) ** (self.p - 2.0)


class EntropyDgf(Dgf):
    """Shannon entropy eta(s) = s log s - s + 1 on the nonnegative domain."""

    name = "ent"
    domain = "nonnegative"
    p = 1.0
    beta = 0.0

    def eta(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < 0):
            raise ValueError("entropy dgf is only defined for s >= 0")
        with np.errstate(divide="ignore", invalid="ignore"):
            slogs = np.where(s > 0, s * np.log(s), 0.0)
        return slogs - s + 1.0

    def eta_prime(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < 0):
            raise ValueError("entropy dgf is only defined for s >= 0")
        with np.errstate(divide="ignore"):
            return np.log(s)  # -inf at s = 0 is the correct limit

    def eta_prime_inv(self, u):
        return np.exp(np.asarray(u, dtype=float))

    def eta_second(self, s):
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore"):
            return 1.0 / s

    def divergence_values(self, weights, f, g):
        # f log(f/g) - f + g with 0 log 0 = 0; infinite when f > 0, g = 0.
        f = np.asarray(f, dtype=float)
        g = np.asarray(g, dtype=float)
        if np.any(f < 0) or np.any(g < 0):
            raise ValueError("entropy divergence needs nonnegative densities")
        if np.any((f > 0) & (g == 0)):
            return math.inf
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(f > 0, f * (np.log(f) - np.log(g)), 0.0)
        return float(np.sum(weights * (ratio - f + g)))


class HyperbolicDgf(Dgf):
    """Hyperbolic entropy on the signed domain.

    eta(s) = s asinh(s/beta) - sqrt(s^2 + beta^2) + beta behaves like
    |s| log(|s|/beta) for |s| >> beta and like s^2 / (2 beta) near 0,
    so it plays the role of an entropy for signed densities. Smaller
    beta means a closer match to entropy and a harder-curved origin.
    """

    domain = "signed"
    p = 1.0

    def __init__(self, beta=DEFAULT_BETA):
        if beta <= 0:
            raise ValueError(f"hyperbolic offset beta must be positive, got {beta}")
        self.beta = float(beta)
        self.name = f"hyp:{beta:g}"

    def eta(self, s):
        s = np.asarray(s, dtype=float)
        b = self.beta
        return s * np.arcsinh(s / b) - np.sqrt(s**2 + b**2) + b

    def eta_prime(self, s):
        return np.arcsinh(np.asarray(s, dtype=float) / self.beta)

    def eta_prime_inv(self, u):
        return self.beta * np.sinh(np.asarray(u, dtype=float))

    def eta_second(self, s):
        s = np.asarray(s, dtype=float)
        return 1.0 / np.sqrt(s**2 + self.beta**2)


def bregman_div(dgf, f, g):
    """Bregman divergence D(f, g) between two densities on one grid."""
    gf, gg = f.grid, g.grid
    if (gf.kind, gf.dim, gf.size) != (gg.kind, gg.dim, gg.size):
        raise ValueError("densities live on different grids")
    return dgf.divergence_values(gf.weights, f.values, g.values)


def sc_constant(dgf, k_bound):
    """Relative strong convexity constant c(K) = (K + beta)^(p-2) / 2.

    Valid for densities whose L1 norms stay within `k_bound` (and, for
    entropy, are nonnegative).
    """
    if k_bound <= 0:
        raise ValueError(f"norm bound must be positive, got {k_bound}")
    return 0.5 * (k_bound + dgf.beta) ** (dgf.p - 2.0)


def step_size(dgf, k_bound, phi_sup, lip_grad):
    """Largest admissible step for the proximal gradient methods.

    s = (K + beta)^(p-2) / (phi_sup^2 * lip_grad), where phi_sup bounds
    the feature norm sup_theta ||Phi(theta)|| and lip_grad is the
    Lipschitz constant of grad R. Returns inf for linear objectives
    (lip_grad = 0): any step is admissible there.
    """
    if k_bound <= 0:
        raise ValueError(f"norm bound must be positive, got {k_bound}")
    if phi_sup <= 0:
        raise ValueError(f"feature sup-norm must be positive, got {phi_sup}")
    if lip_grad < 0:
        raise ValueError(f"Lipschitz constant must be nonnegative, got {lip_grad}")
    if lip_grad == 0:
        return math.inf
    return (k_bound + dgf.beta) ** (dgf.p - 2.0) / (phi_sup**2 * lip_grad)


def parse_dgf(token):
    """Parse a dgf token: "p:<exponent>", "ent", "hyp" or "hyp:<beta>"."""
    token = token.strip()
    if token == "ent":
        return EntropyDgf()
    if token == "hyp":
        return HyperbolicDgf()
    head, sep, tail = token.partition(":")
    if head == "p" and sep:
        try:
            return PowerDgf(float(tail))
        except ValueError as exc:
            raise ValueError(f"bad dgf token {token!r}: {exc}") from None
    if head == "hyp" and sep:
        try:
            return HyperbolicDgf(float(tail))
        except ValueError as exc:
            raise ValueError(f"bad dgf token {token!r}: {exc}") from None
    raise ValueError(
        f"bad dgf token {token!r}; expected 'p:<exponent>', 'ent' or 'hyp:<beta>'"
    )
