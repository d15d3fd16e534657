"""Vectorized dual-decomposition kernels shared by the solvers.

Everything here works on SNR-normalized quantities.  For RRH m and
subcarrier n let X = |h|^2 p / sigma^2 (received SNR) and w the relative
quantization noise (q = w (|h|^2 p + sigma^2)).  The per-RRH post-MRC SNR
contribution is::

    phi = X / (1 + w (X + 1))

In terms of psi (psi = 2^c - 1 for the Gaussian test channel, psi = 2^c for the
uniform quantizer, c = N t / B) this is ``X psi / (psi + k (X + 1))`` with
k = 1 and k = 3 respectively, which is concave in psi.
"""

from __future__ import annotations

import numpy as np
from scipy import optimize

LN2 = np.log(2.0)

# Smallest psi (2^c with c = 2, i.e. one bit) a served subcarrier may use under
# uniform quantization.
UNIFORM_MIN_PSI = 4.0
# beyond 2^512 the Gaussian quantization noise is far below double precision,
# so psi is capped there to keep it finite
GAUSSIAN_MAX_C = 512.0


# ---------------------------------------------------------------------------
# Power step: maximize sum_n ln(1 + sum_m phi_{m,n}(p_n)) s.t. per-user budget
# ---------------------------------------------------------------------------

class _PowerTerms:
    """phi_m(p) = a p / (wa p + b) for every (m, n)."""

    def __init__(self, gain, noise, w):
        gain = np.asarray(gain, dtype=float)
        noise = np.asarray(noise, dtype=float)
        w = np.asarray(w, dtype=float)
        on = np.isfinite(w) & (gain > 0) & (noise > 0)
        self.a = np.where(on, gain / np.where(noise > 0, noise, 1.0), 0.0)
        self.wa = np.where(on, w, 0.0) * self.a
        self.b = np.where(on, 1.0 + np.where(on, w, 0.0), 1.0)

    def slope0(self):
        return (self.a / self.b).sum(axis=0)

    def derivs(self, p):
        den = self.wa * p + self.b
        phi = self.a * p / den
        d1 = self.a * self.b / den**2
        d2 = -2.0 * self.wa * d1 / den
        g = 1.0 + phi.sum(axis=0)
        s1 = d1.sum(axis=0)
        return s1 / g, d2.sum(axis=0) / g - (s1 / g) ** 2

    def value(self, p):
        return np.log1p((self.a * p / (self.wa * p + self.b)).sum(axis=0))


def _power_for_price(terms: _PowerTerms, lam, cap, p_start, d0, max_iter=100):
    """Per-subcarrier maximizer of ln(1 + gamma(p)) - lam p over [0, cap]."""
    dcap, _ = terms.derivs(cap)
    zero = d0 <= lam
    full = (dcap >= lam) & ~zero
    inner = ~(zero | full)
    p = np.where(zero, 0.0, np.where(full, cap, np.clip(p_start, 0.0, cap)))
    if not inner.any():
        return p
    lo = np.zeros_like(p)
    hi = cap.copy()
    p = np.where(inner & ((p <= 0) | (p >= cap)), 0.5 * cap, p)
    for _ in range(max_iter):
        d1, d2 = terms.derivs(p)
        f = d1 - lam
        lo = np.where(inner & (f > 0), p, lo)
        hi = np.where(inner & (f <= 0), p, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            nxt = p - f / d2
        # inclusive: a converged step lands on the end it just set
        bad = ~((nxt >= lo) & (nxt <= hi))
        nxt = np.where(bad, 0.5 * (lo + hi), nxt)
        nxt = np.where(inner, nxt, p)
        done = np.abs(nxt - p) <= 1e-13 * cap + 1e-300
        p = nxt
        if done.all():
            break
    return p


def solve_power(gain, noise, w, owner, budgets, p_start=None, iters=80):
    """Optimal per-subcarrier powers for fixed quantization noise levels.

    Parameters
    ----------
    gain, noise, w : ndarray, shape (M, N)
        Owner power gains, noise variances and relative quantization noise.
    owner : ndarray, shape (N,)
        Zero-based owner of each subcarrier.
    budgets : ndarray, shape (K,)
        Per-user power budgets.

    Returns
    -------
    p : ndarray, shape (N,)
    lam : ndarray, shape (K,)
        Dual prices (nats per watt); zero for users that cannot transmit.
    """
    terms = _PowerTerms(gain, noise, w)
    owner = np.asarray(owner)
    budgets = np.asarray(budgets, dtype=float)
    n_users = budgets.size
    cap = budgets[owner]
    d0 = terms.slope0()
    active = (d0 > 0) & (cap > 0)

    dcap, _ = terms.derivs(cap)
    hi = np.zeros(n_users)
    lo = np.full(n_users, np.inf)
    np.maximum.at(hi, owner[active], d0[active])
    np.minimum.at(lo, owner[active], dcap[active])
    users = hi > 0
    lo = np.where(users, np.minimum(lo, hi), 1.0)
    hi = np.where(users, hi, 1.0)
    # The bracket ends are attained prices; widen a hair so the root is interior.
    lo = lo * (1 - 1e-12)
    hi = hi * (1 + 1e-12)

    p = np.where(active, 0.5 * cap, 0.0) if p_start is None else np.asarray(p_start, float)

    def excess(lam_k, p_):
        p_ = np.where(active, _power_for_price(terms, lam_k[owner], cap, p_, d0), 0.0)
        return p_, np.bincount(owner, weights=p_, minlength=n_users) - budgets

    # Illinois regula falsi on the (continuous, decreasing) excess in log lam
    z_lo, z_hi = np.log(lo), np.log(hi)
    _, f_lo = excess(lo, p)
    f_hi = -budgets.copy()
    f_lo = np.where(users, np.maximum(f_lo, 0.0), 1.0)
    f_hi = np.where(users, f_hi, -1.0)
    side = np.zeros(n_users, dtype=int)
    for _ in range(iters):
        with np.errstate(divide="ignore", invalid="ignore"):
            z = z_hi - f_hi * (z_hi - z_lo) / (f_hi - f_lo)
        mid = 0.5 * (z_lo + z_hi)
        z = np.where(np.isfinite(z) & (z > z_lo) & (z < z_hi), z, mid)
        p, f = excess(np.exp(z), p)
        over = f > 0
        z_lo = np.where(over, z, z_lo)
        z_hi = np.where(over, z_hi, z)
        # halve the stale end's weight when the same side moves twice
        f_hi = np.where(over & (side == 1), 0.5 * f_hi, np.where(over, f_hi, f))
        f_lo = np.where(~over & (side == -1), 0.5 * f_lo, np.where(over, f, f_lo))
        side = np.where(over, 1, -1)
        tight = np.abs(f) <= 1e-13 * budgets
        z_hi = np.where(tight, z, z_hi)
        if np.all(tight | (z_hi - z_lo <= 1e-13) | ~users):
            break
    hi = np.exp(z_hi)
    p = _power_for_price(terms, hi[owner], cap, p, d0)
    p = np.where(active, p, 0.0)
    used = np.bincount(owner, weights=p, minlength=n_users)
    # hi is the feasible side of the bracket; close the last ulps of slack
    scale = np.ones(n_users)
    np.divide(budgets, used, out=scale, where=used > 0)
    p = p * np.clip(scale, 0.0, 1.0 + 1e-9)[owner]
    return p, np.where(users, hi, 0.0)


def power_objective(gain, noise, w, p):
    """Sum over subcarriers of ln(1 + gamma_n(p_n)) (nats)."""
    return float(_PowerTerms(gain, noise, w).value(np.asarray(p, float)).sum())


def power_kkt_residual(gain, noise, w, owner, budgets, p, lam):
    """Largest complementary-slackness / stationarity violation, relative."""
    terms = _PowerTerms(gain, noise, w)
    d1, _ = terms.derivs(np.asarray(p, float))
    lam_sc = np.asarray(lam)[owner]
    cap = np.asarray(budgets, float)[owner]
    scale = np.maximum(lam_sc, 1e-300)
    on = (p > 1e-12 * cap) & (p < cap * (1 - 1e-12))
    r_on = np.where(on, np.abs(d1 - lam_sc) / scale, 0.0)
    r_off = np.where(p <= 1e-12 * cap, np.maximum(d1 - lam_sc, 0.0) / scale, 0.0)
    return float(max(r_on.max(initial=0.0), r_off.max(initial=0.0)))


# ---------------------------------------------------------------------------
# Fronthaul steps on one RRH with the other RRHs' contributions held fixed.
# snr = X (N,), gamma_other = sum of the other RRHs' phi (N,).
# ---------------------------------------------------------------------------

def phi_psi(snr, psi, k):
    """X psi / (psi + k (X + 1)), robust to psi = inf."""
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        val = snr / (1.0 + k * (snr + 1.0) / psi)
    return np.where(snr > 0, val, 0.0)


def _gauss_root(snr, gamma_other, kappa):
    """psi >= 0 maximizing ln(1 + G + phi(psi)) - kappa psi (Gaussian, k = 1)."""
    b = snr + 1.0
    g = 1.0 + gamma_other
    A = kappa * (g + snr)
    Bq = kappa * snr * b
    Cq = snr * b
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        D = (Bq + np.sqrt(Bq * Bq + 4.0 * A * Cq)) / (2.0 * A)
        psi = D - b
    return np.where((snr > 0) & (psi > 0), psi, 0.0)


def gaussian_sca_block(snr, gamma_other, psi_tilde, budget_nats):
    """Solve the linearized fronthaul problem of one RRH.

    Maximizes sum_n ln(1 + G_n + phi(psi_n)) subject to
    sum_n [ln(1 + psi~_n) + (psi_n - psi~_n) / (1 + psi~_n)] <= budget_nats,
    psi >= 0.  Returns ``(psi, mu)``.
    """
    snr = np.asarray(snr, float)
    psi_tilde = np.asarray(psi_tilde, float)
    inv = 1.0 / (1.0 + psi_tilde)
    avail = budget_nats - np.sum(np.log1p(psi_tilde) - psi_tilde * inv)
    if avail < -1e-9 * max(1.0, budget_nats):
        raise ValueError("linearization point violates the fronthaul constraint")
    avail = max(avail, 0.0)
    if not np.any(snr > 0) or avail == 0.0:
        return np.zeros_like(snr), np.inf

    slope0 = snr / ((snr + 1.0) * (1.0 + gamma_other))
    mu_max = float(np.max(slope0 / inv))

    def used(log_mu):
        return float(np.sum(_gauss_root(snr, gamma_other, np.exp(log_mu) * inv) * inv))

    hi = np.log(mu_max)
    lo = hi - 1.0
    while used(lo) <= avail:
        lo -= 2.0 * (hi - lo)
        if lo < -1400:
            break
    if used(lo) <= avail:
        log_mu = lo
    else:
        log_mu = optimize.brentq(lambda z: used(z) - avail, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)
    mu = float(np.exp(log_mu))
    psi = _gauss_root(snr, gamma_other, mu * inv)
    spent = float(np.sum(psi * inv))
    if spent > avail:
        psi = psi * (avail / spent)
    return psi, mu


# Both quantization models share one per-subcarrier form: with the cost of
# psi measured as log2(psi + s0) bits, maximize ln(1 + G + phi(psi)) minus
# mu ln(psi + s0), phi = X psi / (psi + k (X + 1)).
#   Gaussian: k = 1, s0 = 1, off at psi = 0, no minimum when served
#   uniform:  k = 3, s0 = 0, off at psi = 1, served needs psi >= 4 (one bit)
_BLOCK_FORMS = {
    "gaussian": (1.0, 1.0, 0.0, 0.0),   # k, s0, psi_off, psi_min
    "uniform": (3.0, 0.0, 1.0, UNIFORM_MIN_PSI),
}


def _block_candidates(snr, gamma_other, mu, form, forced=False):
    """Per-subcarrier maximizer over {off, minimum, concave-branch root}.

    With ``forced`` every subcarrier stays served and gets the clamped root.
    """
    k, s0, psi_off, psi_min = _BLOCK_FORMS[form]
    kb = k * (snr + 1.0)
    g = 1.0 + gamma_other
    A = mu * (g + snr)
    Bq = (1.0 + mu) * snr * kb
    Cq = snr * kb * (kb - s0)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        disc = Bq * Bq - 4.0 * A * Cq
        D = (Bq + np.sqrt(np.maximum(disc, 0.0))) / (2.0 * A)
        root = np.where(disc >= 0, D - kb, psi_min)
    root = np.where(np.isnan(root), np.inf, root)
    psi_on = np.maximum(root, max(psi_min, psi_off))
    if forced:
        return psi_on
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        v_on = np.log(g + phi_psi(snr, psi_on, k)) - mu * np.log(psi_on + s0)
    take = (snr > 0) & (psi_on > psi_off) & (v_on > np.log(g))
    return np.where(take, psi_on, psi_off)


def _block_objective(snr, gamma_other, psi, form):
    k, _, psi_off, _ = _BLOCK_FORMS[form]
    served = psi > psi_off
    return float(np.sum(np.log1p(gamma_other + np.where(served, phi_psi(snr, psi, k), 0.0))))


def exact_block(snr, gamma_other, budget_bits, form, psi_current=None, iters=48):
    """Lagrangian fronthaul allocation of one RRH with the others held fixed.

    The per-subcarrier rate is sigmoidal in the bit count, so each subcarrier
    is maximized over its candidate set rather than by a single stationary
    condition.  The price ``mu`` is bisected to meet
    ``sum_n log2(psi_n + s0) <= budget_bits``; slack left by a duality gap is
    re-spent with the on/off pattern frozen.  If ``psi_current`` is given the
    result is never worse than it.
    """
    k, s0, psi_off, psi_min = _BLOCK_FORMS[form]
    snr = np.asarray(snr, float)
    gamma_other = np.asarray(gamma_other, float)
    budget_bits = max(float(budget_bits), 0.0)

    def spend(psi):
        return float(np.sum(np.log2(psi + s0)))

    if budget_bits < np.log2(psi_min + s0) or budget_bits == 0 or not np.any(snr > 0):
        psi = np.full_like(snr, psi_off)
    else:
        def cand(log_mu):
            return _block_candidates(snr, gamma_other, np.exp(log_mu), form)

        lo, hi = -60.0, 5.0          # log(mu)
        while spend(cand(hi)) > budget_bits:
            hi += 5.0
        while spend(cand(lo)) <= budget_bits and lo > -700:
            lo -= 20.0
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            if spend(cand(mid)) > budget_bits:
                lo = mid
            else:
                hi = mid
        psi = _retighten(snr, gamma_other, cand(hi), budget_bits, hi, form)
        # the price is discontinuous where a subcarrier switches on; the
        # pattern just across the jump may still fit once filled exactly
        wider = cand(lo) > psi_off
        if np.any(wider & ~(psi > psi_off)):
            alt = _fill(snr, gamma_other, wider, budget_bits, hi, form)
            if alt is not None and _block_objective(snr, gamma_other, alt, form) > \
                    _block_objective(snr, gamma_other, psi, form):
                psi = alt

    if psi_current is not None:
        psi_current = np.asarray(psi_current, float)
        if _block_objective(snr, gamma_other, psi_current, form) > \
                _block_objective(snr, gamma_other, psi, form):
            return psi_current
    return psi


def uniform_block(snr, gamma_other, budget_bits, psi_current=None, iters=48):
    """:func:`exact_block` for the uniform quantizer (psi = 2^c, psi = 1 is off)."""
    return exact_block(snr, gamma_other, budget_bits, "uniform", psi_current, iters)


def gaussian_block(snr, gamma_other, budget_bits, psi_current=None, iters=48):
    """:func:`exact_block` for the Gaussian test channel (psi = 2^c - 1)."""
    return exact_block(snr, gamma_other, budget_bits, "gaussian", psi_current, iters)


def _retighten(snr, gamma_other, psi, budget_bits, log_mu_hi, form):
    """Spend leftover budget on served subcarriers with the pattern frozen."""
    _, s0, psi_off, _ = _BLOCK_FORMS[form]
    served = psi > psi_off
    if not served.any():
        return psi
    if np.sum(np.log2(psi + s0)) >= budget_bits * (1 - 1e-12):
        return psi
    out = _fill(snr, gamma_other, served, budget_bits, log_mu_hi, form)
    return psi if out is None else out


def _fill(snr, gamma_other, served, budget_bits, log_mu_ref, form):
    """Best allocation serving exactly ``served``; None if its minimum does not fit."""
    _, s0, psi_off, psi_min = _BLOCK_FORMS[form]
    floor = max(psi_min, psi_off)
    if served.sum() * np.log2(floor + s0) > budget_bits * (1 + 1e-12):
        return None
    s_snr, s_g = snr[served], gamma_other[served]

    def alloc(log_mu):
        return _block_candidates(s_snr, s_g, np.exp(log_mu), form, forced=True)

    lo, hi = log_mu_ref - 60.0, log_mu_ref + 60.0
    for _ in range(90):
        mid = 0.5 * (lo + hi)
        if np.sum(np.log2(alloc(mid) + s0)) > budget_bits:
            lo = mid
        else:
            hi = mid
    psi = alloc(hi)
    # no price supports a point on the convex part of the rate curve, so
    # slack can remain; rates grow with psi, so hand it to the best taker
    slack = budget_bits - np.sum(np.log2(psi + s0))
    if slack > 1e-12 * max(budget_bits, 1.0):
        best, best_val = psi, -np.inf
        for j in range(psi.size):
            trial = psi.copy()
            trial[j] = np.exp2(min(np.log2(psi[j] + s0) + slack, GAUSSIAN_MAX_C)) - s0
            val = _block_objective(s_snr, s_g, trial, form)
            if val > best_val:
                best, best_val = trial, val
        psi = best
    out = np.full_like(snr, psi_off)
    out[served] = psi
    return out


# ---------------------------------------------------------------------------
# psi / c conversions
# ---------------------------------------------------------------------------

def gaussian_psi_from_c(c):
    """``2^c - 1`` with ``c`` capped at :data:`GAUSSIAN_MAX_C`."""
    return np.expm1(np.minimum(np.asarray(c, float), GAUSSIAN_MAX_C) * LN2)


def gaussian_c_from_psi(psi):
    return np.log1p(np.asarray(psi, float)) / LN2
