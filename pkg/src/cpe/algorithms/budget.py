"""Big-O sample-complexity expressions evaluated with constants dropped (non-binding)."""
from __future__ import annotations

import math

from ..core import InstanceDescriptor, gap_profile
from ..design import compute_lambda_alpha
from ..env import ObserverSet
from .common import c0_constant
from .rewards import lipschitz_constant


def _lnln(gap: float) -> float:
    return math.log(math.log(max(1.0 / gap, math.e)))


def theoretical_budget(instance: InstanceDescriptor, delta: float,
                       observer: ObserverSet | None = None, cap: int = 10**6,
                       lipschitz: str = "tight") -> dict:
    """Evaluate the PolyALBA and GCB-PE bounds on ``instance``'s exact gap profile.

    ``ln ln(1/gap)`` is clamped at 0 for gaps above ``1/e``; when fewer than
    ``r + 1`` actions exist the last available gap stands in for the
    ``(r+1)``-th. ``r`` is the rank of span(X).
    """
    prof = gap_profile(instance, cap=cap, reward="linear")
    info = compute_lambda_alpha(instance.space, allow_deficient=True)
    r, m, alpha = info.rank, info.m, info.alpha
    c0 = c0_constant(instance.theta.norm_bound)
    base = math.log(1 / delta) + math.log(instance.space.count())
    n = len(prof.sorted_values)
    first = 0.0
    for i in range(2, max(2, r // 2) + 1):
        if i > n:
            break
        g = prof.delta(i)
        first += c0 / g ** 2 * (base + _lnln(g))
    g_prep = prof.delta(min(r + 1, n))
    second = c0 * r * (alpha * math.sqrt(m) + alpha ** 2) / g_prep ** 2 * (base + _lnln(g_prep))
    out = {
        "label": "non-binding: big-O arguments with constants dropped",
        "polyalba": first + second,
        "polyalba_terms": {"alba": first, "preparation": second},
        "alpha": alpha,
        "rank": r,
        "delta_min": prof.delta_min,
    }
    reward_prof = gap_profile(instance, cap=cap)
    dmin = reward_prof.delta_min
    if observer is None:
        from .gcbpe import observer_for_instance
        observer = observer_for_instance(instance)
    L_p = lipschitz_constant(instance.space, instance.reward, lipschitz)
    k = observer.beta_sigma ** 2 * L_p ** 2 / dmin ** 2
    out["gcbpe"] = len(observer.actions) * k * math.log(k / delta)
    out["gcbpe_inputs"] = {"sigma": len(observer.actions), "beta_sigma": observer.beta_sigma,
                           "L_p": L_p, "delta_min": dmin}
    return out
