"""Two-phase user association and the exhaustive small-instance oracle.

Phase one builds a serving cluster per UE from large-scale fading alone:
every UE marks its strongest AP, every AP admits its top UEs up to the
pilot-length capacity, and UEs still below two serving APs are topped up
from their next-best APs with spare capacity.  The output always satisfies
|D_l| <= tau_p (AP capacity) and |M_k| >= 2 (coverage).

Phase two refines the cluster for sensing: serving APs whose echo bearings
miss the UE's coarse position are treated as clutter-blocked and dropped,
and clutter-free replacements are pulled in to keep at least two serving
APs per UE.
"""

from __future__ import annotations

import csv
import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    InfeasibleAssociationError,
    InvalidConfigError,
    SearchSpaceTooLargeError,
    UnsatisfiableLoSError,
)


@dataclass
class AssociationMatrix:
    """Binary K x L serving matrix with derived per-UE and per-AP sets."""

    s: np.ndarray

    def __post_init__(self):
        self.s = np.asarray(self.s)
        if not np.isin(self.s, (0, 1)).all():
            raise InvalidConfigError("association entries must be 0 or 1")
        self.s = self.s.astype(np.int8)

    @property
    def num_ues(self) -> int:
        return self.s.shape[0]

    @property
    def num_aps(self) -> int:
        return self.s.shape[1]

    def serving_aps(self, k: int) -> np.ndarray:
        """M_k: indices of APs serving UE k."""
        return np.flatnonzero(self.s[k])

    def served_ues(self, l: int) -> np.ndarray:
        """D_l: indices of UEs served by AP l."""
        return np.flatnonzero(self.s[:, l])

    def copy(self) -> "AssociationMatrix":
        return AssociationMatrix(self.s.copy())


def all_serve_all(num_ues: int, num_aps: int) -> AssociationMatrix:
    return AssociationMatrix(np.ones((num_ues, num_aps), dtype=np.int8))


def nearest_ap_association(layout) -> AssociationMatrix:
    """Single-AP baseline: each UE is served only by its nearest AP."""
    dist = layout.distances()
    s = np.zeros(dist.shape, dtype=np.int8)
    s[np.arange(dist.shape[0]), np.argmin(dist, axis=1)] = 1
    return AssociationMatrix(s)


def initial_association(beta: np.ndarray, tau_p: int) -> AssociationMatrix:
    """Large-scale-fading based clustering (phase one).

    Requires 2 * K <= L * tau_p so that every UE can reach two serving APs
    under the per-AP capacity; otherwise raises
    ``InfeasibleAssociationError`` naming the binding constraint.
    """
    beta = np.asarray(beta, dtype=float)
    k_num, l_num = beta.shape
    if 2 * k_num > l_num * tau_p:
        raise InfeasibleAssociationError(
            f"capacity constraint |D_l| <= tau_p binds: 2K={2 * k_num} exceeds "
            f"L*tau_p={l_num * tau_p}"
        )
    s = np.zeros((k_num, l_num), dtype=np.int8)

    # UE preference: every UE marks its strongest AP (ties to lowest index).
    s[np.arange(k_num), np.argmax(beta, axis=1)] = 1

    # AP preference: each AP admits the top UEs by beta up to spare capacity.
    for l in range(l_num):
        spare = tau_p - int(s[:, l].sum())
        if spare <= 0:
            continue
        order = np.argsort(-beta[:, l], kind="stable")
        s[order[:spare], l] = 1

    # Capacity resolution: the UE-preference pass can pile more than tau_p
    # UEs onto a popular AP.  Overloaded APs shed their weakest links,
    # preferring UEs that keep more than two serving APs elsewhere.
    for l in range(l_num):
        while s[:, l].sum() > tau_p:
            served = np.flatnonzero(s[:, l])
            for floor in (3, 2, 1):
                pool = served[s[served].sum(axis=1) >= floor]
                if pool.size:
                    break
            drop = pool[np.argmin(beta[pool, l])]
            s[drop, l] = 0

    # Top-up: UEs below two serving APs take their next-best APs with
    # spare capacity, processed in descending order of best unserved beta.
    deficient = [k for k in range(k_num) if s[k].sum() < 2]

    def best_unserved(k):
        unserved = np.flatnonzero(s[k] == 0)
        return beta[k, unserved].max() if unserved.size else -math.inf

    deficient.sort(key=lambda k: -best_unserved(k))
    for k in deficient:
        while s[k].sum() < 2:
            candidates = [
                l for l in range(l_num) if s[k, l] == 0 and s[:, l].sum() < tau_p
            ]
            if candidates:
                best = max(candidates, key=lambda l: (beta[k, l], -l))
                s[k, best] = 1
                continue
            # Every unserving AP is full: displace the weakest over-covered
            # UE from the AP this UE prefers most.
            if not _steal_slot(s, beta, k):
                raise InfeasibleAssociationError(
                    f"coverage constraint |M_k| >= 2 binds for UE {k}: "
                    "no AP with spare capacity remains"
                )
    return AssociationMatrix(s)


def _steal_slot(s, beta, k) -> bool:
    l_num = s.shape[1]
    for l in sorted(
        (l for l in range(l_num) if s[k, l] == 0), key=lambda l: -beta[k, l]
    ):
        served = np.flatnonzero(s[:, l])
        victims = served[s[served].sum(axis=1) > 2]
        if victims.size:
            victim = victims[np.argmin(beta[victims, l])]
            s[victim, l] = 0
            s[k, l] = 1
            return True
    return False


def threshold_select(beta_row: np.ndarray, xi: float) -> np.ndarray:
    """APs whose large-scale fading meets a minimum threshold.

    Returns the index set {l : beta_kl >= xi}; an empty result is allowed
    and flagged with a warning.
    """
    beta_row = np.asarray(beta_row, dtype=float)
    selected = np.flatnonzero(beta_row >= xi)
    if selected.size == 0:
        warnings.warn("threshold selection produced an empty candidate set", stacklevel=2)
    return selected


def exhaustive_p1(
    beta: np.ndarray,
    tau_p: int,
    se_evaluator,
    max_combinations: int = 1_000_000,
):
    """Brute-force optimum of sum SE over all feasible association matrices.

    Enumerates, per AP, every served set of size at most tau_p, keeps the
    matrices where each UE has at least two serving APs, and maximizes the
    summed output of ``se_evaluator`` (a callable mapping an
    AssociationMatrix to per-UE SE values).  Ties break to the
    lexicographically smallest matrix.
    """
    beta = np.asarray(beta, dtype=float)
    k_num, l_num = beta.shape
    subsets = []
    for size in range(tau_p + 1):
        subsets.extend(itertools.combinations(range(k_num), size))
    total = len(subsets) ** l_num
    if total > max_combinations:
        raise SearchSpaceTooLargeError(
            f"{total} column combinations exceed the cap of {max_combinations}; "
            "use initial_association instead"
        )
    best_val = -math.inf
    best_key = None
    best_s = None
    for cols in itertools.product(subsets, repeat=l_num):
        s = np.zeros((k_num, l_num), dtype=np.int8)
        for l, col in enumerate(cols):
            s[list(col), l] = 1
        if (s.sum(axis=1) < 2).any():
            continue
        assoc = AssociationMatrix(s)
        val = float(np.sum(se_evaluator(assoc)))
        key = tuple(s.flatten())
        if val > best_val or (val == best_val and (best_key is None or key < best_key)):
            best_val, best_key, best_s = val, key, assoc
    if best_s is None:
        raise InfeasibleAssociationError(
            "no association matrix satisfies |M_k| >= 2 under |D_l| <= tau_p"
        )
    return best_s, best_val


def lsfc_se_proxy(beta: np.ndarray, power_over_noise: float, tau_p: int, tau_c: int):
    """Cheap deterministic SE evaluator from large-scale fading only.

    SE_k = (1 - tau_p/tau_c) log2(1 + sum_{l in M_k} beta_kl * p / sigma^2);
    monotone in added serving APs, which makes it a convenient objective for
    the exhaustive oracle and for desk-scale association comparisons.
    """
    beta = np.asarray(beta, dtype=float)
    prelog = 1.0 - tau_p / tau_c

    def evaluate(assoc: AssociationMatrix) -> np.ndarray:
        gains = (beta * assoc.s).sum(axis=1) * power_over_noise
        return prelog * np.log2(1.0 + gains)

    return evaluate


def _ray_miss_distance(origin, angle, point) -> float:
    """Distance from a point to the ray leaving origin at the given angle."""
    v = np.asarray(point, dtype=float) - np.asarray(origin, dtype=float)
    direction = np.array([math.cos(angle), math.sin(angle)])
    along = float(v @ direction)
    if along <= 0.0:
        return float(np.hypot(*v))
    return abs(direction[0] * v[1] - direction[1] * v[0])


def refine_association(
    assoc: AssociationMatrix,
    aoa_reports: dict,
    coarse_positions: np.ndarray,
    layout,
    scnr_evaluator,
    tau_p: int,
    tol: float = 7.5,
) -> AssociationMatrix:
    """Sensing-aware refinement of a phase-one association (phase two).

    ``aoa_reports`` maps (ue, ap) to the echo bearing estimated at that AP;
    it must cover every serving pair and may cover spare APs.  A serving AP
    is clutter-blocked when its bearing ray misses the UE's coarse position
    by more than ``tol`` meters.  Blocked APs are dropped (lowest per-link
    SCNR first); if fewer than two APs survive, clutter-free replacements
    with spare capacity are added, preferring reported bearings with the
    smallest miss and then unreported APs by distance.  Raises
    ``UnsatisfiableLoSError`` when no clutter-free pair can be formed.
    """
    coarse_positions = np.asarray(coarse_positions, dtype=float)
    out = assoc.copy()
    k_num, l_num = out.s.shape
    for k in range(k_num):
        u_k = coarse_positions[k]
        serving = list(np.flatnonzero(out.s[k]))
        misses = {}
        for l in serving:
            if (k, l) not in aoa_reports:
                raise InvalidConfigError(f"missing AOA report for serving pair ({k}, {l})")
            misses[l] = _ray_miss_distance(layout.ap_positions[l], aoa_reports[(k, l)], u_k)
        blocked = [l for l in serving if misses[l] > tol]
        # Greedy toward max-min SCNR: drop the worst blocked APs first.
        blocked.sort(key=lambda l: scnr_evaluator(k, l))
        for l in blocked:
            out.s[k, l] = 0
        if out.s[k].sum() >= 2:
            continue
        # Restore coverage with clutter-free APs that still have capacity.
        candidates = []
        for l in range(l_num):
            if out.s[k, l] == 1 or out.s[:, l].sum() >= tau_p:
                continue
            if (k, l) in aoa_reports:
                miss = _ray_miss_distance(layout.ap_positions[l], aoa_reports[(k, l)], u_k)
                if miss > tol:
                    continue
                candidates.append((0, miss, l))
            else:
                dist = float(np.hypot(*(layout.ap_positions[l] - u_k)))
                candidates.append((1, dist, l))
        candidates.sort()
        for _, _, l in candidates:
            if out.s[k].sum() >= 2:
                break
            out.s[k, l] = 1
        if out.s[k].sum() < 2:
            raise UnsatisfiableLoSError(k)
    return out


def association_diff(before: AssociationMatrix, after: AssociationMatrix):
    """List of (ue, ap, change) rows describing a refinement step."""
    rows = []
    delta = after.s.astype(int) - before.s.astype(int)
    for k, l in zip(*np.nonzero(delta)):
        rows.append((int(k), int(l), "added" if delta[k, l] > 0 else "removed"))
    return rows


def write_association_csv(path, assoc: AssociationMatrix):
    """Serving pairs as (ue_id, ap_id) rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ue_id", "ap_id"])
        for k in range(assoc.num_ues):
            for l in assoc.serving_aps(k):
                writer.writerow([k, int(l)])


def write_association_grid(path, assoc: AssociationMatrix):
    """Dense 0/1 grid, one row per UE, one column per AP."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ue_id"] + [f"ap_{l}" for l in range(assoc.num_aps)])
        for k in range(assoc.num_ues):
            writer.writerow([k] + [int(x) for x in assoc.s[k]])


def write_association_diff(path, before: AssociationMatrix, after: AssociationMatrix):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ue_id", "ap_id", "change"])
        for k, l, change in association_diff(before, after):
            writer.writerow([k, l, change])
