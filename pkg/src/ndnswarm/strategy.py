"""Adaptive multipath forwarding strategy.

One StrategyState exists per (node, FIB prefix). The strategy keeps
per-face counters and an EWMA of observed round-trip delay, and decides
where each Interest goes:

  * normally the current best face is used;
  * 1 out of every probe_interval Interests probes an alternative face so
    a better path can be discovered while traffic keeps flowing;
  * when the current face looks saturated (delay inflated well above its
    floor, or a recent loss) Interests spill over to an unsaturated
    alternative without abandoning the current face; the moment the
    current face's delay deflates it takes traffic again, so the primary
    path stays fully loaded while only the excess flows elsewhere;
  * repeated failures or a poor satisfaction ratio on the current face
    trigger a switch to the best alternative.

Faces that keep failing outright are put on a cooloff and excluded from
probing and failover targeting until the cooloff expires; this keeps
traffic away from departed peers while still letting a recovered face
redeem itself later (a probe that brings data back clears the failure
streak entirely).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

_INF = float("inf")


@dataclass(frozen=True)
class StrategyConfig:
    satisfaction_threshold: float = 0.5
    max_consecutive_failures: int = 3
    probe_interval: int = 50
    ewma_alpha: float = 0.125
    saturation_inflation: float = 2.0
    min_samples: int = 5
    failure_cooloff_ms: float = 30000.0

    def __post_init__(self):
        if not 0.0 < self.satisfaction_threshold <= 1.0:
            raise ValueError("satisfaction_threshold must be in (0, 1]")
        if self.max_consecutive_failures < 1:
            raise ValueError("max_consecutive_failures must be >= 1")
        if self.probe_interval < 1:
            raise ValueError("probe_interval must be >= 1")
        if not 0.0 < self.ewma_alpha <= 1.0:
            raise ValueError("ewma_alpha must be in (0, 1]")
        if self.saturation_inflation <= 1.0:
            raise ValueError("saturation_inflation must exceed 1.0")
        if self.min_samples < 1:
            raise ValueError("min_samples must be >= 1")


class FailureKind(enum.Enum):
    TIMEOUT = "timeout"
    NACK = "nack"


@dataclass
class FaceStats:
    face_id: int
    cost_ms: float = _INF
    in_fib: bool = True
    interests_sent: int = 0
    data_received: int = 0
    consecutive_failures: int = 0
    ewma_delay_ms: float | None = None
    base_delay_ms: float | None = None
    last_probe_at: int = -1
    last_failure_sent_index: int | None = None
    last_failure_ns: int | None = None

    def satisfaction(self) -> float:
        if self.interests_sent == 0:
            return 1.0
        return self.data_received / self.interests_sent

    def effective_delay(self) -> float:
        """EWMA when measured, FIB cost otherwise."""
        return self.ewma_delay_ms if self.ewma_delay_ms is not None else self.cost_ms


@dataclass(frozen=True)
class SwitchDecision:
    old_face: int | None
    new_face: int
    reason: str


class StrategyState:
    """Per-prefix forwarding state for one node."""

    def __init__(self, config: StrategyConfig):
        self.config = config
        self.current_face: int | None = None
        self.sent_counter = 0
        self.faces: dict[int, FaceStats] = {}
        self._rr_counter = 0

    # -- bookkeeping ------------------------------------------------------

    def _face(self, face_id: int) -> FaceStats:
        st = self.faces.get(face_id)
        if st is None:
            st = FaceStats(face_id)
            self.faces[face_id] = st
        return st

    def _sync(self, nexthops):
        """Refresh face set and costs from the FIB entry's nexthops."""
        seen = set()
        for face_id, cost_ms in nexthops:
            seen.add(face_id)
            st = self._face(face_id)
            st.cost_ms = cost_ms
            st.in_fib = True
        for st in self.faces.values():
            if st.face_id not in seen:
                st.in_fib = False

    def _cooling(self, st: FaceStats, now_ns: int) -> bool:
        if st.consecutive_failures < self.config.max_consecutive_failures:
            return False
        if st.last_failure_ns is None:
            return False
        return now_ns < st.last_failure_ns + self.config.failure_cooloff_ms * 1e6

    def is_saturated(self, face_id: int) -> bool:
        """Delay inflated above the observed floor, or a failure within the
        last probe_interval Interests sent on this face."""
        st = self.faces.get(face_id)
        if st is None:
            return False
        if (
            st.ewma_delay_ms is not None
            and st.base_delay_ms is not None
            and st.ewma_delay_ms > self.config.saturation_inflation * st.base_delay_ms
        ):
            return True
        if st.last_failure_sent_index is not None:
            if st.interests_sent - st.last_failure_sent_index < self.config.probe_interval:
                return True
        return False

    def satisfaction(self, face_id: int) -> float:
        st = self.faces.get(face_id)
        return st.satisfaction() if st is not None else 1.0

    # -- decisions --------------------------------------------------------

    def choose_face(self, nexthops, already_tried, now_ns: int) -> int | None:
        """Pick the outgoing face for one Interest.

        nexthops: iterable of (face_id, cost_ms) from the matched FIB
        entry, already sorted by (cost, face_id). already_tried: face ids
        to exclude (upstreams already attempted plus the arrival face).
        Returns None when every nexthop is excluded (exhausted).
        """
        nexthops = list(nexthops)
        self._sync(nexthops)
        candidates = [fid for fid, _ in nexthops if fid not in already_tried]
        if not candidates:
            return None

        fib_ids = {fid for fid, _ in nexthops}
        if self.current_face is None or self.current_face not in fib_ids:
            self.current_face = nexthops[0][0]

        chosen = None

        if self.sent_counter % self.config.probe_interval == 0:
            pool = [
                fid
                for fid in candidates
                if fid != self.current_face
                and not self._cooling(self.faces[fid], now_ns)
            ]
            if pool:
                chosen = min(
                    pool, key=lambda fid: (self.faces[fid].last_probe_at, fid)
                )
                self.faces[chosen].last_probe_at = self.sent_counter

        if chosen is None:
            if self.current_face not in candidates:
                chosen = self._fallback(candidates, now_ns)
            elif self.is_saturated(self.current_face):
                chosen = self._spill(candidates, now_ns)
            else:
                chosen = self.current_face

        self.sent_counter += 1
        self.faces[chosen].interests_sent += 1
        return chosen

    def _fallback(self, candidates, now_ns: int) -> int:
        """Current face unavailable for this Interest (already tried, or it
        is where the Interest came from): best remaining face, preferring
        ones without a live failure streak and with measured delay."""
        return min(
            candidates,
            key=lambda fid: (
                self.faces[fid].consecutive_failures
                >= self.config.max_consecutive_failures,
                self._cooling(self.faces[fid], now_ns),
                self.faces[fid].ewma_delay_ms is None,
                self.faces[fid].effective_delay(),
                fid,
            ),
        )

    def _spill(self, candidates, now_ns: int) -> int:
        """Current face saturated: overflow to the best unsaturated
        alternative, leaving current_face unchanged. The saturation flag
        is the controller: the current face keeps its queue pinned at the
        delay ceiling (it reclaims every Interest the moment its delay
        deflates), so only the true excess drains elsewhere. With every
        candidate saturated, rotate so no face starves while all pipes
        are full."""
        unsaturated = [
            fid
            for fid in candidates
            if fid != self.current_face
            and not self.is_saturated(fid)
            and not self._cooling(self.faces[fid], now_ns)
        ]
        if unsaturated:
            return min(
                unsaturated,
                key=lambda fid: (self.faces[fid].effective_delay(), fid),
            )
        pool = [
            fid for fid in candidates if not self._cooling(self.faces[fid], now_ns)
        ] or candidates
        pool.sort()
        chosen = pool[self._rr_counter % len(pool)]
        self._rr_counter += 1
        return chosen

    def on_data(self, face_id: int, rtt_ms: float) -> SwitchDecision | None:
        """Record a round trip; switch when an alternative face proves
        consistently faster than the current one."""
        st = self._face(face_id)
        st.data_received += 1
        st.consecutive_failures = 0
        alpha = self.config.ewma_alpha
        if st.ewma_delay_ms is None:
            st.ewma_delay_ms = rtt_ms
        else:
            st.ewma_delay_ms = alpha * rtt_ms + (1.0 - alpha) * st.ewma_delay_ms
        if st.base_delay_ms is None or st.ewma_delay_ms < st.base_delay_ms:
            st.base_delay_ms = st.ewma_delay_ms

        if face_id != self.current_face and st.data_received >= self.config.min_samples:
            cur = self.faces.get(self.current_face)
            cur_ewma = cur.ewma_delay_ms if cur is not None else None
            if cur_ewma is None or st.ewma_delay_ms < cur_ewma:
                old = self.current_face
                self.current_face = face_id
                return SwitchDecision(old, face_id, "lower-delay")
        return None

    def on_failure(
        self, face_id: int, kind: FailureKind, now_ns: int
    ) -> SwitchDecision | None:
        """Record a timeout or nack; fail over when the current face has
        failed repeatedly or its satisfaction ratio collapsed."""
        st = self._face(face_id)
        st.consecutive_failures += 1
        st.last_failure_sent_index = st.interests_sent
        st.last_failure_ns = now_ns
        if face_id != self.current_face:
            return None

        tripped = st.consecutive_failures >= self.config.max_consecutive_failures or (
            st.interests_sent >= self.config.min_samples
            and st.satisfaction() < self.config.satisfaction_threshold
        )
        if not tripped:
            return None

        alternatives = [
            f for f in self.faces.values() if f.in_fib and f.face_id != face_id
        ]
        if not alternatives:
            return None
        best = min(
            alternatives,
            key=lambda f: (
                f.consecutive_failures >= self.config.max_consecutive_failures,
                self._cooling(f, now_ns),
                f.effective_delay(),
                f.face_id,
            ),
        )
        best.consecutive_failures = 0
        old = self.current_face
        self.current_face = best.face_id
        return SwitchDecision(old, best.face_id, "failover-%s" % kind.value)
