"""The four online consistency tests over an RSU object-list stream.

Each monitor keeps a recursive opinion on the binary domain
(reliable, unreliable) and consumes one tick of the stream at a time:

* prediction test: constant-velocity Kalman predictions along the lane are
  checked against the interpolated measurement polyline that arrives later;
* map test: lateral histograms along each lane are compared against
  commissioned reference opinions through the degree of conflict;
* perception test: objects seen by the ego vehicle inside the RSU coverage
  must appear in the RSU list (nearest-neighbor association);
* localization test: the RSU's report of the ego vehicle itself must agree
  with the ego's own localization within the combined 3-sigma bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from rsu_reliability.geometry import IntersectionMap, LaneGeometry, arc_length_project
from rsu_reliability.scenario import EgoPose, ObjectList
from rsu_reliability.sl import (
    DiscountVector,
    EvidenceVector,
    Opinion,
    averaging_fuse_many,
    cumulative_fuse,
    degree_of_conflict,
    opinion_from_evidence,
    trust_discount,
    trust_revise,
)

HALF = (0.5, 0.5)


class MonitorError(ValueError):
    pass


@dataclass(frozen=True)
class MonitorConfig:
    """Tuning knobs shared by the four tests.

    The discount vectors model how much independent information a single
    sample carries; the miss weights up-weight safety-critical negative
    evidence.  All values are exposed through the scenario config file.
    """

    p_indep: tuple[float, float] = (0.1, 0.1)
    p_dis: tuple[float, float] = (0.1, 0.1)
    theta_dc: float = 0.3
    w_mis: float = 10.0
    w_under: float = 10.0
    d_max: float = 2.0
    bin_length: float = 5.0
    lateral_cell: float = 0.5
    pred_horizon: float = 2.0
    pred_steps: int = 5
    kalman_q: float = 0.5
    prior_weight: float = 2.0

    def __post_init__(self) -> None:
        if self.theta_dc < 0.0 or self.theta_dc > 1.0:
            raise MonitorError("theta_dc must be in [0, 1]")
        if self.w_mis < 1.0 or self.w_under < 1.0:
            raise MonitorError("miss weights must be >= 1")
        if self.d_max <= 0.0 or self.bin_length <= 0.0 or self.lateral_cell <= 0.0:
            raise MonitorError("distances must be positive")
        if self.pred_steps < 1 or self.pred_horizon <= 0.0:
            raise MonitorError("prediction horizon and steps must be positive")
        if self.kalman_q <= 0.0 or self.prior_weight <= 0.0:
            raise MonitorError("kalman_q and prior_weight must be positive")


def _unit_positive(prior_weight: float) -> Opinion:
    """Opinion carrying one unit of confirming evidence."""
    return opinion_from_evidence(
        EvidenceVector(counts=(1.0, 0.0), base_rates=HALF, prior_weight=prior_weight)
    )


def _weighted_negative(weight: float, prior_weight: float) -> Opinion:
    """Opinion carrying ``weight`` units of disconfirming evidence."""
    return opinion_from_evidence(
        EvidenceVector(counts=(0.0, weight), base_rates=HALF,
                       prior_weight=prior_weight)
    )


# ---------------------------------------------------------------------------
# Prediction test
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PredictionTuple:
    """One predicted interval: the position bound pair for a future instant."""

    lower: float
    upper: float
    predicted_for: float
    made_at: float

    def __post_init__(self) -> None:
        if self.lower > self.upper:
            raise MonitorError("prediction interval has lower > upper")
        if self.predicted_for <= self.made_at:
            raise MonitorError("prediction must target a future instant")


@dataclass(frozen=True)
class MeasurementTrace:
    """Time-ordered arc-length measurements, linearly interpolated."""

    samples: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        samples = tuple((float(t), float(v)) for t, v in self.samples)
        object.__setattr__(self, "samples", samples)
        for (t0, _), (t1, _) in zip(samples, samples[1:]):
            if t1 <= t0:
                raise MonitorError("trace times must be strictly increasing")

    def spans(self, t: float) -> bool:
        return bool(self.samples) and self.samples[0][0] <= t <= self.samples[-1][0]

    def value_at(self, t: float) -> float:
        times = [s[0] for s in self.samples]
        values = [s[1] for s in self.samples]
        return float(np.interp(t, times, values))


def classify_predictions(
    tuples: Sequence[PredictionTuple], trace: MeasurementTrace
) -> tuple[int, int]:
    """Split prediction tuples into (correct, incorrect) against a trace.

    A tuple is correct when the interpolated measurement polyline passes
    through its interval at the predicted instant.  Tuples outside the trace
    span are ignored.
    """
    correct = 0
    incorrect = 0
    for tup in tuples:
        if not trace.spans(tup.predicted_for):
            continue
        value = trace.value_at(tup.predicted_for)
        if tup.lower <= value <= tup.upper:
            correct += 1
        else:
            incorrect += 1
    return correct, incorrect


class CvKalman:
    """Constant-velocity Kalman filter over (arc position, speed)."""

    _INITIAL_SPEED_VAR = 100.0

    def __init__(self, q: float, t0: float, s0: float, sigma0: float):
        self.q = q
        self.t = t0
        self.x = np.array([s0, 0.0])
        self.P = np.array([[sigma0 * sigma0, 0.0], [0.0, self._INITIAL_SPEED_VAR]])
        self.n_updates = 1

    @staticmethod
    def _fq(dt: float, q: float) -> tuple[np.ndarray, np.ndarray]:
        F = np.array([[1.0, dt], [0.0, 1.0]])
        Q = q * np.array(
            [[dt**3 / 3.0, dt**2 / 2.0], [dt**2 / 2.0, dt]]
        )
        return F, Q

    def advance(self, t: float) -> None:
        dt = t - self.t
        if dt <= 0.0:
            return
        F, Q = self._fq(dt, self.q)
        self.x = F @ self.x
        self.P = F @ self.P @ F.T + Q
        self.t = t

    def update(self, t: float, s: float, sigma: float) -> None:
        self.advance(t)
        innovation = s - self.x[0]
        S = self.P[0, 0] + sigma * sigma
        K = self.P[:, 0] / S
        self.x = self.x + K * innovation
        self.P = self.P - np.outer(K, self.P[0, :])
        self.n_updates += 1

    def predict_tuples(self, horizon: float, steps: int) -> list[PredictionTuple]:
        """Propagate without updates; bounds are the 1-sigma position band."""
        x = self.x.copy()
        P = self.P.copy()
        dt = horizon / steps
        F, Q = self._fq(dt, self.q)
        out = []
        for i in range(1, steps + 1):
            x = F @ x
            P = F @ P @ F.T + Q
            sigma = math.sqrt(max(P[0, 0], 0.0))
            out.append(
                PredictionTuple(
                    lower=float(x[0] - sigma),
                    upper=float(x[0] + sigma),
                    predicted_for=self.t + i * dt,
                    made_at=self.t,
                )
            )
        return out


def predict_cv(
    history: Sequence[tuple[float, float, float]],
    horizon: float,
    steps: int,
    q: float = 0.5,
) -> list[PredictionTuple]:
    """Run the constant-velocity filter over (t, s, sigma) samples and predict.

    Raises on an empty history.
    """
    if not history:
        raise MonitorError("prediction needs at least one prior state")
    if steps < 1:
        raise MonitorError("steps must be >= 1")
    t0, s0, sigma0 = history[0]
    kf = CvKalman(q=q, t0=t0, s0=s0, sigma0=sigma0)
    for t, s, sigma in history[1:]:
        kf.update(t, s, sigma)
    return kf.predict_tuples(horizon, steps)


class _Track:
    __slots__ = ("lane", "kf", "trace", "pending", "last_seen")

    def __init__(self, lane: LaneGeometry, kf: CvKalman, t: float, s: float):
        self.lane = lane
        self.kf = kf
        self.trace: list[tuple[float, float]] = [(t, s)]
        self.pending: list[PredictionTuple] = []
        self.last_seen = t


class PredictionMonitor:
    """Accumulates prediction-interval hits and misses into one opinion.

    The raw counts keep growing; the opinion is the discounted mapping of the
    counts, where the discount models the statistical dependence between
    overlapping predictions of the same trajectory.
    """

    def __init__(self, cfg: MonitorConfig):
        self.cfg = cfg
        self.correct = 0.0
        self.incorrect = 0.0
        self._tracks: dict[int, _Track] = {}

    @property
    def opinion(self) -> Opinion:
        raw = opinion_from_evidence(
            EvidenceVector(counts=(self.correct, self.incorrect), base_rates=HALF,
                           prior_weight=self.cfg.prior_weight)
        )
        return trust_discount(raw, DiscountVector(self.cfg.p_indep))

    def observe(self, tuples: Sequence[PredictionTuple],
                trace: MeasurementTrace) -> tuple[int, int]:
        """Classify a batch against a trace and absorb the counts."""
        n_correct, n_incorrect = classify_predictions(tuples, trace)
        self.correct += n_correct
        self.incorrect += n_incorrect
        return n_correct, n_incorrect

    def update(self, rsu_list: ObjectList, imap: IntersectionMap) -> None:
        t = rsu_list.timestamp
        seen = set()
        for obj in rsu_list.objects:
            track = self._tracks.get(obj.object_id)
            if track is None:
                lane, s, d = imap.nearest_lane(obj.position)
                if abs(d) > lane.width:
                    continue
                self._tracks[obj.object_id] = _Track(
                    lane, CvKalman(self.cfg.kalman_q, t, s, obj.sigma), t, s
                )
                seen.add(obj.object_id)
                continue
            s, d = arc_length_project(track.lane, obj.position)
            if abs(d) > track.lane.width:
                del self._tracks[obj.object_id]
                continue
            track.kf.update(t, s, obj.sigma)
            track.trace.append((t, s))
            track.last_seen = t
            seen.add(obj.object_id)

            due = [p for p in track.pending if p.predicted_for <= t]
            if due:
                self.observe(due, MeasurementTrace(tuple(track.trace)))
                track.pending = [p for p in track.pending if p.predicted_for > t]

            # The speed state is unobservable from a single sample; start
            # predicting once the filter has seen two.
            if track.kf.n_updates >= 2:
                track.pending.extend(
                    track.kf.predict_tuples(self.cfg.pred_horizon,
                                            self.cfg.pred_steps)
                )
            horizon = self.cfg.pred_horizon + 1.0
            track.trace = [s_ for s_ in track.trace if s_[0] >= t - horizon]

        stale = [
            oid
            for oid, track in self._tracks.items()
            if oid not in seen and t - track.last_seen > self.cfg.pred_horizon
        ]
        for oid in stale:
            del self._tracks[oid]


# ---------------------------------------------------------------------------
# Map test
# ---------------------------------------------------------------------------


class LaneBinning:
    """Shared histogram layout: longitudinal bins of lateral-offset cells."""

    def __init__(self, lane: LaneGeometry, bin_length: float, lateral_cell: float):
        self.lane = lane
        self.bin_length = bin_length
        self.lateral_cell = lateral_cell
        self.n_bins = max(1, math.ceil(lane.length / bin_length))
        self.n_cells = max(2, round(2.0 * lane.width / lateral_cell))

    def assign(self, s: float, d: float) -> Optional[tuple[int, int]]:
        """Histogram cell for a projected sample, None when off corridor."""
        if abs(d) > self.lane.width:
            return None
        b = min(int(s / self.bin_length), self.n_bins - 1)
        c = int((d + self.lane.width) / self.lateral_cell)
        return b, min(max(c, 0), self.n_cells - 1)


def pooled_lane_opinion(counts: np.ndarray, prior_weight: float) -> Opinion:
    """Average the per-bin histogram opinions of one lane.

    Bins that never received a sample contribute vacuous opinions, so sparse
    coverage keeps the pooled opinion appropriately uncertain.
    """
    n_bins, n_cells = counts.shape
    rates = (1.0 / n_cells,) * n_cells
    opinions = [
        opinion_from_evidence(
            EvidenceVector(counts=tuple(row), base_rates=rates,
                           prior_weight=prior_weight)
        )
        for row in counts
    ]
    return averaging_fuse_many(opinions)


def build_reference(
    imap: IntersectionMap,
    object_lists: Sequence[ObjectList],
    cfg: MonitorConfig,
) -> tuple[dict[str, Opinion], list[str]]:
    """Commission per-lane reference opinions from verified-correct lists.

    Returns the references plus the ids of lanes that received no samples;
    those lanes get a vacuous reference and should be flagged upstream.
    """
    binnings = {
        lane.lane_id: LaneBinning(lane, cfg.bin_length, cfg.lateral_cell)
        for lane in imap.lanes
    }
    counts = {
        lane_id: np.zeros((b.n_bins, b.n_cells))
        for lane_id, b in binnings.items()
    }
    for obj_list in object_lists:
        for obj in obj_list.objects:
            lane, s, d = imap.nearest_lane(obj.position)
            cell = binnings[lane.lane_id].assign(s, d)
            if cell is not None:
                counts[lane.lane_id][cell] += 1.0

    references: dict[str, Opinion] = {}
    empty: list[str] = []
    for lane_id, table in counts.items():
        if table.sum() == 0.0:
            n_cells = binnings[lane_id].n_cells
            references[lane_id] = Opinion.vacuous(
                (1.0 / n_cells,) * n_cells, cfg.prior_weight
            )
            empty.append(lane_id)
        else:
            references[lane_id] = pooled_lane_opinion(table, cfg.prior_weight)
    return references, empty


class MapMonitor:
    """Compares incoming object lists against commissioned lane references."""

    def __init__(self, imap: IntersectionMap, references: dict[str, Opinion],
                 cfg: MonitorConfig):
        self.cfg = cfg
        self.references = references
        self.binnings = {
            lane.lane_id: LaneBinning(lane, cfg.bin_length, cfg.lateral_cell)
            for lane in imap.lanes
        }
        missing = [lid for lid in self.binnings if lid not in references]
        if missing:
            raise MonitorError(f"missing lane references: {missing}")
        self.counts = {
            lane_id: np.zeros((b.n_bins, b.n_cells))
            for lane_id, b in self.binnings.items()
        }
        self.opinion = Opinion.vacuous(HALF, cfg.prior_weight)
        self.last_dc: Optional[float] = None
        self.n_increases = 0
        self.n_revisions = 0
        self._unit = trust_discount(
            _unit_positive(cfg.prior_weight), DiscountVector(cfg.p_dis)
        )

    def sample_opinion(self, lane_id: str) -> Opinion:
        return pooled_lane_opinion(self.counts[lane_id], self.cfg.prior_weight)

    def update(self, rsu_list: ObjectList, imap: IntersectionMap) -> None:
        if not rsu_list.objects:
            return
        off_corridor = False
        touched: set[str] = set()
        for obj in rsu_list.objects:
            lane, s, d = imap.nearest_lane(obj.position)
            cell = self.binnings[lane.lane_id].assign(s, d)
            if cell is None:
                off_corridor = True
                continue
            self.counts[lane.lane_id][cell] += 1.0
            touched.add(lane.lane_id)

        if off_corridor:
            # Physically unfeasible report: full conflict for this update.
            dc = 1.0
        elif touched:
            dc = max(
                degree_of_conflict(self.sample_opinion(lid), self.references[lid])
                for lid in touched
            )
        else:
            return
        self.last_dc = dc

        if dc < self.cfg.theta_dc:
            if not self.opinion.is_dogmatic:
                self.opinion = cumulative_fuse(self.opinion, self._unit)
            self.n_increases += 1
        else:
            self.opinion = trust_revise(self.opinion, dc)
            self.n_revisions += 1


# ---------------------------------------------------------------------------
# Perception and localization tests
# ---------------------------------------------------------------------------


def _nearest_within(
    position: tuple[float, float], candidates, d_max: float
):
    best = None
    best_d = d_max
    for obj in candidates:
        d = math.hypot(obj.position[0] - position[0], obj.position[1] - position[1])
        if d < best_d:
            best = obj
            best_d = d
    return best, best_d


class PerceptionMonitor:
    """Checks that ego-perceived objects inside RSU coverage are reported."""

    def __init__(self, cfg: MonitorConfig):
        self.cfg = cfg
        self.opinion = Opinion.vacuous(HALF, cfg.prior_weight)
        self.n_confirmed = 0
        self.n_missed = 0
        self._conf = _unit_positive(cfg.prior_weight)
        self._mis = _weighted_negative(cfg.w_mis, cfg.prior_weight)

    def register_missed_detection(self) -> None:
        """Absorb a miss flagged by another test (the ego localization one)."""
        self.opinion = cumulative_fuse(self.opinion, self._mis)
        self.n_missed += 1

    def update(
        self,
        ego_list: ObjectList,
        rsu_list: ObjectList,
        imap: IntersectionMap,
        rsu_ego_id: Optional[int] = None,
    ) -> None:
        """Match one tick's ego perceptions against the RSU list.

        Both lists must stem from the same tick.  ``rsu_ego_id`` names the
        RSU entry associated to the ego vehicle itself, which is never a
        valid match for an ego-perceived object.
        """
        candidates = [o for o in rsu_list.objects if o.object_id != rsu_ego_id]
        for obj in ego_list.objects:
            # Only the mutual field of view is conclusive: an object outside
            # the RSU coverage cannot be a missed detection.
            if not imap.in_rsu_fov(obj.position):
                continue
            match, _ = _nearest_within(obj.position, candidates, self.cfg.d_max)
            if match is not None:
                self.opinion = cumulative_fuse(self.opinion, self._conf)
                self.n_confirmed += 1
            else:
                self.opinion = cumulative_fuse(self.opinion, self._mis)
                self.n_missed += 1


class LocalizationMonitor:
    """Checks the RSU's report of the ego vehicle against ego localization."""

    def __init__(self, cfg: MonitorConfig):
        self.cfg = cfg
        self.opinion = Opinion.vacuous(HALF, cfg.prior_weight)
        self.n_confirmed = 0
        self.n_underestimated = 0
        self.n_flags = 0
        self._conf = _unit_positive(cfg.prior_weight)
        self._under = _weighted_negative(cfg.w_under, cfg.prior_weight)

    def update(
        self, ego: EgoPose, rsu_list: ObjectList, imap: IntersectionMap
    ) -> tuple[bool, Optional[int]]:
        """Check one tick's ego pose against the time-aligned RSU list.

        Returns (missed_detection_flag, associated RSU object id).
        """
        if not imap.in_rsu_fov(ego.position):
            return False, None
        match, d_e = _nearest_within(ego.position, rsu_list.objects, self.cfg.d_max)
        if match is None:
            # The RSU does not report the ego vehicle at all; hand the miss
            # to the perception test.
            self.n_flags += 1
            return True, None
        sigma_total = match.sigma + ego.sigma_ego
        if d_e < 3.0 * sigma_total:
            self.opinion = cumulative_fuse(self.opinion, self._conf)
            self.n_confirmed += 1
        else:
            self.opinion = cumulative_fuse(self.opinion, self._under)
            self.n_underestimated += 1
        return False, match.object_id
