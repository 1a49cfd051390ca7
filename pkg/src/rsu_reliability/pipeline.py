"""End-to-end estimation pipeline tying simulator, tests and fusion together.

The functions here are pure text-to-text transformations (stream in, metrics
and verdict out), which lets the HTTP service stay stateless and the CLI act
as a plain file shuttle.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

from rsu_reliability.fusion import (
    FusionConfig,
    ReliabilityVerdict,
    beta_pdf_rows,
    evaluate_batch,
    fuse_overall,
)
from rsu_reliability.geometry import IntersectionMap
from rsu_reliability.monitors import (
    LocalizationMonitor,
    MapMonitor,
    MonitorConfig,
    PerceptionMonitor,
    PredictionMonitor,
    build_reference,
)
from rsu_reliability.scenario import (
    ConfigError,
    EgoPose,
    GroundTruth,
    ObjectList,
    ObjectState,
    ScenarioConfig,
    Tick,
    TruthState,
    map_from_dict,
    scenario_from_dict,
    scenario_to_dict,
    simulate,
)
from rsu_reliability.serialize import (
    DataError,
    REFERENCE_FORMAT,
    REPORT_FORMAT,
    STREAM_FORMAT,
    VERDICT_FORMAT,
    check_format,
    csv_text,
    dumps_compact,
    dumps_pretty,
    loads,
    ndjson_lines,
)
from rsu_reliability.sl import (
    DogmaticOpinionError,
    Opinion,
    evidence_from_opinion,
    project,
)

_MONITOR_KEYS = {
    "p_indep", "p_dis", "theta_dc", "w_mis", "w_under", "d_max",
    "bin_length", "lateral_cell", "pred_horizon", "pred_steps", "kalman_q",
    "prior_weight",
}
_FUSION_KEYS = {"w_it", "w_ept"}


@dataclass(frozen=True)
class RunConfig:
    """A full run description: the scenario plus all estimator knobs."""

    scenario: ScenarioConfig
    monitor: MonitorConfig
    fusion: FusionConfig


def run_config_from_dict(raw: dict) -> RunConfig:
    est = dict(raw.get("estimator", {}))
    unknown = set(est) - _MONITOR_KEYS - _FUSION_KEYS
    if unknown:
        raise ConfigError(f"estimator.{sorted(unknown)[0]}: unknown key")
    monitor_kwargs = {k: est[k] for k in _MONITOR_KEYS if k in est}
    for key in ("p_indep", "p_dis"):
        if key in monitor_kwargs:
            monitor_kwargs[key] = tuple(float(v) for v in monitor_kwargs[key])
    fusion_kwargs = {k: float(est[k]) for k in _FUSION_KEYS if k in est}
    scenario_raw = {k: v for k, v in raw.items() if k != "estimator"}
    return RunConfig(
        scenario=scenario_from_dict(scenario_raw),
        monitor=MonitorConfig(**monitor_kwargs),
        fusion=FusionConfig(**fusion_kwargs),
    )


def run_config_to_dict(cfg: RunConfig) -> dict:
    out = scenario_to_dict(cfg.scenario)
    out["estimator"] = {
        "p_indep": list(cfg.monitor.p_indep),
        "p_dis": list(cfg.monitor.p_dis),
        "theta_dc": cfg.monitor.theta_dc,
        "w_mis": cfg.monitor.w_mis,
        "w_under": cfg.monitor.w_under,
        "d_max": cfg.monitor.d_max,
        "bin_length": cfg.monitor.bin_length,
        "lateral_cell": cfg.monitor.lateral_cell,
        "pred_horizon": cfg.monitor.pred_horizon,
        "pred_steps": cfg.monitor.pred_steps,
        "kalman_q": cfg.monitor.kalman_q,
        "prior_weight": cfg.monitor.prior_weight,
        "w_it": cfg.fusion.w_it,
        "w_ept": cfg.fusion.w_ept,
    }
    return out


def apply_overrides(raw: dict, overrides: Sequence[str]) -> dict:
    """Apply repeatable ``key.path=value`` overrides to a raw config dict.

    Values are parsed as JSON when possible, otherwise taken as strings.
    Paths must reference existing keys; list elements use numeric segments.
    """
    out = json.loads(json.dumps(raw))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected key=value")
        path, _, value_text = item.partition("=")
        try:
            value = json.loads(value_text)
        except json.JSONDecodeError:
            value = value_text
        segments = path.split(".")
        target = out
        for i, seg in enumerate(segments):
            last = i == len(segments) - 1
            if isinstance(target, list):
                try:
                    idx = int(seg)
                    target[idx]
                except (ValueError, IndexError):
                    raise ConfigError(f"override {path!r}: bad list index {seg!r}")
                if last:
                    target[idx] = value
                else:
                    target = target[idx]
            elif isinstance(target, dict):
                if seg not in target:
                    raise ConfigError(
                        f"override {path!r}: key {seg!r} does not exist"
                    )
                if last:
                    target[seg] = value
                else:
                    target = target[seg]
            else:
                raise ConfigError(f"override {path!r}: {seg!r} is not a container")
    return out


# ---------------------------------------------------------------------------
# Stream serialization
# ---------------------------------------------------------------------------

_UNITS = {"position": "m", "velocity": "m/s", "sigma": "m", "time": "s"}


def _object_record(obj: ObjectState) -> dict:
    return {
        "object_id": obj.object_id,
        "position": [obj.position[0], obj.position[1]],
        "velocity": [obj.velocity[0], obj.velocity[1]],
        "sigma": obj.sigma,
        "timestamp": obj.timestamp,
        "class_tag": obj.class_tag,
    }


def _truth_record(obj: TruthState) -> dict:
    return {
        "object_id": obj.object_id,
        "position": [obj.position[0], obj.position[1]],
        "velocity": [obj.velocity[0], obj.velocity[1]],
        "class_tag": obj.class_tag,
    }


def _list_record(lst: ObjectList) -> dict:
    return {
        "timestamp": lst.timestamp,
        "source": lst.source,
        "objects": [_object_record(o) for o in lst.objects],
    }


def tick_record(tick: Tick) -> dict:
    return {
        "type": "tick",
        "t": tick.t,
        "ego": {
            "position": [tick.ego.position[0], tick.ego.position[1]],
            "sigma_ego": tick.ego.sigma_ego,
            "timestamp": tick.ego.timestamp,
        },
        "rsu": _list_record(tick.rsu),
        "ego_perception": _list_record(tick.ego_perception),
        "truth": {
            "timestamp": tick.truth.timestamp,
            "objects": [_truth_record(o) for o in tick.truth.objects],
        },
    }


def simulate_stream_text(cfg: RunConfig) -> str:
    meta = {
        "format": STREAM_FORMAT,
        "type": "meta",
        "units": _UNITS,
        "config": run_config_to_dict(cfg),
    }
    lines = [dumps_compact(meta)]
    for tick in simulate(cfg.scenario):
        lines.append(dumps_compact(tick_record(tick)))
    return "\n".join(lines) + "\n"


def _object_from_record(rec: dict) -> ObjectState:
    return ObjectState(
        object_id=int(rec["object_id"]),
        position=tuple(rec["position"]),
        velocity=tuple(rec["velocity"]),
        sigma=float(rec["sigma"]),
        timestamp=float(rec["timestamp"]),
        class_tag=str(rec["class_tag"]),
    )


def _list_from_record(rec: dict) -> ObjectList:
    return ObjectList(
        timestamp=float(rec["timestamp"]),
        objects=tuple(_object_from_record(o) for o in rec["objects"]),
        source=str(rec["source"]),
    )


def parse_stream_text(text: str) -> tuple[dict, list[Tick]]:
    """Parse a stream file into its embedded config and tick sequence."""
    records = ndjson_lines(text, "stream")
    if not records:
        raise DataError("stream: empty file")
    meta = records[0]
    check_format(meta, STREAM_FORMAT, "stream")
    ticks = []
    for rec in records[1:]:
        if rec.get("type") != "tick":
            raise DataError("stream: unexpected record type after the meta line")
        ticks.append(
            Tick(
                t=float(rec["t"]),
                ego=EgoPose(
                    position=tuple(rec["ego"]["position"]),
                    sigma_ego=float(rec["ego"]["sigma_ego"]),
                    timestamp=float(rec["ego"]["timestamp"]),
                ),
                rsu=_list_from_record(rec["rsu"]),
                ego_perception=_list_from_record(rec["ego_perception"]),
                truth=GroundTruth(
                    timestamp=float(rec["truth"]["timestamp"]),
                    objects=tuple(
                        TruthState(
                            object_id=int(o["object_id"]),
                            position=tuple(o["position"]),
                            velocity=tuple(o["velocity"]),
                            class_tag=str(o["class_tag"]),
                        )
                        for o in rec["truth"]["objects"]
                    ),
                ),
            )
        )
    if not ticks:
        raise DataError("stream: contains no ticks")
    return meta["config"], ticks


# ---------------------------------------------------------------------------
# Commissioning
# ---------------------------------------------------------------------------


def commission_from_streams(stream_texts: Sequence[str]) -> tuple[str, dict]:
    """Build per-lane references from one or more fault-free streams.

    Several streams are pooled by averaging the per-stream references, so two
    disjoint commissioning recordings weigh equally regardless of length.
    """
    from rsu_reliability.sl import averaging_fuse_many

    if not stream_texts:
        raise DataError("commission: needs at least one stream")
    per_stream: list[dict[str, Opinion]] = []
    empties: list[list[str]] = []
    monitor_cfg = None
    imap = None
    for text in stream_texts:
        config, ticks = parse_stream_text(text)
        fault = config.get("fault", {})
        if fault.get("kind", "none") != "none":
            raise DataError(
                f"commission: stream carries an injected fault "
                f"({fault.get('kind')!r}); commissioning requires fault-free data"
            )
        run_cfg = run_config_from_dict(config)
        if monitor_cfg is None:
            monitor_cfg = run_cfg.monitor
            imap = run_cfg.scenario.map
        refs, empty = build_reference(
            imap, [tick.rsu for tick in ticks], monitor_cfg
        )
        per_stream.append(refs)
        empties.append(empty)

    lanes = {}
    empty_lanes = []
    for lane in imap.lanes:
        pooled = averaging_fuse_many(
            [refs[lane.lane_id] for refs in per_stream]
        )
        lanes[lane.lane_id] = pooled.to_dict()
        if pooled.is_vacuous:
            empty_lanes.append(lane.lane_id)
    record = {
        "format": REFERENCE_FORMAT,
        "binning": {
            "bin_length": monitor_cfg.bin_length,
            "lateral_cell": monitor_cfg.lateral_cell,
            "prior_weight": monitor_cfg.prior_weight,
        },
        "lanes": lanes,
        "empty_lanes": empty_lanes,
    }
    summary = {"lanes": sorted(lanes), "empty_lanes": empty_lanes}
    return dumps_pretty(record), summary


def parse_reference_text(text: str, monitor_cfg: MonitorConfig) -> dict[str, Opinion]:
    record = loads(text, "reference")
    check_format(record, REFERENCE_FORMAT, "reference")
    binning = record.get("binning", {})
    for key, expected in (
        ("bin_length", monitor_cfg.bin_length),
        ("lateral_cell", monitor_cfg.lateral_cell),
        ("prior_weight", monitor_cfg.prior_weight),
    ):
        if abs(float(binning.get(key, -1.0)) - expected) > 1e-12:
            raise DataError(
                f"reference: binning {key}={binning.get(key)!r} does not match "
                f"the configured {expected!r}"
            )
    return {
        lane_id: Opinion.from_dict(op)
        for lane_id, op in record["lanes"].items()
    }


# ---------------------------------------------------------------------------
# Estimation
# ---------------------------------------------------------------------------


class ReliabilityEstimator:
    """Runs the four tests over a tick stream and fuses the verdict."""

    def __init__(
        self,
        imap: IntersectionMap,
        references: dict[str, Opinion],
        monitor_cfg: MonitorConfig,
        fusion_cfg: FusionConfig,
    ):
        self.imap = imap
        self.fusion_cfg = fusion_cfg
        self.prediction = PredictionMonitor(monitor_cfg)
        self.map = MapMonitor(imap, references, monitor_cfg)
        self.perception = PerceptionMonitor(monitor_cfg)
        self.localization = LocalizationMonitor(monitor_cfg)
        self.n_ticks = 0

    def test_opinions(self) -> dict[str, Opinion]:
        return {
            "prediction": self.prediction.opinion,
            "map": self.map.opinion,
            "perception": self.perception.opinion,
            "localization": self.localization.opinion,
        }

    def overall(self) -> ReliabilityVerdict:
        ops = self.test_opinions()
        return fuse_overall(
            ops["prediction"], ops["map"], ops["perception"], ops["localization"],
            self.fusion_cfg,
        )

    def step(self, tick: Tick) -> dict:
        flag, rsu_ego_id = self.localization.update(tick.ego, tick.rsu, self.imap)
        if flag:
            # The RSU failed to report the ego vehicle itself: that is a
            # missed detection, handled by the perception test.
            self.perception.register_missed_detection()
        self.perception.update(tick.ego_perception, tick.rsu, self.imap, rsu_ego_id)
        self.map.update(tick.rsu, self.imap)
        self.prediction.update(tick.rsu, self.imap)
        self.n_ticks += 1

        record = {"t": tick.t}
        for name, op in self.test_opinions().items():
            record[name] = _opinion_metrics(op)
        record["map"]["dc"] = self.map.last_dc
        record["prediction"]["counts"] = [
            self.prediction.correct, self.prediction.incorrect
        ]
        record["perception"]["counts"] = [
            self.perception.n_confirmed, self.perception.n_missed
        ]
        record["localization"]["counts"] = [
            self.localization.n_confirmed, self.localization.n_underestimated
        ]
        try:
            verdict = self.overall()
            record["overall"] = {
                "projected": verdict.projected,
                "uncertainty": verdict.opinion.uncertainty,
            }
        except DogmaticOpinionError:
            record["overall"] = None
        return record


def _opinion_metrics(op: Opinion) -> dict:
    if op.is_dogmatic:
        evidence = None
    else:
        evidence = list(evidence_from_opinion(op).counts)
    return {
        "projected": project(op)[0],
        "uncertainty": op.uncertainty,
        "evidence": evidence,
    }


def estimate_stream(
    cfg: RunConfig,
    stream_text: str,
    reference_text: str,
    label: Optional[str] = None,
    scenario_id: Optional[str] = None,
) -> tuple[str, str, dict]:
    """Run the full estimation pipeline over a recorded stream.

    The stream's embedded map geometry is authoritative for the data; the
    passed config supplies the estimator parameters.
    """
    if label is not None and label not in ("correct", "faulty"):
        raise DataError(f"label must be 'correct' or 'faulty', got {label!r}")
    stream_config, ticks = parse_stream_text(stream_text)
    imap = map_from_dict(stream_config["map"])
    references = parse_reference_text(reference_text, cfg.monitor)
    estimator = ReliabilityEstimator(imap, references, cfg.monitor, cfg.fusion)

    metrics_lines = []
    for tick in ticks:
        metrics_lines.append(dumps_compact(estimator.step(tick)))

    try:
        verdict = estimator.overall()
    except DogmaticOpinionError as exc:
        raise DataError(str(exc)) from exc

    if scenario_id is None:
        scenario_id = f"seed{stream_config.get('seed')}"
    verdict_record = {
        "format": VERDICT_FORMAT,
        "scenario_id": scenario_id,
        "label": label,
        "seed": stream_config.get("seed"),
        "ticks": len(ticks),
        "verdict": verdict.to_dict(),
        "tests": {
            name: _opinion_metrics(op) | {"opinion": op.to_dict()}
            for name, op in estimator.test_opinions().items()
        },
    }
    summary = {
        "scenario_id": scenario_id,
        "label": label,
        "projected": verdict.projected,
        "ticks": len(ticks),
    }
    return "\n".join(metrics_lines) + "\n", dumps_pretty(verdict_record), summary


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def evaluate_verdicts(verdict_texts: Sequence[str]) -> tuple[str, str, dict]:
    """Build the class-separation report and beta-density plot data."""
    if len(verdict_texts) < 2:
        raise DataError("evaluate: needs at least two labeled verdicts")
    labeled = []
    rows = []
    for text in verdict_texts:
        record = loads(text, "verdict")
        check_format(record, VERDICT_FORMAT, "verdict")
        label = record.get("label")
        if label not in ("correct", "faulty"):
            raise DataError(
                f"verdict {record.get('scenario_id')!r}: missing class label"
            )
        opinion = Opinion.from_dict(record["verdict"]["opinion"])
        verdict = ReliabilityVerdict(
            opinion=opinion,
            projected=record["verdict"]["projected"],
            mass_above_high=record["verdict"]["confidence"]["mass_above_0.9"],
            mass_below_low=record["verdict"]["confidence"]["mass_below_0.7"],
        )
        labeled.append((label, verdict))
        rows.extend(beta_pdf_rows(record["scenario_id"], label, opinion))

    try:
        report = evaluate_batch(labeled)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    report_record = {"format": REPORT_FORMAT, "separation": report.to_dict()}
    csv = csv_text(["scenario_id", "label", "x", "density"], rows)
    return dumps_pretty(report_record), csv, report.to_dict()
