"""Interactive discovery sessions: accept/undo/prune/join with deterministic replay."""

from __future__ import annotations

import hashlib
import json
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .boxes import (Box, GridParams, box_stats, fit_from_stream, grid_search,
                    join_rules, membership, prune)
from .dataset import Dataset
from .projection import ProjectionSpec, project_all


class SessionError(ValueError):
    pass


class StaleDigestError(SessionError):
    pass


@dataclass(frozen=True)
class SessionConfig:
    dataset_name: str
    spec: ProjectionSpec
    grid: GridParams
    mirror: str = "none"

    def to_dict(self) -> dict:
        return {
            "dataset_name": self.dataset_name,
            "spec": self.spec.to_dict(),
            "grid": {
                "cell_width": self.grid.cell_width,
                "cell_height": self.grid.cell_height,
                "max_span_w": self.grid.max_span_w,
                "max_span_h": self.grid.max_span_h,
                "coverage_fraction": self.grid.coverage_fraction,
                "purity_threshold": self.grid.purity_threshold,
            },
            "mirror": self.mirror,
        }

    @staticmethod
    def from_dict(d: dict) -> "SessionConfig":
        return SessionConfig(
            dataset_name=d["dataset_name"],
            spec=ProjectionSpec.from_dict(d["spec"]),
            grid=GridParams(**d["grid"]),
            mirror=d.get("mirror", "none"),
        )


class Session:
    """One analyst's discovery loop over a projected dataset.

    The append-only action log is the source of truth: every mutation
    re-materializes the rule set from the initial state, so replaying the log
    elsewhere reproduces the exported rule file byte for byte.
    """

    def __init__(self, dataset: Dataset, config: SessionConfig,
                 log_path: Optional[Path] = None, session_id: Optional[str] = None):
        self.id = session_id or uuid.uuid4().hex[:12]
        self.dataset = dataset
        self.config = config
        self.polylines = project_all(dataset, config.spec, mirror=config.mirror)
        self.actions: list = []
        self.log_path = Path(log_path) if log_path else None
        self._materialize()

    # -- state -------------------------------------------------------------

    def _effective_ops(self) -> list:
        ops: list = []
        for action in self.actions:
            if action["action"] == "undo":
                if ops:
                    ops.pop()
            else:
                ops.append(action)
        return ops

    def _materialize(self):
        ops = self._effective_ops()
        accepted = []
        transforms = []
        for op in ops:
            if op["action"] == "accept":
                accepted.append((Box.from_dict(op["box"]), op["predicted_class"]))
            else:
                transforms.append(op)
        ruleset = fit_from_stream(self.polylines, accepted, self.config.spec,
                                  class_order=self.dataset.classes) if accepted else None
        remaining = []
        for i, p in enumerate(self.polylines):
            if not any(membership(p, box) for box, _ in accepted):
                remaining.append(i)
        for op in transforms:
            if ruleset is None:
                continue
            if op["action"] == "prune":
                decisions = {k: tuple(v) if isinstance(v, list) else v
                             for k, v in (op.get("decisions") or {}).items()}
                report = prune(ruleset, op["min_cases"], op["mode"], self.polylines, decisions)
                ruleset = report.ruleset
            elif op["action"] == "join":
                ruleset = join_rules(ruleset, self.polylines)
        self.ruleset = ruleset
        self.remaining = remaining
        self._cached_candidates = None

    @property
    def status(self) -> str:
        if not self.remaining:
            return "complete"
        if self._cached_candidates is not None:
            return "candidates_ready"
        return "idle"

    def digest(self) -> str:
        payload = json.dumps({"config": self.config.to_dict(), "actions": self.actions},
                             sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def remaining_counts(self) -> dict:
        counts: dict = {}
        for i in self.remaining:
            lbl = self.polylines[i].label
            counts[lbl] = counts.get(lbl, 0) + 1
        return counts

    def summary(self) -> dict:
        return {
            "id": self.id,
            "digest": self.digest(),
            "status": self.status,
            "dataset": self.config.dataset_name,
            "total_cases": len(self.polylines),
            "remaining": len(self.remaining),
            "remaining_counts": self.remaining_counts(),
            "rules": [r.to_dict() for r in self.ruleset.rules] if self.ruleset else [],
            "rules_text": self.ruleset.render_text() if self.ruleset else "",
        }

    # -- actions -----------------------------------------------------------

    def _record(self, action: dict):
        self.actions.append(action)
        if self.log_path is not None:
            with open(self.log_path, "a") as fh:
                fh.write(json.dumps(action, sort_keys=True) + "\n")
        self._materialize()

    def candidates(self, top_k: int = 10) -> dict:
        """Ranked candidate boxes for the remaining set, with live stats."""
        if not self.remaining:
            return {}
        ranked = grid_search(self.polylines, self.config.grid, self.remaining,
                             class_order=self.dataset.classes, top_k=top_k)
        out = {}
        rem_polys = [self.polylines[i] for i in self.remaining]
        for cls, boxes in ranked.items():
            rows = []
            for box in boxes:
                stats = box_stats(box, rem_polys, self.dataset.classes)
                rows.append({
                    "corners": list(box.corners()),
                    "counts": stats.counts,
                    "purity": stats.purity_fraction,
                    "coverage": stats.coverage,
                })
            out[cls] = rows
        self._cached_candidates = out
        return out

    def accept(self, corners, predicted_class: Optional[str] = None,
               membership_mode: str = "node_in"):
        box = Box(*corners, membership_mode=membership_mode)
        if predicted_class is None:
            stats = box_stats(box, [self.polylines[i] for i in self.remaining],
                              self.dataset.classes)
            if stats.dominant is None:
                raise SessionError("box covers no remaining cases")
            predicted_class = stats.dominant
        self._record({"action": "accept", "box": box.to_dict(),
                      "predicted_class": predicted_class})

    def undo(self):
        self._record({"action": "undo"})

    def prune(self, min_cases: int, mode: str = "refuse", decisions: Optional[dict] = None):
        if self.ruleset is None:
            raise SessionError("nothing to prune")
        self._record({"action": "prune", "min_cases": min_cases, "mode": mode,
                      "decisions": decisions or {}})

    def join(self):
        if self.ruleset is None:
            raise SessionError("nothing to join")
        self._record({"action": "join"})

    def export_rules(self) -> bytes:
        if self.ruleset is None:
            raise SessionError("no rules to export")
        return self.ruleset.to_json().encode()

    def action_log(self) -> str:
        return "\n".join(json.dumps(a, sort_keys=True) for a in self.actions)


def replay_session(dataset: Dataset, config: SessionConfig, actions) -> Session:
    """Rebuild a session headlessly from its initial state and action log."""
    if isinstance(actions, str):
        actions = [json.loads(line) for line in actions.splitlines() if line.strip()]
    session = Session(dataset, config)
    for action in actions:
        session.actions.append(dict(action))
    session._materialize()
    return session
