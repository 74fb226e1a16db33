"""Session lifecycle, append-only persistence, and deterministic replay.

Each session is one JSON-lines file under the persistence directory.  Every
state transition is written before the response is produced, so a record
persisted after iteration k replays to the same state across restarts.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field

import numpy as np

from ..catalog import DietType
from ..elicitation import (
    Elicitor,
    Phase,
    Presentation,
    StrategyConfig,
    UserState,
    entropy,
)
from ..errors import (
    ConcurrentStep,
    ConfigHashMismatch,
    SelectionNotSubset,
    SessionCompleted,
    UnknownSession,
)
from ..nutrition import GoalProfile, select_candidate_pool, suitability_score
from ..recommender import Recommendation, baseline_recommend, recommend
from ..simulation import acceptance_metrics
from .assets import AssetStore, DietAssets
from .config import ServiceConfig

STATUS_AWAITING = "awaiting_choices"
STATUS_COMPLETED = "completed"
STATUS_ABANDONED = "abandoned"


def _now() -> float:
    return time.time()


def derive_session_seed(global_seed: int, session_id: str) -> int:
    digest = hashlib.sha256(f"{global_seed}:{session_id}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def serialize_state(state: UserState) -> str:
    return json.dumps(state.to_dict(), sort_keys=True, separators=(",", ":"))


@dataclass
class Session:
    session_id: str
    profile: GoalProfile
    assets: DietAssets
    elicitor: Elicitor
    state: UserState
    pool_ids: list[str]
    pool_scores: list[float]
    T: int
    rng: np.random.Generator
    pending: Presentation | None = None
    status: str = STATUS_AWAITING
    recommendations: list[Recommendation] = field(default_factory=list)
    baseline: list[Recommendation] = field(default_factory=list)
    evaluation_order: list[str] = field(default_factory=list)
    verdicts: dict[str, bool] = field(default_factory=dict)
    entropies: list[float] = field(default_factory=list)
    iterations: list[dict] = field(default_factory=list)
    created_at: float = field(default_factory=_now)
    updated_at: float = field(default_factory=_now)
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def t_next(self) -> int:
        return self.state.t + 1

    def step_payload(self) -> dict:
        assert self.pending is not None
        items = [
            {
                "id": self.assets.catalog.items[i].id,
                "name": self.assets.catalog.items[i].name,
                "image_url": self.assets.catalog.items[i].image_url,
            }
            for i in self.pending.items
        ]
        return {
            "session_id": self.session_id,
            "t": self.t_next,
            "T": self.T,
            "phase": self.pending.phase.value,
            "items": items,
        }


class SessionManager:
    def __init__(self, config: ServiceConfig, assets: AssetStore | None = None):
        self.config = config
        self.assets = assets or AssetStore(config)
        self.sessions: dict[str, Session] = {}
        self._registry_lock = threading.Lock()
        os.makedirs(config.persistence_dir, exist_ok=True)

    # --- persistence ---

    def _path(self, session_id: str) -> str:
        return os.path.join(self.config.persistence_dir, f"{session_id}.jsonl")

    def _append(self, session_id: str, event: dict) -> None:
        event = dict(event, ts=_now())
        with open(self._path(session_id), "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def _read_events(self, session_id: str) -> list[dict]:
        path = self._path(session_id)
        if not os.path.exists(path):
            raise UnknownSession(session_id)
        with open(path, "r", encoding="utf-8") as fh:
            return [json.loads(line) for line in fh if line.strip()]

    # --- lifecycle ---

    def create_session(self, profile: GoalProfile, seed: int | None = None) -> dict:
        assets = self.assets.get(profile.diet)
        session_id = uuid.uuid4().hex
        session_seed = (
            seed if seed is not None
            else derive_session_seed(self.config.global_seed, session_id)
        )

        scores = suitability_score(assets.suitability, profile)
        pool = select_candidate_pool(
            scores, assets.catalog.ids(), M=self.config.M, seed=session_seed
        )
        strategy = StrategyConfig(
            beta=self.config.beta,
            exponent_clamp=self.config.exponent_clamp,
            top_fraction=self.config.fraction,
            rng_seed=session_seed,
        )
        elicitor = Elicitor(assets.embeddings, assets.index, strategy)
        state = elicitor.new_state()
        rng = np.random.default_rng(session_seed)

        session = Session(
            session_id=session_id,
            profile=profile,
            assets=assets,
            elicitor=elicitor,
            state=state,
            pool_ids=pool.item_ids,
            pool_scores=pool.scores,
            T=self.config.T,
            rng=rng,
        )
        session.entropies.append(entropy(state.p))
        session.pending = elicitor.next_presentation(state, 1, rng)

        self._append(session_id, {
            "type": "created",
            "session_id": session_id,
            "profile": profile.to_dict(),
            "config_hash": assets.config_hash,
            "T": session.T,
            "seed": session_seed,
        })
        self._persist_presentation(session)
        with self._registry_lock:
            self.sessions[session_id] = session
        return session.step_payload()

    def _persist_presentation(self, session: Session) -> None:
        catalog = session.assets.catalog
        self._append(session.session_id, {
            "type": "presented",
            "t": session.t_next,
            "phase": session.pending.phase.value,
            "items": [catalog.items[i].id for i in session.pending.items],
        })

    def _get(self, session_id: str) -> Session:
        with self._registry_lock:
            session = self.sessions.get(session_id)
        if session is None:
            session = self._restore(session_id)
        self._check_ttl(session)
        return session

    def _check_ttl(self, session: Session) -> None:
        if (
            session.status == STATUS_AWAITING
            and _now() - session.updated_at > self.config.session_ttl_seconds
        ):
            session.status = STATUS_ABANDONED
            self._append(session.session_id, {"type": "abandoned"})

    def submit_choices(self, session_id: str, selected_ids: list[str]) -> dict:
        session = self._get(session_id)
        if not session.lock.acquire(blocking=False):
            raise ConcurrentStep(f"a step is already in flight for session {session_id}")
        try:
            return self._apply_choices(session, selected_ids)
        finally:
            session.lock.release()

    def _apply_choices(self, session: Session, selected_ids: list[str]) -> dict:
        if session.status == STATUS_ABANDONED:
            raise SessionCompleted(f"session {session.session_id} was abandoned")
        if session.status != STATUS_AWAITING or session.pending is None:
            raise SessionCompleted(f"session {session.session_id} already completed")
        catalog = session.assets.catalog
        presented_ids = {catalog.items[i].id for i in session.pending.items}
        unknown = [s for s in selected_ids if s not in presented_ids]
        if unknown:
            raise SelectionNotSubset(f"ids {unknown} were not presented")

        K = session.pending.items
        L = tuple(catalog.index_of[s] for s in dict.fromkeys(selected_ids))
        t = session.t_next

        # persist the choice before mutating state
        self._append(session.session_id, {
            "type": "chosen", "t": t, "selected": list(dict.fromkeys(selected_ids)),
        })
        session.elicitor.apply_choices(session.state, K, L)
        session.entropies.append(entropy(session.state.p))
        session.iterations.append({
            "t": t,
            "presented": [catalog.items[i].id for i in K],
            "selected": list(dict.fromkeys(selected_ids)),
        })
        session.updated_at = _now()

        if t < session.T:
            session.pending = session.elicitor.next_presentation(
                session.state, t + 1, session.rng
            )
            self._persist_presentation(session)
            return session.step_payload()

        return self._complete(session)

    def _complete(self, session: Session) -> dict:
        from ..nutrition import CandidatePool

        pool = CandidatePool(item_ids=session.pool_ids, scores=session.pool_scores)
        session.recommendations = recommend(
            session.state.p, pool, session.assets.catalog, N=self.config.N
        )
        baseline_seed = int(session.rng.integers(2**31))
        session.baseline = baseline_recommend(
            pool, session.assets.catalog, N=self.config.N, seed=baseline_seed,
            exclude={r.id for r in session.recommendations},
        )
        merged = [r.id for r in session.recommendations] + [r.id for r in session.baseline]
        order = session.rng.permutation(len(merged))
        session.evaluation_order = [merged[i] for i in order]
        session.pending = None
        session.status = STATUS_COMPLETED

        self._append(session.session_id, {
            "type": "completed",
            "recommendations": [r.to_dict() for r in session.recommendations],
            "baseline": [r.to_dict() for r in session.baseline],
            "evaluation_order": session.evaluation_order,
            "final_state": session.state.to_dict(),
        })
        return {
            "session_id": session.session_id,
            "status": STATUS_COMPLETED,
            "recommendations": [r.to_dict() for r in session.recommendations],
        }

    def get_session(self, session_id: str) -> dict:
        session = self._get(session_id)
        record = {
            "session_id": session.session_id,
            "profile": session.profile.to_dict(),
            "config_hash": session.assets.config_hash,
            "T": session.T,
            "status": session.status,
            "iterations": session.iterations,
            "entropy_trajectory": session.entropies,
        }
        if session.status == STATUS_AWAITING and session.pending is not None:
            record["step"] = session.step_payload()
        if session.status == STATUS_COMPLETED:
            record["recommendations"] = [r.to_dict() for r in session.recommendations]
        return record

    # --- evaluation (Yummy / No-way buckets) ---

    def get_evaluation(self, session_id: str) -> dict:
        session = self._get(session_id)
        if session.status != STATUS_COMPLETED:
            raise SessionCompleted("evaluation is only available for completed sessions")
        catalog = session.assets.catalog
        items = [
            {
                "id": iid,
                "name": catalog.items[catalog.index_of[iid]].name,
                "image_url": catalog.items[catalog.index_of[iid]].image_url,
            }
            for iid in session.evaluation_order
            if iid not in session.verdicts
        ]
        return {
            "session_id": session_id,
            "items": items,
            "judged": len(session.verdicts),
            "total": len(session.evaluation_order),
        }

    def post_verdicts(self, session_id: str, verdicts: dict[str, bool]) -> dict:
        session = self._get(session_id)
        if session.status != STATUS_COMPLETED:
            raise SessionCompleted("verdicts require a completed session")
        valid_ids = set(session.evaluation_order)
        unknown = [i for i in verdicts if i not in valid_ids]
        if unknown:
            raise SelectionNotSubset(f"ids {unknown} are not under evaluation")
        for iid, accepted in verdicts.items():
            if iid not in session.verdicts:
                self._append(session_id, {
                    "type": "verdict", "id": iid, "accepted": bool(accepted),
                })
                session.verdicts[iid] = bool(accepted)
        result = {
            "session_id": session_id,
            "judged": len(session.verdicts),
            "total": len(session.evaluation_order),
        }
        if len(session.verdicts) == len(session.evaluation_order):
            result["report"] = self._evaluation_report(session)
        return result

    def _evaluation_report(self, session: Session) -> dict:
        learned_ids = [r.id for r in session.recommendations]
        baseline_ids = [r.id for r in session.baseline]
        learned = [session.verdicts[i] for i in learned_ids]
        base = [session.verdicts[i] for i in baseline_ids]
        l_rate, l_mae, l_rmse = acceptance_metrics(learned, len(learned_ids))
        b_rate, b_mae, b_rmse = acceptance_metrics(base, len(baseline_ids))
        return {
            "total_judged": len(session.verdicts),
            "learned": {"acceptance_rate": l_rate, "mae": l_mae, "rmse": l_rmse},
            "baseline": {"acceptance_rate": b_rate, "mae": b_mae, "rmse": b_rmse},
            "difference": l_rate - b_rate,
        }

    # --- replay / restore ---

    def replay(self, session_id: str) -> UserState:
        """Rebuild the terminal state from the persisted log; the result must
        match the stored final state byte-for-byte when serialized."""
        events = self._read_events(session_id)
        header = events[0]
        if header.get("type") != "created":
            raise UnknownSession(f"corrupt record for session {session_id}")
        profile = GoalProfile.from_dict(header["profile"])
        assets = self.assets.get(profile.diet)
        if header["config_hash"] != assets.config_hash:
            raise ConfigHashMismatch(
                "session was recorded against a different catalog/config"
            )
        strategy = StrategyConfig(
            beta=self.config.beta,
            exponent_clamp=self.config.exponent_clamp,
            top_fraction=self.config.fraction,
            rng_seed=header["seed"],
        )
        elicitor = Elicitor(assets.embeddings, assets.index, strategy)
        state = elicitor.new_state()
        presented: dict[int, list[str]] = {}
        for ev in events[1:]:
            if ev["type"] == "presented":
                presented[ev["t"]] = ev["items"]
            elif ev["type"] == "chosen":
                K = tuple(assets.catalog.index_of[i] for i in presented[ev["t"]])
                L = tuple(assets.catalog.index_of[i] for i in ev["selected"])
                elicitor.apply_choices(state, K, L)
        return state

    def _restore(self, session_id: str) -> Session:
        """Reconstruct an in-memory session after a restart."""
        events = self._read_events(session_id)
        header = events[0]
        profile = GoalProfile.from_dict(header["profile"])
        assets = self.assets.get(profile.diet)
        if header["config_hash"] != assets.config_hash:
            raise ConfigHashMismatch(
                "session was recorded against a different catalog/config"
            )
        session_seed = header["seed"]
        scores = suitability_score(assets.suitability, profile)
        pool = select_candidate_pool(
            scores, assets.catalog.ids(), M=self.config.M, seed=session_seed
        )
        strategy = StrategyConfig(
            beta=self.config.beta,
            exponent_clamp=self.config.exponent_clamp,
            top_fraction=self.config.fraction,
            rng_seed=session_seed,
        )
        elicitor = Elicitor(assets.embeddings, assets.index, strategy)
        state = elicitor.new_state()
        session = Session(
            session_id=session_id,
            profile=profile,
            assets=assets,
            elicitor=elicitor,
            state=state,
            pool_ids=pool.item_ids,
            pool_scores=pool.scores,
            T=header["T"],
            rng=np.random.default_rng(session_seed),
        )
        session.entropies.append(entropy(state.p))

        presented: dict[int, dict] = {}
        last_presented_t = 0
        for ev in events[1:]:
            if ev["type"] == "presented":
                presented[ev["t"]] = ev
                last_presented_t = ev["t"]
            elif ev["type"] == "chosen":
                pres = presented[ev["t"]]
                K = tuple(assets.catalog.index_of[i] for i in pres["items"])
                L = tuple(assets.catalog.index_of[i] for i in ev["selected"])
                elicitor.apply_choices(state, K, L)
                session.entropies.append(entropy(state.p))
                session.iterations.append({
                    "t": ev["t"], "presented": pres["items"], "selected": ev["selected"],
                })
            elif ev["type"] == "completed":
                session.status = STATUS_COMPLETED
                session.recommendations = [
                    Recommendation(**r) for r in ev["recommendations"]
                ]
                session.baseline = [Recommendation(**r) for r in ev["baseline"]]
                session.evaluation_order = ev["evaluation_order"]
            elif ev["type"] == "verdict":
                session.verdicts[ev["id"]] = ev["accepted"]
            elif ev["type"] == "abandoned":
                session.status = STATUS_ABANDONED
            session.updated_at = ev.get("ts", session.updated_at)

        if session.status == STATUS_AWAITING:
            if last_presented_t == state.t + 1:
                pres = presented[last_presented_t]
                items = tuple(assets.catalog.index_of[i] for i in pres["items"])
                session.pending = Presentation(items=items, phase=Phase(pres["phase"]))
            else:
                session.pending = elicitor.next_presentation(state, state.t + 1, session.rng)
                self._persist_presentation(session)

        with self._registry_lock:
            self.sessions[session_id] = session
        return session
