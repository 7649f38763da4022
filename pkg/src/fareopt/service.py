"""Live preference-elicitation sessions over HTTP.

A session walks a participant through consent, ``n_active`` actively
generated queries (the posterior is resampled after every answer and the
next query maximizes information gain over a fresh candidate pool), then
``n_holdout`` seeded-random queries kept for validation. Every query and
posterior is a pure function of the session seed plus the answers so far,
so replaying a session's append-only event log reconstructs its state
exactly.

Storage layout, one pair of files per session under ``data_dir``:
    <id>.events.jsonl   append-only, fsynced before an answer is acked
    <id>.snapshot.json  convenience snapshot, atomically replaced
"""

from __future__ import annotations

import json
import os
import secrets
import threading
from dataclasses import dataclass, field
from pathlib import Path

from . import seeding
from .choice import (
    DEFAULT_SCALES,
    AttributeScales,
    Mode,
    OptionSet,
    TransportOption,
    dominated_mask,
)
from .learning import (
    ChainConfig,
    Posterior,
    Prior,
    QueryRanges,
    ResponseRecord,
    generate_pool,
    generate_query,
    next_query,
    sample_posterior,
    validation_accuracy,
)

CONDITIONS = ("pre_pandemic", "post_pandemic")


class ServiceError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


@dataclass(frozen=True)
class ParticipantMeta:
    residence: str
    prior_covid_infection: bool
    consent: bool


@dataclass(frozen=True)
class SurveyConfig:
    data_dir: Path
    n_active: int = 10
    n_holdout: int = 6
    pool_size: int = 1000
    n_roads: int = 2
    ranges: QueryRanges = field(default_factory=QueryRanges)
    chain: ChainConfig = field(default_factory=ChainConfig)
    prior: Prior = field(default_factory=Prior)
    scales: AttributeScales = DEFAULT_SCALES

    def __post_init__(self):
        object.__setattr__(self, "data_dir", Path(self.data_dir))
        if self.n_active < 0 or self.n_holdout < 0 or self.n_active + self.n_holdout < 1:
            raise ValueError("protocol needs at least one query")

    @property
    def n_total(self) -> int:
        return self.n_active + self.n_holdout


def load_survey_config(path: str | Path | None, data_dir_override: str | None = None) -> SurveyConfig:
    """Survey config from a JSON file; every key optional except data_dir
    (which --data-dir may supply instead)."""
    doc: dict = {}
    if path is not None:
        doc = json.loads(Path(path).read_text())
        if not isinstance(doc, dict):
            raise ValueError("survey config root must be an object")
    data_dir = data_dir_override or doc.get("data_dir")
    if not data_dir:
        raise ValueError("survey config needs 'data_dir' (or pass --data-dir)")
    kwargs: dict = {"data_dir": Path(data_dir)}
    for key in ("n_active", "n_holdout", "pool_size", "n_roads"):
        if key in doc:
            kwargs[key] = int(doc[key])
    if "ranges" in doc:
        r = doc["ranges"]
        kwargs["ranges"] = QueryRanges(
            latency=tuple(r.get("latency", (10.0, 120.0))),
            cost=tuple(r.get("cost", (0.0, 30.0))),
            risk=tuple(r.get("risk", (0.0, 350.0))),
            rail_occupancy=tuple(r.get("rail_occupancy", (0.0, 1.0))),
            rail_full_risk=float(r.get("rail_full_risk", 350.0)),
        )
    if "chain" in doc:
        c = doc["chain"]
        kwargs["chain"] = ChainConfig(
            n_steps=int(c.get("n_steps", 10000)),
            burn_in=int(c.get("burn_in", 2000)),
            n_samples=int(c.get("n_samples", 100)),
            proposal_sigma=float(c.get("proposal_sigma", 0.05)),
        )
    if "constrain_signs" in doc:
        kwargs["prior"] = Prior(constrain_signs=bool(doc["constrain_signs"]))
    if "scales" in doc:
        s = doc["scales"]
        kwargs["scales"] = AttributeScales(
            float(s["latency"]), float(s["cost"]), float(s["risk"])
        )
    return SurveyConfig(**kwargs)


@dataclass
class Session:
    id: str
    condition: str
    seed: int
    meta: ParticipantMeta
    records: list[ResponseRecord] = field(default_factory=list)
    posterior: Posterior | None = None

    def phase(self, cfg: SurveyConfig) -> dict:
        k = len(self.records)
        if k < cfg.n_active:
            return {"name": "active", "index": k + 1, "of": cfg.n_active}
        if k < cfg.n_total:
            return {"name": "holdout", "index": k - cfg.n_active + 1, "of": cfg.n_holdout}
        return {"name": "done"}


def _option_to_dict(option: TransportOption, cfg: SurveyConfig) -> dict:
    if option.mode is Mode.RAIL:
        display = {
            "kind": "rail_occupancy",
            "percent": 100.0 * option.risk / cfg.ranges.rail_full_risk,
        }
    elif option.risk == 0.0:
        display = {"kind": "none"}
    else:
        display = {"kind": "exposure", "minutes": option.risk}
    return {
        "mode": option.mode.value,
        "road_index": option.road_index,
        "latency": option.latency,
        "cost": option.cost,
        "risk": option.risk,
        "risk_display": display,
    }


def _option_from_dict(doc: dict) -> TransportOption:
    return TransportOption(
        mode=Mode(doc["mode"]),
        latency=float(doc["latency"]),
        cost=float(doc["cost"]),
        risk=float(doc["risk"]),
        road_index=doc.get("road_index"),
    )


class SurveyService:
    """Session registry with per-session serialization and event-log
    persistence. Distinct sessions never share mutable state."""

    def __init__(self, config: SurveyConfig):
        self.config = config
        self.config.data_dir.mkdir(parents=True, exist_ok=True)
        self._sessions: dict[str, Session] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()
        for events_file in sorted(self.config.data_dir.glob("*.events.jsonl")):
            session = self._replay(events_file)
            self._sessions[session.id] = session
            self._locks[session.id] = threading.Lock()

    # -- deterministic derivations -------------------------------------

    def _posterior_for(self, session: Session) -> Posterior:
        k = min(len(session.records), self.config.n_active)
        return sample_posterior(
            session.records[:k],
            prior=self.config.prior,
            chain=self.config.chain,
            seed=seeding.derived_seed(session.seed, seeding.CHAIN, k),
            scales=self.config.scales,
        )

    def _query_for(self, session: Session) -> OptionSet:
        k = len(session.records)
        if k >= self.config.n_total:
            raise ServiceError(409, "survey_done", "survey already completed")
        if k < self.config.n_active:
            pool = generate_pool(
                self.config.pool_size,
                seeding.rng_for(session.seed, seeding.POOL, k),
                self.config.ranges,
                self.config.n_roads,
            )
            return next_query(pool, session.posterior.samples, self.config.scales)
        return generate_query(
            seeding.rng_for(session.seed, seeding.HOLDOUT, k - self.config.n_active),
            self.config.ranges,
            self.config.n_roads,
        )

    # -- persistence ----------------------------------------------------

    def _events_path(self, session_id: str) -> Path:
        return self.config.data_dir / f"{session_id}.events.jsonl"

    def _append_event(self, session_id: str, event: dict):
        line = json.dumps(event, sort_keys=True)
        with open(self._events_path(session_id), "a") as fh:
            fh.write(line + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def _write_snapshot(self, session: Session):
        path = self.config.data_dir / f"{session.id}.snapshot.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(self._snapshot_dict(session), sort_keys=True))
        os.replace(tmp, path)

    def _snapshot_dict(self, session: Session) -> dict:
        return {
            "v": 1,
            "session_id": session.id,
            "condition": session.condition,
            "seed": session.seed,
            "meta": {
                "residence": session.meta.residence,
                "prior_covid_infection": session.meta.prior_covid_infection,
                "consent": session.meta.consent,
            },
            "answers": [r.chosen_index for r in session.records],
            "posterior_samples": session.posterior.samples.tolist(),
            "acceptance_rate": session.posterior.acceptance_rate,
        }

    def _replay(self, events_file: Path) -> Session:
        """Rebuild a session purely from its event log; queries and
        posteriors re-derive from the stored seed."""
        events = [json.loads(line) for line in events_file.read_text().splitlines() if line]
        if not events or events[0].get("type") != "created":
            raise ValueError(f"{events_file.name}: malformed event log")
        head = events[0]
        session = Session(
            id=head["session_id"],
            condition=head["condition"],
            seed=int(head["seed"]),
            meta=ParticipantMeta(**head["meta"]),
        )
        session.posterior = self._posterior_for(session)
        for event in events[1:]:
            if event.get("type") != "answer":
                raise ValueError(f"{events_file.name}: unexpected event {event.get('type')}")
            query = self._query_for(session)
            session.records.append(ResponseRecord(query, int(event["choice"])))
            if len(session.records) <= self.config.n_active:
                session.posterior = self._posterior_for(session)
        return session

    # -- operations -------------------------------------------------------

    def create_session(self, meta: ParticipantMeta, condition: str,
                       seed: int | None = None) -> Session:
        if not meta.consent:
            raise ServiceError(400, "consent_required", "informed consent is required")
        if condition not in CONDITIONS:
            raise ServiceError(400, "bad_condition", f"condition must be one of {CONDITIONS}")
        session_id = secrets.token_urlsafe(16)
        if seed is None:
            seed = int.from_bytes(secrets.token_bytes(4), "big")
        session = Session(id=session_id, condition=condition, seed=int(seed), meta=meta)
        session.posterior = self._posterior_for(session)
        with self._registry_lock:
            self._sessions[session_id] = session
            self._locks[session_id] = threading.Lock()
        self._append_event(session_id, {
            "v": 1, "type": "created", "session_id": session_id,
            "condition": condition, "seed": session.seed,
            "meta": {
                "residence": meta.residence,
                "prior_covid_infection": meta.prior_covid_infection,
                "consent": meta.consent,
            },
            "protocol": {
                "n_active": self.config.n_active,
                "n_holdout": self.config.n_holdout,
                "pool_size": self.config.pool_size,
            },
        })
        self._write_snapshot(session)
        return session

    def _get(self, session_id: str) -> tuple[Session, threading.Lock]:
        with self._registry_lock:
            session = self._sessions.get(session_id)
            lock = self._locks.get(session_id)
        if session is None:
            raise ServiceError(404, "unknown_session", "no such session")
        return session, lock

    def get_query(self, session_id: str) -> dict:
        session, lock = self._get(session_id)
        with lock:
            query = self._query_for(session)  # idempotent until answered
            k = len(session.records)
            return {
                "v": 1,
                "k": k,
                "phase": session.phase(self.config),
                "progress": {"answered": k, "total": self.config.n_total},
                "condition": session.condition,
                "options": [_option_to_dict(o, self.config) for o in query.options],
            }

    def submit_answer(self, session_id: str, choice: int, k: int | None = None) -> dict:
        session, lock = self._get(session_id)
        with lock:
            current_k = len(session.records)
            if current_k >= self.config.n_total:
                raise ServiceError(409, "survey_done", "survey already completed")
            if k is not None and k != current_k:
                raise ServiceError(
                    409, "stale_query",
                    f"answer targets query {k} but query {current_k} is pending",
                )
            query = self._query_for(session)
            if not isinstance(choice, int) or not 0 <= choice < len(query):
                raise ServiceError(400, "invalid_choice", f"choice must be in [0, {len(query) - 1}]")
            if dominated_mask(query)[choice]:
                raise ServiceError(
                    400, "dominated_choice",
                    "that option is dominated; the choice model cannot explain it",
                )
            # Durable before acknowledged: event first, state second.
            self._append_event(session_id, {"v": 1, "type": "answer",
                                            "k": current_k, "choice": choice})
            session.records.append(ResponseRecord(query, choice))
            if len(session.records) <= self.config.n_active:
                session.posterior = self._posterior_for(session)
            self._write_snapshot(session)
            return {"v": 1, "phase": session.phase(self.config),
                    "answered": len(session.records)}

    def results(self, session_id: str) -> dict:
        session, lock = self._get(session_id)
        with lock:
            if len(session.records) < self.config.n_total:
                raise ServiceError(409, "not_done", "survey still in progress")
            held_out = session.records[self.config.n_active:]
            accuracy = (
                validation_accuracy(session.posterior, held_out, self.config.scales)
                if held_out else None
            )
            samples = session.posterior.samples.tolist()
            return {
                "v": 1,
                "session_id": session.id,
                "condition": session.condition,
                "seed": session.seed,
                "posterior": {
                    "mean": session.posterior.mean().tolist(),
                    "samples": samples,
                    "acceptance_rate": session.posterior.acceptance_rate,
                    "chain": {
                        "n_steps": session.posterior.n_steps,
                        "burn_in": session.posterior.burn_in,
                        "thin": session.posterior.thin,
                        "seed": session.posterior.seed,
                    },
                },
                "holdout_accuracy": accuracy,
                "dataset": [
                    {
                        "options": [_option_to_dict(o, self.config) for o in r.query.options],
                        "chosen_index": r.chosen_index,
                    }
                    for r in session.records
                ],
                "population": {
                    "v": 1,
                    "scales": {
                        "latency": self.config.scales.latency,
                        "cost": self.config.scales.cost,
                        "risk": self.config.scales.risk,
                    },
                    "users": [{
                        "car_owner": False,
                        "label": session.id,
                        "samples": samples,
                    }],
                },
            }


from pydantic import BaseModel as _BaseModel


class MetaModel(_BaseModel):
    residence: str = ""
    prior_covid_infection: bool = False
    consent: bool = False


class CreateSessionModel(_BaseModel):
    v: int = 1
    meta: MetaModel
    condition: str
    seed: int | None = None


class AnswerModel(_BaseModel):
    v: int = 1
    choice: int
    k: int | None = None


def create_app(service: SurveyService):
    """FastAPI wrapper; all request/response payloads carry {"v": 1}."""
    from fastapi import FastAPI, Request
    from fastapi.middleware.cors import CORSMiddleware
    from fastapi.responses import JSONResponse

    app = FastAPI(title="fareopt survey service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(ServiceError)
    async def _service_error(request: Request, err: ServiceError):
        return JSONResponse(
            status_code=err.status,
            content={"v": 1, "error": {"code": err.code, "message": err.message}},
        )

    @app.get("/healthz")
    def healthz():
        return {"v": 1, "status": "ok"}

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionModel):
        session = service.create_session(
            ParticipantMeta(
                residence=body.meta.residence,
                prior_covid_infection=body.meta.prior_covid_infection,
                consent=body.meta.consent,
            ),
            body.condition,
            body.seed,
        )
        return {"v": 1, "session_id": session.id,
                "phase": session.phase(service.config),
                "progress": {"answered": 0, "total": service.config.n_total}}

    @app.get("/sessions/{session_id}/query")
    def get_query(session_id: str):
        return service.get_query(session_id)

    @app.post("/sessions/{session_id}/answer")
    def submit_answer(session_id: str, body: AnswerModel):
        return service.submit_answer(session_id, body.choice, body.k)

    @app.get("/sessions/{session_id}/results")
    def results(session_id: str):
        return service.results(session_id)

    return app
