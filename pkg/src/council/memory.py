"""Per-expert success memory.

Each expert owns a profile of segments. A segment is a trajectory prefix that
ended up inside some successful episode's final trajectory, attributed to the
expert whose action completed the prefix. Alongside the prefix the segment
keeps a retrieval ledger: one entry per episode that looked the segment up,
counting how often, and recording at episode end whether that episode
succeeded.

The ledger is what turns raw recall into a value estimate. A segment's
utility is the usage-weighted success rate of the episodes that retrieved it,
so segments that keep getting pulled into failing episodes decay toward 0
while segments that keep appearing in wins approach 1. A segment nobody has
finished an episode with yet sits at the cold-start prior.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .embedding import Embedder, TrigramEmbedder, similarity
from .errors import InvalidStateError
from .trajectory import (
    Action,
    EpisodeRecord,
    Observation,
    Step,
    Trajectory,
    decompose_prefixes,
    serialize_trajectory,
)

DEFAULT_CAPACITY = 512
DEFAULT_COLD_START = 0.5


@dataclass
class LedgerEntry:
    """Retrieval bookkeeping for one (segment, episode) pair."""

    episode_id: str
    usage_count: int = 1
    outcome: bool | None = None

    def __post_init__(self) -> None:
        if self.usage_count < 1:
            raise ValueError("usage_count must be at least 1")


@dataclass
class SMSegment:
    """A stored success-memory segment: prefix, its embedding, and the ledger."""

    segment_id: str
    prefix: Trajectory
    embedding: np.ndarray
    created_at: int
    ledger: dict[str, LedgerEntry] = field(default_factory=dict)


def sms_utility(segment: SMSegment, cold_start: float = DEFAULT_COLD_START) -> float:
    """Usage-weighted success rate over the episodes that retrieved the segment.

    Entries whose outcome is still unset (episode not finalized) are ignored.
    With no decided entries at all the cold-start prior is returned.
    """
    numerator = 0.0
    denominator = 0.0
    for entry in segment.ledger.values():
        if entry.outcome is None:
            continue
        weight = float(entry.usage_count)
        denominator += weight
        if entry.outcome:
            numerator += weight
    if denominator == 0.0:
        return cold_start
    return numerator / denominator


class ExpertProfile:
    """The segment store for a single expert.

    Lookups are exact nearest-neighbor scans over the segment embeddings.
    Mutations are serialized with an internal lock so a profile can be handed
    between threads; scans read a cached embedding matrix that is rebuilt
    after any insert or eviction.
    """

    def __init__(
        self,
        expert_id: str,
        capacity: int = DEFAULT_CAPACITY,
        embedder: Embedder | None = None,
        cold_start: float = DEFAULT_COLD_START,
    ):
        if capacity < 1:
            raise ValueError("profile capacity must be at least 1")
        self.expert_id = expert_id
        self.capacity = capacity
        self.embedder: Embedder = embedder if embedder is not None else TrigramEmbedder()
        self.cold_start = cold_start
        self._segments: dict[str, SMSegment] = {}
        self._order: list[str] = []
        self._by_text: dict[str, str] = {}
        self._next_created = 0
        self._matrix: np.ndarray | None = None
        self._norms: np.ndarray | None = None
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._segments)

    def __contains__(self, segment_id: str) -> bool:
        return segment_id in self._segments

    def get(self, segment_id: str) -> SMSegment | None:
        return self._segments.get(segment_id)

    def segments(self) -> list[SMSegment]:
        """Segments in insertion order."""
        return [self._segments[sid] for sid in self._order]

    def utility(self, segment: SMSegment) -> float:
        return sms_utility(segment, cold_start=self.cold_start)

    # -- insertion ----------------------------------------------------------

    def insert(self, prefix: Trajectory) -> SMSegment:
        """Store a prefix, merging into the existing segment when the exact
        serialization is already present."""
        if prefix.pending is not None:
            raise ValueError("stored prefixes must not carry a pending observation")
        text = serialize_trajectory(prefix)
        with self._lock:
            existing = self._by_text.get(text)
            if existing is not None:
                return self._segments[existing]
            embedding = self.embedder.embed(text)
            created = self._next_created
            segment_id = f"{self.expert_id}:{created}"
            while segment_id in self._segments:
                created += 1
                segment_id = f"{self.expert_id}:{created}"
            segment = SMSegment(
                segment_id=segment_id,
                prefix=prefix,
                embedding=embedding,
                created_at=created,
            )
            self._segments[segment_id] = segment
            self._order.append(segment_id)
            self._by_text[text] = segment_id
            self._next_created = created + 1
            self._matrix = None
            return segment

    def _restore(self, segment: SMSegment) -> None:
        """Used by persistence: re-attach a fully-built segment."""
        text = serialize_trajectory(segment.prefix)
        with self._lock:
            if segment.segment_id in self._segments or text in self._by_text:
                raise ValueError(f"duplicate segment on restore: {segment.segment_id}")
            self._segments[segment.segment_id] = segment
            self._order.append(segment.segment_id)
            self._by_text[text] = segment.segment_id
            self._next_created = max(self._next_created, segment.created_at + 1)
            self._matrix = None

    # -- retrieval ----------------------------------------------------------

    def _scan(self, query_vec: np.ndarray) -> np.ndarray:
        if self._matrix is None:
            self._matrix = np.vstack([self._segments[sid].embedding for sid in self._order])
            self._norms = np.linalg.norm(self._matrix, axis=1)
        qnorm = float(np.linalg.norm(query_vec))
        if qnorm == 0.0:
            return np.zeros(len(self._order), dtype=np.float64)
        dots = self._matrix @ query_vec
        sims = np.zeros(len(self._order), dtype=np.float64)
        nonzero = self._norms > 0.0
        sims[nonzero] = dots[nonzero] / (self._norms[nonzero] * qnorm)
        return sims

    def embed_query(self, query: Trajectory) -> np.ndarray:
        return self.embedder.embed(serialize_trajectory(query))

    def match_scores(self, query_vec: np.ndarray) -> np.ndarray:
        """Similarity of the query against every segment, in insertion order."""
        if not self._order:
            return np.zeros(0, dtype=np.float64)
        return self._scan(query_vec)

    def best_match(self, query: Trajectory | np.ndarray) -> tuple[SMSegment, float] | None:
        """The stored segment most similar to the query, with its score.

        Ties are resolved toward the earliest-inserted segment. Returns None
        on an empty profile.
        """
        if not self._order:
            return None
        query_vec = query if isinstance(query, np.ndarray) else self.embed_query(query)
        sims = self._scan(query_vec)
        idx = int(np.argmax(sims))
        return self._segments[self._order[idx]], float(sims[idx])

    # -- ledger -------------------------------------------------------------

    def record_retrieval(self, segment_id: str, episode_id: str) -> LedgerEntry:
        """Count one retrieval of the segment by the given episode."""
        with self._lock:
            segment = self._segments.get(segment_id)
            if segment is None:
                raise ValueError(f"unknown segment id: {segment_id}")
            entry = segment.ledger.get(episode_id)
            if entry is None:
                entry = LedgerEntry(episode_id=episode_id)
                segment.ledger[episode_id] = entry
            else:
                entry.usage_count += 1
            return entry

    # -- capacity -----------------------------------------------------------

    def prune(self) -> list[str]:
        """Evict lowest-utility segments until within capacity.

        Utility ties evict the oldest segment first. Returns the evicted ids.
        """
        evicted: list[str] = []
        with self._lock:
            while len(self._segments) > self.capacity:
                victim_id = min(
                    self._order,
                    key=lambda sid: (
                        sms_utility(self._segments[sid], cold_start=self.cold_start),
                        self._segments[sid].created_at,
                    ),
                )
                victim = self._segments.pop(victim_id)
                self._order.remove(victim_id)
                del self._by_text[serialize_trajectory(victim.prefix)]
                self._matrix = None
                evicted.append(victim_id)
        return evicted


class EpisodeContext:
    """Per-episode retrieval bookkeeping.

    Routing and value lookups funnel their profile consultations through one
    context so the episode's finalize step knows exactly which ledger entries
    it owns. Retrieval order of first touch is preserved.
    """

    def __init__(self, episode_id: str):
        self.episode_id = episode_id
        self._counts: dict[tuple[str, str], int] = {}

    def record(self, profile: ExpertProfile, segment_id: str) -> None:
        profile.record_retrieval(segment_id, self.episode_id)
        key = (profile.expert_id, segment_id)
        self._counts[key] = self._counts.get(key, 0) + 1

    def retrievals(self) -> list[tuple[str, str, int]]:
        return [(eid, sid, count) for (eid, sid), count in self._counts.items()]


# ---------------------------------------------------------------------------
# Episode finalization
# ---------------------------------------------------------------------------


def finalize_episode(profiles: Mapping[str, ExpertProfile], record: EpisodeRecord) -> None:
    """Close the books on one episode.

    Applies the episode's outcome to every ledger entry it created, then on
    success stores each prefix of the final trajectory into the profile of
    the expert whose action completed it, and finally prunes any profile the
    insertions pushed over capacity. A retrieval that points at a missing
    profile, segment, or ledger entry means the caller's bookkeeping and the
    stores disagree, which is reported as an invalid state.
    """
    for expert_id, segment_id, _count in record.retrievals:
        profile = profiles.get(expert_id)
        if profile is None:
            raise InvalidStateError(f"retrieval references unknown expert: {expert_id}")
        segment = profile.get(segment_id)
        if segment is None:
            raise InvalidStateError(f"retrieval references unknown segment: {segment_id}")
        entry = segment.ledger.get(record.episode_id)
        if entry is None:
            raise InvalidStateError(
                f"no ledger entry for episode {record.episode_id} on segment {segment_id}"
            )
        if entry.outcome is not None:
            raise InvalidStateError(
                f"outcome already set for episode {record.episode_id} on segment {segment_id}"
            )
        entry.outcome = record.success

    if record.success:
        touched: set[str] = set()
        prefixes = decompose_prefixes(record.final_trajectory)
        for step_index, prefix in enumerate(prefixes):
            expert_id = record.per_step_expert[step_index]
            profile = profiles.get(expert_id)
            if profile is None:
                raise InvalidStateError(f"final trajectory names unknown expert: {expert_id}")
            profile.insert(prefix)
            touched.add(expert_id)
        for expert_id in touched:
            profile = profiles[expert_id]
            if len(profile) > profile.capacity:
                profile.prune()


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------
#
# One JSON object per line. Embeddings are never stored; they are recomputed
# from the prefix text on load, so a store written under one embedder can be
# reopened under another.


def profile_records(profiles: Mapping[str, ExpertProfile]) -> list[dict]:
    """Flatten profiles into persistence records, deterministically ordered."""
    records: list[dict] = []
    for expert_id in sorted(profiles):
        profile = profiles[expert_id]
        for segment in sorted(profile.segments(), key=lambda s: s.created_at):
            records.append(
                {
                    "expert_id": expert_id,
                    "segment_id": segment.segment_id,
                    "prefix_steps": [
                        [step.observation.text, step.action.text] for step in segment.prefix.steps
                    ],
                    "created_at": segment.created_at,
                    "ledger": [
                        {
                            "episode_id": entry.episode_id,
                            "usage_count": entry.usage_count,
                            "outcome": entry.outcome,
                        }
                        for entry in segment.ledger.values()
                    ],
                }
            )
    return records


def restore_profiles(
    records: Iterable[dict],
    embedder: Embedder | None = None,
    capacity: int = DEFAULT_CAPACITY,
    cold_start: float = DEFAULT_COLD_START,
) -> dict[str, ExpertProfile]:
    """Rebuild profiles from persistence records, recomputing embeddings."""
    embedder = embedder if embedder is not None else TrigramEmbedder()
    profiles: dict[str, ExpertProfile] = {}
    for record in records:
        expert_id = record["expert_id"]
        profile = profiles.get(expert_id)
        if profile is None:
            profile = ExpertProfile(
                expert_id, capacity=capacity, embedder=embedder, cold_start=cold_start
            )
            profiles[expert_id] = profile
        steps = tuple(
            Step(observation=Observation(obs), action=Action(act))
            for obs, act in record["prefix_steps"]
        )
        prefix = Trajectory(steps=steps)
        ledger = {
            item["episode_id"]: LedgerEntry(
                episode_id=item["episode_id"],
                usage_count=item["usage_count"],
                outcome=item["outcome"],
            )
            for item in record["ledger"]
        }
        segment = SMSegment(
            segment_id=record["segment_id"],
            prefix=prefix,
            embedding=profile.embedder.embed(serialize_trajectory(prefix)),
            created_at=record["created_at"],
            ledger=ledger,
        )
        profile._restore(segment)
    return profiles
