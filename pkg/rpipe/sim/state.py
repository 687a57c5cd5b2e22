"""Persistent memory contents shared by successive packets of one trace."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

from rpipe.errors import ArtifactSchemaError, ConfigError
from rpipe.ir.nodes import CamImpl, PipelineArch, ProtocolProgram, mask
from rpipe.ir.serialize import dump_json, parse_document

HASH_MULTIPLIER = 0x9E3779B97F4A7C15
_U64 = mask(64)


def cam_hash(key: int, seed: int) -> int:
    """64-bit multiplicative hash; keys wider than 64 bits are xor-folded first."""
    folded = 0
    while True:
        folded ^= key & _U64
        key >>= 64
        if not key:
            break
    return ((folded ^ seed) * HASH_MULTIPLIER) & _U64


@dataclass
class CamState:
    impl: CamImpl
    key_width: int
    entries: list[tuple[bool, int]]

    @classmethod
    def empty(cls, impl: CamImpl, key_width: int, num_entries: int) -> "CamState":
        return cls(impl, key_width, [(False, 0)] * num_entries)

    def _bucket(self, key: int, seed: int) -> int:
        return (cam_hash(key, seed) >> 32) % len(self.entries)

    def lookup(self, key: int, seed: int) -> tuple[bool, int]:
        if self.impl is CamImpl.HASH:
            bucket = self._bucket(key, seed)
            valid, stored = self.entries[bucket]
            return (True, bucket) if valid and stored == key else (False, 0)
        for index, (valid, stored) in enumerate(self.entries):
            if valid and stored == key:
                return True, index
        return False, 0

    def place(self, key: int, seed: int) -> tuple[bool, int]:
        """Entry a write of ``key`` would occupy; the index hint is ignored."""
        if self.impl is CamImpl.HASH:
            return True, self._bucket(key, seed)
        for index, (valid, _) in enumerate(self.entries):
            if not valid:
                return True, index
        return False, 0

    def store(self, index: int, key: int) -> None:
        self.entries[index] = (True, key & mask(self.key_width))


@dataclass
class StateStore:
    arrays: dict[str, list[int]] = field(default_factory=dict)
    cams: dict[str, CamState] = field(default_factory=dict)
    hash_seed: int = 0
    # element width per array id
    widths: dict[str, int] = field(default_factory=dict)

    @classmethod
    def for_program(
        cls, program: ProtocolProgram, cam_impls: Mapping[str, CamImpl] | None = None, hash_seed: int = 0
    ) -> "StateStore":
        impls = cam_impls or {}
        return cls(
            arrays={a.id: [0] * a.num_elems for a in program.arrays.values()},
            cams={
                t.id: CamState.empty(impls.get(t.id, CamImpl.REGISTER), t.key_width, t.num_entries)
                for t in program.tables.values()
            },
            hash_seed=hash_seed,
            widths={a.id: a.elem_width for a in program.arrays.values()},
        )

    @classmethod
    def for_arch(cls, arch: PipelineArch, hash_seed: int = 0) -> "StateStore":
        return cls(
            arrays={r.id: [0] * r.num_elems for r in arch.rams.values()},
            cams={c.id: CamState.empty(c.impl, c.key_width, c.num_entries) for c in arch.cams.values()},
            hash_seed=hash_seed,
            widths={r.id: r.elem_width for r in arch.rams.values()},
        )

    def copy(self) -> "StateStore":
        return StateStore(
            arrays={k: list(v) for k, v in self.arrays.items()},
            cams={k: CamState(c.impl, c.key_width, list(c.entries)) for k, c in self.cams.items()},
            hash_seed=self.hash_seed,
            widths=dict(self.widths),
        )

    def rebind(self, target: "StateStore", mem_bind: Mapping[str, str]) -> "StateStore":
        """Copy contents named by program state ids into the bound memories of ``target``."""
        out = target.copy()
        for state_id, mem_id in mem_bind.items():
            if state_id in self.arrays:
                if mem_id not in out.arrays:
                    raise ConfigError(f"array {state_id!r} bound to missing RAM {mem_id!r}")
                out.arrays[mem_id] = list(self.arrays[state_id])
            elif state_id in self.cams:
                if mem_id not in out.cams:
                    raise ConfigError(f"table {state_id!r} bound to missing CAM {mem_id!r}")
                out.cams[mem_id].entries = list(self.cams[state_id].entries)
        return out

    def project(self, mem_bind: Mapping[str, str]) -> "StateStore":
        """View of a pipeline store under program state ids."""
        out = StateStore(hash_seed=self.hash_seed)
        for state_id, mem_id in mem_bind.items():
            if mem_id in self.arrays:
                out.arrays[state_id] = list(self.arrays[mem_id])
                if mem_id in self.widths:
                    out.widths[state_id] = self.widths[mem_id]
            elif mem_id in self.cams:
                cam = self.cams[mem_id]
                out.cams[state_id] = CamState(cam.impl, cam.key_width, list(cam.entries))
        return out

    def differences(self, other: "StateStore") -> list[str]:
        diffs = []
        for sid in sorted(set(self.arrays) | set(other.arrays)):
            mine, theirs = self.arrays.get(sid), other.arrays.get(sid)
            if mine != theirs:
                where = next((i for i, (a, b) in enumerate(zip(mine or [], theirs or [])) if a != b), None)
                diffs.append(f"array {sid}: first difference at index {where}")
        for sid in sorted(set(self.cams) | set(other.cams)):
            mine, theirs = self.cams.get(sid), other.cams.get(sid)
            if (mine and mine.entries) != (theirs and theirs.entries):
                diffs.append(f"table {sid}: entries differ")
        return diffs


def load_state(document: bytes | str, store: StateStore) -> StateStore:
    """Apply a state-preload document to a copy of ``store``.

    Layout::

        {"kind": "state", "hash_seed": 0,
         "arrays": {"id": {"index": value, ...}},
         "tables": {"id": [{"index": i, "key": k}, ...]}}
    """
    doc = parse_document(document)
    if doc.get("kind") != "state":
        raise ArtifactSchemaError("$.kind", "expected 'state'")
    out = store.copy()
    seed = doc.get("hash_seed", store.hash_seed)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ArtifactSchemaError("$.hash_seed", "expected a non-negative integer")
    out.hash_seed = seed
    arrays = doc.get("arrays", {})
    if not isinstance(arrays, dict):
        raise ArtifactSchemaError("$.arrays", "expected an object")
    for aid, cells in arrays.items():
        if aid not in out.arrays:
            raise ArtifactSchemaError(f"$.arrays.{aid}", "unknown array")
        if not isinstance(cells, dict):
            raise ArtifactSchemaError(f"$.arrays.{aid}", "expected an object of index: value")
        limit = 1 << out.widths[aid] if aid in out.widths else None
        for index, value in cells.items():
            path = f"$.arrays.{aid}.{index}"
            try:
                i = int(index)
            except ValueError:
                raise ArtifactSchemaError(path, "index is not an integer") from None
            if not 0 <= i < len(out.arrays[aid]):
                raise ArtifactSchemaError(path, f"index outside [0, {len(out.arrays[aid])})")
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise ArtifactSchemaError(path, "expected a non-negative integer")
            if limit is not None and value >= limit:
                raise ArtifactSchemaError(path, f"value does not fit {out.widths[aid]} bits")
            out.arrays[aid][i] = value
    tables = doc.get("tables", {})
    if not isinstance(tables, dict):
        raise ArtifactSchemaError("$.tables", "expected an object")
    for tid, entries in tables.items():
        if tid not in out.cams:
            raise ArtifactSchemaError(f"$.tables.{tid}", "unknown table")
        if not isinstance(entries, list):
            raise ArtifactSchemaError(f"$.tables.{tid}", "expected a list")
        cam = out.cams[tid]
        for i, entry in enumerate(entries):
            try:
                index, key = int(entry["index"]), int(entry["key"])
            except (KeyError, TypeError, ValueError):
                raise ArtifactSchemaError(f"$.tables.{tid}[{i}]", "expected {index, key}") from None
            if not 0 <= index < len(cam.entries) or not 0 <= key < 1 << cam.key_width:
                raise ArtifactSchemaError(f"$.tables.{tid}[{i}]", "index or key outside the table")
            cam.store(index, key)
    return out


def dump_state(store: StateStore) -> bytes:
    doc: dict[str, Any] = {
        "kind": "state",
        "hash_seed": store.hash_seed,
        "arrays": {aid: {str(i): v for i, v in enumerate(cells) if v} for aid, cells in store.arrays.items()},
        "tables": {
            tid: [{"index": i, "key": key} for i, (valid, key) in enumerate(cam.entries) if valid]
            for tid, cam in store.cams.items()
        },
    }
    return dump_json(doc)
