"""Canonical JSON encoding of programs, architectures and runtime configs.

The document layout (field names are part of the contract, see
docs/artifact-format.md)::

    {"kind": "protocol" | "pipeline" | "config",
     "nodes": [{"id", "kind", "attrs", "inputs": [[node, port], ...]}, ...],
     "arrays"/"tables" or "rams"/"cams": [...]}

Output is deterministic: keys are sorted, node and declaration records are
emitted in id order, so structurally equal artifacts encode to equal bytes.
"""

from __future__ import annotations

import json
from typing import Any, Literal, Union

from rpipe.errors import ArtifactSchemaError, ArtifactSyntaxError
from rpipe.ir.config import RuntimeConfig
from rpipe.ir.nodes import (
    ArrayDecl,
    CamDecl,
    CamImpl,
    Opcode,
    PipeKind,
    PipelineArch,
    PipeNode,
    Port,
    ProtocolProgram,
    ProtoKind,
    ProtoNode,
    RamDecl,
    TableDecl,
)

Artifact = Union[ProtocolProgram, PipelineArch, RuntimeConfig]
ArtifactKind = Literal["protocol", "pipeline", "config"]

_INT = "int"
_BOOL = "bool"
_STR = "str"
_OP = "op"
_OPS = "ops"
_OPT_INT = "int?"

PROTO_ATTRS: dict[ProtoKind, dict[str, str]] = {
    ProtoKind.CONSTANT: {"value": _INT, "width": _INT},
    ProtoKind.SLICE: {"offset": _INT, "width": _INT},
    ProtoKind.MERGE: {},
    ProtoKind.EXTEND: {"width": _INT, "signed": _BOOL},
    ProtoKind.UNARY: {"op": _OP},
    ProtoKind.BINARY: {"op": _OP},
    ProtoKind.CONDITIONAL: {},
    ProtoKind.PACKET_IN: {"prefix_len": _INT},
    ProtoKind.PACKET_OUT: {"prefix_len": _INT},
    ProtoKind.ARRAY_READ: {"array": _STR},
    ProtoKind.ARRAY_WRITE: {"array": _STR},
    ProtoKind.TABLE_LOOKUP: {"table": _STR},
    ProtoKind.TABLE_WRITE: {"table": _STR},
}

PIPE_ATTRS: dict[PipeKind, dict[str, str]] = {
    PipeKind.REGISTER: {"width": _INT},
    PipeKind.ROUTER: {},
    PipeKind.CONSTANT: {"width": _INT, "value": _OPT_INT},
    PipeKind.SLICE: {"offset": _INT, "width": _INT},
    PipeKind.MERGE: {},
    PipeKind.EXTEND: {"width": _INT, "signed": _BOOL},
    PipeKind.ALU: {"width": _INT, "ops": _OPS, "latency": _INT},
    PipeKind.PACKET_IN: {"prefix_len": _INT, "mtu": _INT},
    PipeKind.PACKET_OUT: {"prefix_len": _INT, "mtu": _INT},
    PipeKind.RAM_ACCESS: {"ram": _STR, "write": _BOOL},
    PipeKind.CAM_ACCESS: {"cam": _STR, "write": _BOOL},
}

# attributes a caller may leave out when building nodes in code
_DEFAULTS = {"signed": False, "latency": 1, "mtu": 1500, "write": False, "value": None}


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _field(obj: Any, key: str, path: str) -> Any:
    if not isinstance(obj, dict):
        raise ArtifactSchemaError(path, "expected an object")
    if key not in obj:
        raise ArtifactSchemaError(f"{path}.{key}", "missing field")
    return obj[key]


def _typed(value: Any, kind: str, path: str) -> Any:
    if kind == _INT and _is_int(value):
        return value
    if kind == _OPT_INT and (value is None or _is_int(value)):
        return value
    if kind == _BOOL and isinstance(value, bool):
        return value
    if kind == _STR and isinstance(value, str):
        return value
    if kind == _OP and isinstance(value, str):
        try:
            return Opcode(value)
        except ValueError:
            raise ArtifactSchemaError(path, f"unknown opcode {value!r}") from None
    if kind == _OPS and isinstance(value, list):
        return [_typed(v, _OP, f"{path}[{i}]") for i, v in enumerate(value)]
    raise ArtifactSchemaError(path, f"expected {kind}, got {type(value).__name__}")


def _list(obj: Any, key: str, path: str) -> list:
    value = _field(obj, key, path)
    if not isinstance(value, list):
        raise ArtifactSchemaError(f"{path}.{key}", "expected a list")
    return value


def _decode_nodes(doc: dict, kinds: type, schema: dict, node_cls: type) -> list:
    nodes, seen = [], set()
    for i, record in enumerate(_list(doc, "nodes", "$")):
        path = f"$.nodes[{i}]"
        nid = _typed(_field(record, "id", path), _STR, f"{path}.id")
        if nid in seen:
            raise ArtifactSchemaError(f"{path}.id", f"duplicate node id {nid!r}")
        seen.add(nid)
        raw_kind = _field(record, "kind", path)
        try:
            kind = kinds(raw_kind)
        except ValueError:
            raise ArtifactSchemaError(f"{path}.kind", f"unknown node kind {raw_kind!r}") from None
        raw_attrs = _field(record, "attrs", path)
        if not isinstance(raw_attrs, dict):
            raise ArtifactSchemaError(f"{path}.attrs", "expected an object")
        expected = schema[kind]
        for key in raw_attrs:
            if key not in expected:
                raise ArtifactSchemaError(f"{path}.attrs.{key}", f"unknown attribute for {kind}")
        attrs = {}
        for key, kind_name in expected.items():
            if key not in raw_attrs and key in _DEFAULTS:
                attrs[key] = _DEFAULTS[key]
                continue
            attrs[key] = _typed(_field(raw_attrs, key, f"{path}.attrs"), kind_name, f"{path}.attrs.{key}")
        inputs = []
        for j, pair in enumerate(_list(record, "inputs", path)):
            ipath = f"{path}.inputs[{j}]"
            if not (isinstance(pair, list) and len(pair) == 2 and isinstance(pair[0], str) and _is_int(pair[1])):
                raise ArtifactSchemaError(ipath, "expected [node id, port]")
            inputs.append(Port(pair[0], pair[1]))
        nodes.append(node_cls(nid, kind, attrs, tuple(inputs)))
    return nodes


def _decode_decls(doc: dict, key: str, fields: dict[str, str], build) -> list:
    decls, seen = [], set()
    for i, record in enumerate(_list(doc, key, "$")):
        path = f"$.{key}[{i}]"
        values = {name: _typed(_field(record, name, path), kind, f"{path}.{name}") for name, kind in fields.items()}
        if values["id"] in seen:
            raise ArtifactSchemaError(f"{path}.id", f"duplicate id {values['id']!r}")
        seen.add(values["id"])
        decls.append(build(values, path))
    return decls


def _cam(values: dict, path: str) -> CamDecl:
    try:
        impl = CamImpl(values.pop("impl"))
    except ValueError:
        raise ArtifactSchemaError(f"{path}.impl", "expected RegisterCam or HashCam") from None
    return CamDecl(impl=impl, **values)


def _decode_map(doc: dict, key: str, kind: str) -> dict:
    raw = _field(doc, key, "$")
    if not isinstance(raw, dict):
        raise ArtifactSchemaError(f"$.{key}", "expected an object")
    return {k: _typed(v, kind, f"$.{key}.{k}") for k, v in raw.items()}


def decode_text(document: bytes | str) -> str:
    """UTF-8 text of a document; undecodable bytes are a syntax error at their position."""
    if isinstance(document, str):
        return document
    try:
        return document.decode("utf-8")
    except UnicodeDecodeError as exc:
        line = document.count(b"\n", 0, exc.start) + 1
        column = exc.start - (document.rfind(b"\n", 0, exc.start) + 1) + 1
        raise ArtifactSyntaxError(f"invalid UTF-8 ({exc.reason})", line, column) from None


def parse_document(document: bytes | str) -> dict:
    text = decode_text(document)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ArtifactSyntaxError(exc.msg, exc.lineno, exc.colno) from None
    if not isinstance(doc, dict):
        raise ArtifactSchemaError("$", "expected an object")
    return doc


def load_artifact(document: bytes | str, kind: ArtifactKind | None = None) -> Artifact:
    doc = parse_document(document)
    actual = _field(doc, "kind", "$")
    if kind is not None and actual != kind:
        raise ArtifactSchemaError("$.kind", f"expected {kind!r}, got {actual!r}")
    if actual == "protocol":
        return ProtocolProgram.build(
            _decode_nodes(doc, ProtoKind, PROTO_ATTRS, ProtoNode),
            _decode_decls(doc, "arrays", {"id": _STR, "elem_width": _INT, "num_elems": _INT}, lambda v, _: ArrayDecl(**v)),
            _decode_decls(doc, "tables", {"id": _STR, "key_width": _INT, "num_entries": _INT}, lambda v, _: TableDecl(**v)),
        )
    if actual == "pipeline":
        return PipelineArch.build(
            _decode_nodes(doc, PipeKind, PIPE_ATTRS, PipeNode),
            _decode_decls(
                doc, "rams", {"id": _STR, "elem_width": _INT, "num_elems": _INT, "latency": _INT}, lambda v, _: RamDecl(**v)
            ),
            _decode_decls(
                doc,
                "cams",
                {"id": _STR, "key_width": _INT, "num_entries": _INT, "latency": _INT, "impl": _STR},
                _cam,
            ),
        )
    if actual == "config":
        return RuntimeConfig(
            router_select=_decode_map(doc, "router_select", _INT),
            alu_op=_decode_map(doc, "alu_op", _OP),
            const_value=_decode_map(doc, "const_value", _INT),
            mem_bind=_decode_map(doc, "mem_bind", _STR),
        )
    raise ArtifactSchemaError("$.kind", f"unknown artifact kind {actual!r}")


def _plain(value: Any) -> Any:
    if isinstance(value, Opcode):
        return str(value)
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def _encode_node(node: ProtoNode | PipeNode, schema: dict) -> dict:
    attrs = {}
    for key in schema[node.kind]:
        attrs[key] = _plain(node.attrs.get(key, _DEFAULTS.get(key)))
    return {
        "id": node.id,
        "kind": str(node.kind),
        "attrs": attrs,
        "inputs": [[p.node, p.port] for p in node.inputs],
    }


def to_document(artifact: Artifact) -> dict:
    if isinstance(artifact, ProtocolProgram):
        return {
            "kind": "protocol",
            "nodes": [_encode_node(artifact.nodes[k], PROTO_ATTRS) for k in sorted(artifact.nodes)],
            "arrays": [
                {"id": a.id, "elem_width": a.elem_width, "num_elems": a.num_elems}
                for a in sorted(artifact.arrays.values(), key=lambda d: d.id)
            ],
            "tables": [
                {"id": t.id, "key_width": t.key_width, "num_entries": t.num_entries}
                for t in sorted(artifact.tables.values(), key=lambda d: d.id)
            ],
        }
    if isinstance(artifact, PipelineArch):
        return {
            "kind": "pipeline",
            "nodes": [_encode_node(artifact.nodes[k], PIPE_ATTRS) for k in sorted(artifact.nodes)],
            "rams": [
                {"id": r.id, "elem_width": r.elem_width, "num_elems": r.num_elems, "latency": r.latency}
                for r in sorted(artifact.rams.values(), key=lambda d: d.id)
            ],
            "cams": [
                {"id": c.id, "key_width": c.key_width, "num_entries": c.num_entries, "latency": c.latency, "impl": str(c.impl)}
                for c in sorted(artifact.cams.values(), key=lambda d: d.id)
            ],
        }
    if isinstance(artifact, RuntimeConfig):
        return {
            "kind": "config",
            "router_select": dict(artifact.router_select),
            "alu_op": {k: str(v) for k, v in artifact.alu_op.items()},
            "const_value": dict(artifact.const_value),
            "mem_bind": dict(artifact.mem_bind),
        }
    raise TypeError(f"cannot store {type(artifact).__name__}")


def dump_json(document: Any) -> bytes:
    return (json.dumps(document, indent=2, sort_keys=True) + "\n").encode("utf-8")


def store_artifact(artifact: Artifact) -> bytes:
    return dump_json(to_document(artifact))
