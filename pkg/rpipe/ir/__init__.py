"""Typed dataflow graphs for protocol programs and pipeline architectures."""

from rpipe.ir.config import RuntimeConfig, check_config
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
    clog2,
)
from rpipe.ir.serialize import load_artifact, store_artifact
from rpipe.ir.validate import Diagnostic, ValidationReport, validate_pipeline, validate_protocol

__all__ = [
    "ArrayDecl",
    "CamDecl",
    "CamImpl",
    "Diagnostic",
    "Opcode",
    "PipeKind",
    "PipeNode",
    "PipelineArch",
    "Port",
    "ProtoKind",
    "ProtoNode",
    "ProtocolProgram",
    "RamDecl",
    "RuntimeConfig",
    "TableDecl",
    "ValidationReport",
    "check_config",
    "clog2",
    "load_artifact",
    "store_artifact",
    "validate_pipeline",
    "validate_protocol",
]
