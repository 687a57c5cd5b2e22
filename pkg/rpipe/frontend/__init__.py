"""Program construction, bundled programs and architecture generators."""

from rpipe.frontend.builder import ProgramBuilder
from rpipe.frontend.builtins import BUILTINS, builtin_program, passthrough_program
from rpipe.frontend.flex import FlexParams, MemoryBlock, alu_split, gen_flex_arch, load_flex_params, sweep_flex
from rpipe.frontend.normalize import normalize_program

__all__ = [
    "BUILTINS",
    "FlexParams",
    "MemoryBlock",
    "ProgramBuilder",
    "alu_split",
    "builtin_program",
    "gen_flex_arch",
    "load_flex_params",
    "normalize_program",
    "passthrough_program",
    "sweep_flex",
]
