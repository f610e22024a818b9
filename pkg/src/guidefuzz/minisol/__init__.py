"""MiniSol front end: parsing, CFGs and static attributes."""
from .analysis import StaticSummary, closure_keys, dependency_closure, summarize
from .ast import FunctionDecl, SourceUnit
from .cfg import BasicBlock, Cfg, build_cfg, build_cfgs, cyclomatic, neighbors
from .parser import (
    MiniSolError,
    MiniSolSyntaxError,
    MiniSolTypeError,
    NameResolutionError,
    parse,
    parse_file,
    parse_files,
)
from .printer import render

__all__ = [
    "BasicBlock", "Cfg", "FunctionDecl", "MiniSolError", "MiniSolSyntaxError",
    "MiniSolTypeError", "NameResolutionError", "SourceUnit", "StaticSummary",
    "build_cfg", "build_cfgs", "closure_keys", "cyclomatic", "dependency_closure",
    "neighbors", "parse", "parse_file", "parse_files", "render", "summarize",
]
