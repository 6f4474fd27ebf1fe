"""Temporal causal explanations for panel data and agent rollouts.

Typical use: build or load a :class:`ContextSet`, pose a :class:`WhyQuestion`
against a :class:`PanelDataset` or a set of rollouts, call :func:`explain`
and render the resulting tree with :func:`render_text`.
"""

from ._kernels import BACKEND
from .data import MEAN, HansGeneratorConfig, PanelDataset, Statistic, generate_hans
from .engine import WhyQuestion, explain, parse_question, validate_question
from .errors import EXIT_CODES, TSCEError
from .graph import ContextSet, Edge, TemporalCausalGraph, Variable, hans_graph, killer_contexts
from .rules import ERTriple, apply_er3, eval_er_binary, eval_er_continuous, eval_er_score
from .tree import ExplanationTree, SelectionConfig
from .verbalize import Lexicon, render_text

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "MEAN",
    "HansGeneratorConfig",
    "PanelDataset",
    "Statistic",
    "generate_hans",
    "WhyQuestion",
    "explain",
    "parse_question",
    "validate_question",
    "EXIT_CODES",
    "TSCEError",
    "ContextSet",
    "Edge",
    "TemporalCausalGraph",
    "Variable",
    "hans_graph",
    "killer_contexts",
    "ERTriple",
    "apply_er3",
    "eval_er_binary",
    "eval_er_continuous",
    "eval_er_score",
    "ExplanationTree",
    "SelectionConfig",
    "Lexicon",
    "render_text",
]
